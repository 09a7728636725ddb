use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::HdaError;

/// Receptor type of a synapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SynapseType {
    #[serde(rename = "AMPA")]
    Ampa,
    #[serde(rename = "NMDA")]
    Nmda,
    #[serde(rename = "GABA_A")]
    GabaA,
    #[serde(rename = "GABA_B")]
    GabaB,
}

impl SynapseType {
    pub const ALL: [SynapseType; 4] = [
        SynapseType::Ampa,
        SynapseType::Nmda,
        SynapseType::GabaA,
        SynapseType::GabaB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_excitatory(self) -> bool {
        matches!(self, SynapseType::Ampa | SynapseType::Nmda)
    }

    pub fn name(self) -> &'static str {
        match self {
            SynapseType::Ampa => "AMPA",
            SynapseType::Nmda => "NMDA",
            SynapseType::GabaA => "GABA_A",
            SynapseType::GabaB => "GABA_B",
        }
    }
}

impl fmt::Display for SynapseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynapseType {
    type Err = HdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AMPA" => Ok(SynapseType::Ampa),
            "NMDA" => Ok(SynapseType::Nmda),
            "GABA_A" | "GABAA" | "GABA-A" => Ok(SynapseType::GabaA),
            "GABA_B" | "GABAB" | "GABA-B" => Ok(SynapseType::GabaB),
            other => Err(HdaError::parse(format!("unknown synapse type '{other}'"))),
        }
    }
}

/// One value per synapse type, indexed by [`SynapseType`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerType<T> {
    #[serde(rename = "AMPA")]
    pub ampa: T,
    #[serde(rename = "NMDA")]
    pub nmda: T,
    #[serde(rename = "GABA_A")]
    pub gaba_a: T,
    #[serde(rename = "GABA_B")]
    pub gaba_b: T,
}

impl<T> PerType<T> {
    pub fn from_fn(mut f: impl FnMut(SynapseType) -> T) -> Self {
        PerType {
            ampa: f(SynapseType::Ampa),
            nmda: f(SynapseType::Nmda),
            gaba_a: f(SynapseType::GabaA),
            gaba_b: f(SynapseType::GabaB),
        }
    }

    pub fn get(&self, u: SynapseType) -> &T {
        match u {
            SynapseType::Ampa => &self.ampa,
            SynapseType::Nmda => &self.nmda,
            SynapseType::GabaA => &self.gaba_a,
            SynapseType::GabaB => &self.gaba_b,
        }
    }

    pub fn get_mut(&mut self, u: SynapseType) -> &mut T {
        match u {
            SynapseType::Ampa => &mut self.ampa,
            SynapseType::Nmda => &mut self.nmda,
            SynapseType::GabaA => &mut self.gaba_a,
            SynapseType::GabaB => &mut self.gaba_b,
        }
    }
}
