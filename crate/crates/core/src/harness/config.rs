//! Experiment configuration, read from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assimilation::{FilterConfig, DEFAULT_LAMBDA};
use crate::error::{HdaError, Result};
use crate::hemodynamics::HemodynamicParams;
use crate::hyperprior::Bounds;
use crate::lif::NeuronParams;
use crate::rng::{derive_seed, Stream};
use crate::synapse::{PerType, SynapseType};
use crate::topology::TopologyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub n: usize,
    /// Nominal in-degree; ignored by the scale-free generator.
    pub degree: usize,
    #[serde(flatten)]
    pub kind: TopologyKind,
    /// Graph seed; derived from the master seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TopologySpec {
    pub fn resolved_seed(&self, master: u64) -> u64 {
        self.seed
            .unwrap_or_else(|| derive_seed(master, Stream::Topology, 0))
    }
}

/// Explicit natural-coordinate bounds for one synapse type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOverride {
    #[serde(rename = "type")]
    pub synapse: SynapseType,
    pub min: f64,
    pub max: f64,
}

/// Conductance prior family. Only the exponential family has the
/// closed-form transport the filter relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorShape {
    #[default]
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SigmaH,
    /// Observation-noise standard deviation; the filter uses its square.
    ObsNoise,
    NMembers,
    PRewire,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaH => "sigma_h",
            SweepAxis::ObsNoise => "obs_noise",
            SweepAxis::NMembers => "n_members",
            SweepAxis::PRewire => "p_rewire",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = HdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_h" => Ok(SweepAxis::SigmaH),
            "obs_noise" => Ok(SweepAxis::ObsNoise),
            "n_members" => Ok(SweepAxis::NMembers),
            "p_rewire" => Ok(SweepAxis::PRewire),
            _ => Err(HdaError::parse(format!("unknown sweep axis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    pub m: usize,
    pub t_len: usize,
    pub mu0: f64,
    pub n_trials: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            m: 200,
            t_len: 400,
            mu0: 0.0,
            n_trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub duration_ms: u64,
    pub output_dir: PathBuf,
    pub topology: TopologySpec,
    pub assimilated: Vec<SynapseType>,
    /// True hyperparameters (exponential means, mS).
    pub ground_truth: PerType<f64>,
    pub prior: PriorShape,
    pub lambda: f64,
    /// Overrides of the default `(truth / 4, 2 truth)` bounds.
    pub bounds: Vec<BoundsOverride>,
    pub neuron: NeuronParams,
    pub hemodynamics: HemodynamicParams,
    /// Variance of Gaussian noise added to the true population activity.
    pub z_noise_var: f64,
    /// Variance of Gaussian noise added to the sampled true BOLD signal.
    pub obs_noise_var: f64,
    pub filter: FilterConfig,
    /// Number of analysis steps in the initial and final scoring windows.
    pub score_window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub toy: ToySpec,
}

impl Default for ExperimentConfig {
    /// Desk-scale profile: 200 neurons, in-degree 20, 20 members, 40 s.
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            duration_ms: 40_000,
            output_dir: PathBuf::from("runs/default"),
            topology: TopologySpec {
                n: 200,
                degree: 20,
                kind: TopologyKind::Random,
                seed: None,
            },
            assimilated: vec![SynapseType::Ampa],
            ground_truth: PerType {
                ampa: 0.007,
                nmda: 0.0005,
                gaba_a: 0.02,
                gaba_b: 0.002,
            },
            prior: PriorShape::Exponential,
            lambda: DEFAULT_LAMBDA,
            bounds: Vec::new(),
            neuron: NeuronParams::default(),
            hemodynamics: HemodynamicParams::default(),
            z_noise_var: 1e-8,
            obs_noise_var: 1e-8,
            filter: FilterConfig::default(),
            score_window: 10,
            sweep: None,
            toy: ToySpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| HdaError::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| HdaError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HdaError::config(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.assimilated.is_empty() {
            return Err(HdaError::config("assimilated set must be nonempty"));
        }
        let period_ms = self.filter.window_ms()?;
        if self.duration_ms == 0 || !self.duration_ms.is_multiple_of(period_ms) {
            return Err(HdaError::config(format!(
                "duration {} ms is not a positive multiple of {period_ms} ms",
                self.duration_ms
            )));
        }
        if SynapseType::ALL
            .iter()
            .any(|&u| !(*self.ground_truth.get(u) > 0.0))
        {
            return Err(HdaError::config(
                "ground-truth hyperparameters must be positive",
            ));
        }
        if !(self.z_noise_var >= 0.0 && self.obs_noise_var >= 0.0) {
            return Err(HdaError::config("noise variances must be >= 0"));
        }
        if self.score_window == 0 {
            return Err(HdaError::config("score_window must be positive"));
        }
        for b in &self.bounds {
            Bounds {
                min: b.min,
                max: b.max,
            }
            .validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.repeats == 0 {
                return Err(HdaError::config("sweep needs values and repeats > 0"));
            }
        }
        self.filter.validate()?;
        self.neuron.validate()?;
        self.hemodynamics.validate()
    }

    /// Bounds aligned with `assimilated`.
    pub fn bounds(&self) -> Vec<Bounds> {
        self.assimilated
            .iter()
            .map(|&u| {
                self.bounds
                    .iter()
                    .find(|b| b.synapse == u)
                    .map(|b| Bounds {
                        min: b.min,
                        max: b.max,
                    })
                    .unwrap_or_else(|| Bounds::around_truth(*self.ground_truth.get(u)))
            })
            .collect()
    }

    /// True hyperparameters aligned with `assimilated`.
    pub fn h_star(&self) -> Vec<f64> {
        self.assimilated
            .iter()
            .map(|&u| *self.ground_truth.get(u))
            .collect()
    }

    pub fn n_observations(&self) -> usize {
        let period = self.filter.window_ms().unwrap_or(800);
        (self.duration_ms / period) as usize
    }
}
