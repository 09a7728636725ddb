//! Ensemble members and the forecast step.

use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{HdaError, Result};
use crate::hemodynamics::{bold_readout, bw_step, HemodynamicParams, HemodynamicState};
use crate::hyperprior::{cdf_transport_in_place, natural_of, Bounds, PriorFamily};
use crate::lif::{self, NetworkState, NeuronParams, SynapticConductances};
use crate::rng::SimRng;
use crate::synapse::SynapseType;
use crate::topology::NetworkTopology;

use super::FilterConfig;

/// Everything members share: the graph, model constants, which synapse types
/// are assimilated, and the known conductances of the other types.
#[derive(Debug, Clone)]
pub struct ModelContext<'a> {
    pub topology: &'a NetworkTopology,
    pub neuron: NeuronParams,
    pub hemo: HemodynamicParams,
    pub assimilated: Vec<SynapseType>,
    /// Natural-coordinate bounds, aligned with `assimilated`.
    pub bounds: Vec<Bounds>,
    /// Slope of the logistic hyperparameter transform.
    pub lambda: f64,
    /// Conductances copied into every member for non-assimilated types.
    pub known: &'a SynapticConductances,
}

impl ModelContext<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.assimilated.is_empty() {
            return Err(HdaError::config(
                "at least one synapse type must be assimilated",
            ));
        }
        for (k, u) in self.assimilated.iter().enumerate() {
            if self.assimilated[..k].contains(u) {
                return Err(HdaError::config(format!("{u} listed twice")));
            }
        }
        if self.bounds.len() != self.assimilated.len() {
            return Err(HdaError::config(
                "one bound per assimilated type is required",
            ));
        }
        for b in &self.bounds {
            b.validate()?;
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(HdaError::config("lambda must be positive"));
        }
        let n = self.topology.n_neurons();
        if SynapseType::ALL
            .iter()
            .any(|&u| self.known.get(u).len() != n)
        {
            return Err(HdaError::config(
                "known conductances do not match network size",
            ));
        }
        self.neuron.validate()?;
        self.hemo.validate()
    }

    pub fn n_assimilated(&self) -> usize {
        self.assimilated.len()
    }

    /// Labels of the filter state vector, in order.
    pub fn state_labels(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .assimilated
            .iter()
            .map(|u| format!("h'[{u}]"))
            .collect();
        v.extend(["s", "f", "v", "q", "y_pred"].map(String::from));
        v
    }
}

/// One ensemble member: sampled conductances, network microstate,
/// hemodynamic state and transformed hyperparameters.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub g: SynapticConductances,
    pub network: NetworkState,
    pub hemo: HemodynamicState,
    /// Transformed hyperparameters, aligned with `ModelContext::assimilated`.
    pub h_prime: Vec<f64>,
    pub y_pred: f64,
    pub(crate) rng: SimRng,
}

impl EnsembleMember {
    /// Draw a member at `h_prime`: conductances of assimilated types are
    /// i.i.d. exponential with the natural hyperparameter as mean.
    pub fn new(ctx: &ModelContext<'_>, h_prime: Vec<f64>, mut rng: SimRng) -> Result<Self> {
        if h_prime.len() != ctx.n_assimilated() {
            return Err(HdaError::config(
                "h' length does not match assimilated types",
            ));
        }
        let n = ctx.topology.n_neurons();
        let mut g = ctx.known.clone();
        for (k, &u) in ctx.assimilated.iter().enumerate() {
            let mean = natural_of(h_prime[k], ctx.bounds[k], ctx.lambda);
            *g.get_mut(u) = PriorFamily::Exponential { mean }.sample(n, &mut rng)?;
        }
        let network = NetworkState::initial(n, &ctx.neuron, &mut rng);
        let hemo = HemodynamicState::EQUILIBRIUM;
        Ok(EnsembleMember {
            y_pred: bold_readout(&hemo, &ctx.hemo),
            g,
            network,
            hemo,
            h_prime,
            rng,
        })
    }

    /// Natural hyperparameters.
    pub fn h_natural(&self, ctx: &ModelContext<'_>) -> Vec<f64> {
        self.h_prime
            .iter()
            .zip(&ctx.bounds)
            .map(|(&x, &b)| natural_of(x, b, ctx.lambda))
            .collect()
    }

    /// Move `h'` to `new`, transporting the sampled conductances along.
    pub fn set_h_prime(&mut self, ctx: &ModelContext<'_>, new: &[f64]) -> Result<()> {
        for (k, &u) in ctx.assimilated.iter().enumerate() {
            let b = ctx.bounds[k];
            let old_h = natural_of(self.h_prime[k], b, ctx.lambda);
            let new_h = natural_of(new[k], b, ctx.lambda);
            cdf_transport_in_place(self.g.get_mut(u), old_h, new_h)?;
            self.h_prime[k] = new[k];
        }
        Ok(())
    }

    /// One forecast window. Returns the number of positivity clamps.
    pub fn forecast(&mut self, ctx: &ModelContext<'_>, cfg: &FilterConfig) -> Result<usize> {
        if cfg.sigma_h > 0.0 {
            let walked: Vec<f64> = self
                .h_prime
                .iter()
                .map(|&x| {
                    let e: f64 = self.rng.sample(StandardNormal);
                    x + cfg.sigma_h * e
                })
                .collect();
            self.set_h_prime(ctx, &walked)?;
        }

        let n = ctx.topology.n_neurons() as f64;
        let mut clamps = 0;
        for _ in 0..cfg.window_ms()? {
            lif::step(
                &mut self.network,
                ctx.topology,
                &ctx.neuron,
                &self.g,
                1.0,
                &mut self.rng,
            )?;
            let z = self.network.spikes.len() as f64 / n;
            clamps += bw_step(&mut self.hemo, z, &ctx.hemo, 1e-3)?;
        }

        if cfg.sigma_x > 0.0 {
            let noise = Normal::new(0.0, cfg.sigma_x)
                .map_err(|e| HdaError::config(format!("sigma_x: {e}")))?;
            let mut a = self.hemo.to_array();
            a.iter_mut().for_each(|x| *x += self.rng.sample(noise));
            self.hemo = HemodynamicState::from_array(a);
            clamps += self.hemo.clamp_positive();
        }
        self.y_pred = bold_readout(&self.hemo, &ctx.hemo);
        Ok(clamps)
    }

    /// Filter state `[h', s, f, v, q, y_pred]`.
    pub fn state_vector(&self) -> Vec<f64> {
        let mut x = self.h_prime.clone();
        x.extend(self.hemo.to_array());
        x.push(self.y_pred);
        x
    }

    /// Write back an analysed state; `y_pred` is recomputed from the
    /// clamped hemodynamic state. Returns the number of clamps.
    pub fn apply_state(&mut self, ctx: &ModelContext<'_>, x: &[f64]) -> Result<usize> {
        let m = ctx.n_assimilated();
        self.set_h_prime(ctx, &x[..m])?;
        self.hemo = HemodynamicState::from_array([x[m], x[m + 1], x[m + 2], x[m + 3]]);
        if !self.hemo.is_finite() {
            return Err(HdaError::Numeric(
                "analysis produced a non-finite hemodynamic state".into(),
            ));
        }
        let clamps = self.hemo.clamp_positive();
        self.y_pred = bold_readout(&self.hemo, &ctx.hemo);
        Ok(clamps)
    }

    /// Copy everything except the random stream from `parent`.
    pub fn inherit(&mut self, parent: &EnsembleMember) {
        self.g.clone_from(&parent.g);
        self.network.clone_from(&parent.network);
        self.hemo = parent.hemo;
        self.h_prime.clone_from(&parent.h_prime);
        self.y_pred = parent.y_pred;
    }
}
