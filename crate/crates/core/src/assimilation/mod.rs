//! Hierarchical data assimilation engines.
//!
//! Each analysis period every member is forecast independently (random walk
//! on `h'`, conductance transport, 800 one-millisecond network and
//! hemodynamic steps), then the ensemble is conditioned on one BOLD sample
//! with either a stochastic EnKF or a bootstrap particle filter.
//!
//! The EnKF state is `[h', s, f, v, q, y_pred]`, observed through the
//! selector of `y_pred`. Membrane potentials and gating variables stay out of
//! the Kalman update. After the update `y_pred` is recomputed from the
//! analysed hemodynamic state.

mod enkf;
mod ensemble;
mod kalman;
mod particle;
mod trace;

pub use enkf::{enkf_update, EnkfUpdate};
pub use ensemble::{EnsembleMember, ModelContext};
pub use kalman::{kalman_oracle, KalmanStep, LinearGaussian};
pub use particle::{effective_sample_size, likelihood_weights, resample, Resampling};
pub use trace::{AssimilationTrace, TraceRow};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::hemodynamics::{BoldSeries, BOLD_PERIOD_S};
use crate::par::Execution;
use crate::rng::{stream_rng, Stream};
use crate::stats;

pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[default]
    Enkf,
    Pf,
}

/// Noise presets. `Table` is `sigma_h = 0.5`, observation sd `1e-3`;
/// `Prose` is `sigma_h = 1`, observation sd `1e-6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePreset {
    Table,
    Prose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    pub n_members: usize,
    /// Random-walk sd of `h'` per analysis period.
    pub sigma_h: f64,
    /// Process-noise sd added to `(s, f, v, q)` after each forecast.
    pub sigma_x: f64,
    /// Observation-noise variance used by the analysis.
    pub gamma_obs: f64,
    pub analysis_period_s: f64,
    /// Sd of the initial `h'` draw around 0 (the bound midpoint).
    pub init_sd: f64,
    pub resampling: Resampling,
    pub execution: Execution,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig::preset(NoisePreset::Table)
    }
}

impl FilterConfig {
    pub fn preset(p: NoisePreset) -> Self {
        let (sigma_h, obs_sd) = match p {
            NoisePreset::Table => (0.5, 1e-3),
            NoisePreset::Prose => (1.0, 1e-6),
        };
        FilterConfig {
            kind: FilterKind::Enkf,
            n_members: 20,
            sigma_h,
            sigma_x: 0.0,
            gamma_obs: obs_sd * obs_sd,
            analysis_period_s: BOLD_PERIOD_S,
            init_sd: 10.0,
            resampling: Resampling::Multinomial,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_members < 2 {
            return Err(HdaError::config("n_members must be at least 2"));
        }
        let scales = [self.sigma_h, self.sigma_x, self.gamma_obs, self.init_sd];
        if scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(HdaError::config("noise scales must be finite and >= 0"));
        }
        if self.kind == FilterKind::Pf && self.gamma_obs <= 0.0 {
            return Err(HdaError::config("particle filter needs gamma_obs > 0"));
        }
        self.window_ms().map(|_| ())
    }

    /// Analysis period in whole milliseconds.
    pub fn window_ms(&self) -> Result<u64> {
        let ms = self.analysis_period_s * 1000.0;
        if !(ms >= 1.0) || (ms - ms.round()).abs() > 1e-9 {
            return Err(HdaError::config(format!(
                "analysis period {} s is not a positive whole number of ms",
                self.analysis_period_s
            )));
        }
        Ok(ms.round() as u64)
    }
}

/// Per-step bookkeeping returned by [`Assimilator::forecast`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub y_pred_mean: f64,
    pub clamps: usize,
}

/// Per-step bookkeeping returned by [`Assimilator::analyse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    /// Effective sample size for the particle filter, `NaN` for the EnKF.
    pub ess: f64,
    pub clamps: usize,
}

/// Ensemble plus filter state, advanced one observation at a time.
pub struct Assimilator<'a> {
    ctx: ModelContext<'a>,
    cfg: FilterConfig,
    members: Vec<EnsembleMember>,
    seed: u64,
    step: usize,
}

impl<'a> Assimilator<'a> {
    /// Draw `n_members` members: `h' ~ N(0, init_sd^2)` per type, then
    /// conductances from the prior at that `h'`.
    pub fn new(ctx: ModelContext<'a>, cfg: FilterConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        ctx.validate()?;
        let init = Normal::new(0.0, cfg.init_sd).map_err(|e| HdaError::config(e.to_string()))?;
        let members = (0..cfg.n_members)
            .map(|k| {
                let mut rng = stream_rng(seed, Stream::Member, k as u64);
                let h: Vec<f64> = (0..ctx.n_assimilated())
                    .map(|_| init.sample(&mut rng))
                    .collect();
                EnsembleMember::new(&ctx, h, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Assimilator {
            ctx,
            cfg,
            members,
            seed,
            step: 0,
        })
    }

    /// Start from caller-built members; `cfg.n_members` is ignored.
    pub fn from_members(
        ctx: ModelContext<'a>,
        cfg: FilterConfig,
        members: Vec<EnsembleMember>,
        seed: u64,
    ) -> Result<Self> {
        let cfg = FilterConfig {
            n_members: members.len(),
            ..cfg
        };
        cfg.validate()?;
        ctx.validate()?;
        Ok(Assimilator {
            ctx,
            cfg,
            members,
            seed,
            step: 0,
        })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn context(&self) -> &ModelContext<'a> {
        &self.ctx
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    /// Number of completed analyses.
    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Ensemble mean and sd (`1/(N-1)`) of each natural hyperparameter.
    pub fn h_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let nat: Vec<Vec<f64>> = self
            .members
            .iter()
            .map(|m| m.h_natural(&self.ctx))
            .collect();
        (0..self.ctx.n_assimilated())
            .map(|k| {
                let col: Vec<f64> = nat.iter().map(|h| h[k]).collect();
                (stats::mean(&col), stats::std_dev(&col))
            })
            .unzip()
    }

    pub fn y_pred_mean(&self) -> f64 {
        stats::mean(&self.members.iter().map(|m| m.y_pred).collect::<Vec<_>>())
    }

    /// Advance every member by one analysis period.
    pub fn forecast(&mut self) -> Result<Forecast> {
        let (ctx, cfg) = (&self.ctx, &self.cfg);
        let results = cfg
            .execution
            .map_mut(&mut self.members, |_, m| m.forecast(ctx, cfg));
        let mut clamps = 0;
        for (k, r) in results.into_iter().enumerate() {
            clamps += r.map_err(|e| HdaError::Member {
                member: k,
                source: Box::new(e),
            })?;
        }
        Ok(Forecast {
            y_pred_mean: self.y_pred_mean(),
            clamps,
        })
    }

    /// Condition the ensemble on one observation.
    pub fn analyse(&mut self, y_obs: f64) -> Result<Analysis> {
        let mut rng = stream_rng(self.seed, Stream::Analysis, self.step as u64);
        self.step += 1;
        match self.cfg.kind {
            FilterKind::Enkf => {
                let mut xs: Vec<Vec<f64>> = self.members.iter().map(|m| m.state_vector()).collect();
                let mut row = vec![0.0; xs[0].len()];
                *row.last_mut().expect("state is nonempty") = 1.0;
                enkf_update(&mut xs, &row, y_obs, self.cfg.gamma_obs, &mut rng)?;
                let mut clamps = 0;
                for (m, x) in self.members.iter_mut().zip(&xs) {
                    clamps += m.apply_state(&self.ctx, x)?;
                }
                Ok(Analysis {
                    ess: f64::NAN,
                    clamps,
                })
            }
            FilterKind::Pf => {
                let y: Vec<f64> = self.members.iter().map(|m| m.y_pred).collect();
                let w = likelihood_weights(&y, y_obs, self.cfg.gamma_obs)?;
                let ess = effective_sample_size(&w);
                let parents = resample(&w, self.cfg.resampling, &mut rng)?;
                let old = self.members.clone();
                for (m, &p) in self.members.iter_mut().zip(&parents) {
                    m.inherit(&old[p]);
                }
                Ok(Analysis { ess, clamps: 0 })
            }
        }
    }

    /// Forecast then analyse; returns the trace record for this step.
    pub fn assimilate(&mut self, t_s: f64, y_obs: f64) -> Result<TraceRow> {
        let f = self.forecast()?;
        let a = self.analyse(y_obs)?;
        let (h_mean, h_std) = self.h_stats();
        Ok(TraceRow {
            step: self.step,
            t_s,
            h_mean,
            h_std,
            y_obs,
            y_pred_mean: f.y_pred_mean,
            ess: a.ess,
            clamps: f.clamps + a.clamps,
        })
    }
}

/// Run the filter over a whole observation series. Sample `l` must sit at
/// `(l + 1)` analysis periods.
pub fn run_hda(
    ctx: ModelContext<'_>,
    cfg: FilterConfig,
    observations: &BoldSeries,
    seed: u64,
) -> Result<AssimilationTrace> {
    if observations.is_empty() {
        return Err(HdaError::config("no observations to assimilate"));
    }
    for (l, &t) in observations.t_s.iter().enumerate() {
        let expect = (l + 1) as f64 * cfg.analysis_period_s;
        if (t - expect).abs() > 1e-6 {
            return Err(HdaError::config(format!(
                "observation {l} at t = {t} s; expected {expect} s"
            )));
        }
    }
    let types = ctx.assimilated.clone();
    let mut filter = Assimilator::new(ctx, cfg, seed)?;
    let mut rows = Vec::with_capacity(observations.len());
    for (&t, &y) in observations.t_s.iter().zip(&observations.y) {
        rows.push(filter.assimilate(t, y)?);
        log::debug!(
            "step {} t={t:.1}s h={:?}",
            filter.steps_done(),
            rows.last().map(|r| &r.h_mean)
        );
    }
    Ok(AssimilationTrace { types, rows })
}
