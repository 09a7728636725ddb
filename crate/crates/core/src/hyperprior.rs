//! The hierarchical layer: conductance priors parameterized by
//! hyperparameters, transport of sampled parameters when a hyperparameter
//! moves, and the logistic reparameterization used for the random walk.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::par::Execution;
use crate::rng::{stream_rng, Stream};
use crate::stats;

/// A density known up to a normalizing constant.
pub trait Density: Sync {
    /// Log density; `-inf` outside the support.
    fn ln_density(&self, x: f64) -> f64;

    /// Standard deviation, when available in closed form.
    fn std_dev(&self) -> Option<f64> {
        None
    }
}

/// Parametric families for conductance priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PriorFamily {
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl PriorFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PriorFamily::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            PriorFamily::Gamma { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HdaError::config(format!("invalid prior family {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PriorFamily::Exponential { mean } => mean,
            PriorFamily::Gamma { shape, scale } => shape * scale,
        }
    }

    /// CDF in closed form: always for the exponential, for integer shapes
    /// (Erlang) in the gamma case.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(0.0);
        }
        match *self {
            PriorFamily::Exponential { mean } => Some(-(-x / mean).exp_m1()),
            PriorFamily::Gamma { shape, scale } => {
                if shape.fract() != 0.0 || shape > 170.0 {
                    return None;
                }
                let y = x / scale;
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..shape as u32 {
                    term *= y / k as f64;
                    sum += term;
                }
                Some(1.0 - (-y).exp() * sum)
            }
        }
    }

    /// Draw `n` i.i.d. values.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(HdaError::config("sample count must be positive"));
        }
        let out = match *self {
            PriorFamily::Exponential { mean } => {
                let d = Exp::new(1.0 / mean).map_err(|e| HdaError::config(e.to_string()))?;
                d.sample_iter(rng).take(n).collect()
            }
            PriorFamily::Gamma { shape, scale } => {
                let d = Gamma::new(shape, scale).map_err(|e| HdaError::config(e.to_string()))?;
                d.sample_iter(rng).take(n).collect()
            }
        };
        Ok(out)
    }
}

impl Density for PriorFamily {
    fn ln_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            PriorFamily::Exponential { mean } => -x / mean,
            PriorFamily::Gamma { shape, scale } => (shape - 1.0) * x.ln() - x / scale,
        }
    }

    fn std_dev(&self) -> Option<f64> {
        Some(match *self {
            PriorFamily::Exponential { mean } => mean,
            PriorFamily::Gamma { shape, scale } => shape.sqrt() * scale,
        })
    }
}

/// Draw `n` parameters from `family` with a generator seeded from `seed`.
pub fn sample_parameters(family: PriorFamily, n: usize, seed: u64) -> Result<Vec<f64>> {
    family.sample(n, &mut crate::rng::rng_from_seed(seed))
}

/// `F_{h_new}^{-1} o F_{h_old}` for the exponential scale family, in place:
/// every value is multiplied by `h_new / h_old`.
pub fn cdf_transport_in_place(theta: &mut [f64], h_old: f64, h_new: f64) -> Result<()> {
    if !(h_old > 0.0 && h_new > 0.0) {
        return Err(HdaError::Domain(format!(
            "transport needs positive hyperparameters, got {h_old} -> {h_new}"
        )));
    }
    if h_old == h_new {
        return Ok(());
    }
    let r = h_new / h_old;
    theta.iter_mut().for_each(|t| *t *= r);
    Ok(())
}

pub fn cdf_transport(theta_old: &[f64], h_old: f64, h_new: f64) -> Result<Vec<f64>> {
    let mut theta = theta_old.to_vec();
    cdf_transport_in_place(&mut theta, h_old, h_new)?;
    Ok(theta)
}

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metropolis {
    pub steps: usize,
    pub proposal_sd: f64,
}

/// `0.25 x` the target's standard deviation, or of the current sample when
/// the target has none in closed form.
pub fn default_proposal_sd(target: &dyn Density, theta: &[f64]) -> f64 {
    0.25 * target.std_dev().unwrap_or_else(|| stats::std_dev(theta))
}

/// Move every particle toward `target` with an independent random-walk
/// Metropolis chain of `cfg.steps` steps. Particle `k` uses its own stream
/// derived from `seed`, so the result does not depend on `exec`.
pub fn mcmc_transport<D: Density>(
    theta_old: &[f64],
    target: &D,
    cfg: Metropolis,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if cfg.steps == 0 {
        return Err(HdaError::config("MCMC transport needs at least one step"));
    }
    if !(cfg.proposal_sd > 0.0 && cfg.proposal_sd.is_finite()) {
        return Err(HdaError::config("MCMC proposal sd must be positive"));
    }
    let mut theta = theta_old.to_vec();
    exec.map_mut(&mut theta, |k, x| {
        let mut rng = stream_rng(seed, Stream::Transport, k as u64);
        let mut lp = target.ln_density(*x);
        for _ in 0..cfg.steps {
            let z: f64 = rng.sample(StandardNormal);
            let y = *x + cfg.proposal_sd * z;
            let lq = target.ln_density(y);
            let u: f64 = rng.random();
            // u < q(y)/q(x); q(y) = 0 never accepts.
            if lq > f64::NEG_INFINITY && u.ln() < lq - lp {
                *x = y;
                lp = lq;
            }
        }
    });
    Ok(theta)
}

/// Interval `(min, max)` of a natural hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    /// `(truth / 4, 2 truth)`.
    pub fn around_truth(truth: f64) -> Self {
        Bounds {
            min: truth / 4.0,
            max: 2.0 * truth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min < self.max && self.min.is_finite() && self.max.is_finite() {
            Ok(())
        } else {
            Err(HdaError::config(format!("invalid bounds {self:?}")))
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `h = min + (max - min) * logistic(lambda h')`.
pub fn natural_of(h_prime: f64, b: Bounds, lambda: f64) -> f64 {
    b.min + (b.max - b.min) * logistic(lambda * h_prime)
}

/// Inverse of [`natural_of`]; `h` must lie strictly inside the bounds.
pub fn transformed_of(h: f64, b: Bounds, lambda: f64) -> Result<f64> {
    if !(h > b.min && h < b.max) {
        return Err(HdaError::Domain(format!(
            "hyperparameter {h} outside ({}, {})",
            b.min, b.max
        )));
    }
    Ok(((h - b.min) / (b.max - h)).ln() / lambda)
}

pub fn to_natural(h_prime: &[f64], bounds: &[Bounds], lambda: f64) -> Vec<f64> {
    h_prime
        .iter()
        .zip(bounds)
        .map(|(&x, &b)| natural_of(x, b, lambda))
        .collect()
}

pub fn to_transformed(h: &[f64], bounds: &[Bounds], lambda: f64) -> Result<Vec<f64>> {
    h.iter()
        .zip(bounds)
        .map(|(&x, &b)| transformed_of(x, b, lambda))
        .collect()
}

/// Hyperparameters of the assimilated synapse types, held in transformed
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParameter {
    pub transformed: Vec<f64>,
    pub bounds: Vec<Bounds>,
    pub lambda: f64,
}

impl HyperParameter {
    pub fn from_natural(h: &[f64], bounds: Vec<Bounds>, lambda: f64) -> Result<Self> {
        if h.len() != bounds.len() {
            return Err(HdaError::config("hyperparameter and bounds lengths differ"));
        }
        if !(lambda > 0.0) {
            return Err(HdaError::config("lambda must be positive"));
        }
        Ok(HyperParameter {
            transformed: to_transformed(h, &bounds, lambda)?,
            bounds,
            lambda,
        })
    }

    pub fn natural(&self) -> Vec<f64> {
        to_natural(&self.transformed, &self.bounds, self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn closed_form_cdfs() {
        let e = PriorFamily::Exponential { mean: 2.0 };
        assert!((e.cdf(2.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let g = PriorFamily::Gamma {
            shape: 2.0,
            scale: 1.0,
        };
        assert!((g.cdf(1.0).unwrap() - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(g.cdf(-1.0), Some(0.0));
        let frac = PriorFamily::Gamma {
            shape: 2.5,
            scale: 1.0,
        };
        assert_eq!(frac.cdf(1.0), None);
    }

    #[test]
    fn invalid_families_and_empty_draws() {
        assert!(PriorFamily::Exponential { mean: 0.0 }.validate().is_err());
        assert!(PriorFamily::Gamma {
            shape: -1.0,
            scale: 1.0
        }
        .validate()
        .is_err());
        assert!(sample_parameters(PriorFamily::Exponential { mean: 1.0 }, 0, 1).is_err());
        let a = sample_parameters(PriorFamily::Exponential { mean: 1.0 }, 5, 9).unwrap();
        let b = sample_parameters(PriorFamily::Exponential { mean: 1.0 }, 5, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exponential_sample_mean() {
        let n = 100_000;
        let xs = sample_parameters(PriorFamily::Exponential { mean: 1.0 }, n, 3).unwrap();
        assert!((stats::mean(&xs) - 1.0).abs() < 3.0 / (n as f64).sqrt());
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gamma_sample_moments() {
        let n = 100_000;
        let fam = PriorFamily::Gamma {
            shape: 2.0,
            scale: 1.0,
        };
        let xs = sample_parameters(fam, n, 4).unwrap();
        // sd(mean) = sqrt(2/n); sd(var) = sqrt((mu4 - sigma^4)/n), mu4 = 3k(k+2) = 24.
        let se_mean = (2.0 / n as f64).sqrt();
        let se_var = ((24.0 - 4.0) / n as f64).sqrt();
        assert!((stats::mean(&xs) - 2.0).abs() < 5.0 * se_mean);
        assert!((stats::variance(&xs) - 2.0).abs() < 5.0 * se_var);
    }

    #[test]
    fn cdf_transport_cases() {
        assert_eq!(
            cdf_transport(&[1.0, 0.5], 1.0, 1.0).unwrap(),
            vec![1.0, 0.5]
        );
        assert_eq!(cdf_transport(&[1.0], 1.0, 2.0).unwrap(), vec![2.0]);
        assert!(matches!(
            cdf_transport(&[1.0], 0.0, 2.0),
            Err(HdaError::Domain(_))
        ));
        assert!(cdf_transport(&[1.0], 1.0, -2.0).is_err());
    }

    #[test]
    fn mcmc_rejects_bad_config() {
        let t = PriorFamily::Exponential { mean: 1.0 };
        let bad = Metropolis {
            steps: 0,
            proposal_sd: 0.1,
        };
        assert!(mcmc_transport(&[1.0], &t, bad, 1, Execution::Sequential).is_err());
        let bad = Metropolis {
            steps: 1,
            proposal_sd: 0.0,
        };
        assert!(mcmc_transport(&[1.0], &t, bad, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn mcmc_never_leaves_support() {
        let t = PriorFamily::Exponential { mean: 1.0 };
        let theta = vec![1e-3; 200];
        let cfg = Metropolis {
            steps: 50,
            proposal_sd: 2.0,
        };
        let out = mcmc_transport(&theta, &t, cfg, 5, Execution::Sequential).unwrap();
        assert!(out.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn mcmc_is_policy_independent() {
        let t = PriorFamily::Gamma {
            shape: 2.0,
            scale: 1.0,
        };
        let theta = sample_parameters(PriorFamily::Exponential { mean: 1.0 }, 64, 2).unwrap();
        let cfg = Metropolis {
            steps: 20,
            proposal_sd: default_proposal_sd(&t, &theta),
        };
        let a = mcmc_transport(&theta, &t, cfg, 11, Execution::Sequential).unwrap();
        let b = mcmc_transport(&theta, &t, cfg, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_proposal_falls_back_to_sample_sd() {
        struct Flat;
        impl Density for Flat {
            fn ln_density(&self, _: f64) -> f64 {
                0.0
            }
        }
        let sd = default_proposal_sd(&Flat, &[1.0, 3.0]);
        assert!((sd - 0.25 * 2f64.sqrt()).abs() < 1e-15);
        let g = PriorFamily::Gamma {
            shape: 4.0,
            scale: 1.0,
        };
        assert_eq!(default_proposal_sd(&g, &[]), 0.5);
    }

    #[test]
    fn logistic_transform_cases() {
        let b = Bounds::around_truth(0.004);
        assert_eq!(
            b,
            Bounds {
                min: 0.001,
                max: 0.008
            }
        );
        assert!((natural_of(0.0, b, 0.1) - b.midpoint()).abs() < 1e-18);
        // lambda h' = 10: distance to max is (max - min) / (1 + e^10).
        let h = natural_of(100.0, b, 0.1);
        assert!(b.max - h < 1e-4 * (b.max - b.min));
        assert!(natural_of(50.0, b, 0.1) < h);
        assert!(transformed_of(b.min, b, 0.1).is_err());
        assert!(transformed_of(b.max, b, 0.1).is_err());
        assert!(transformed_of(0.0, b, 0.1).is_err());
    }

    #[test]
    fn logistic_round_trip_random_interior() {
        let mut rng = rng_from_seed(8);
        let b = Bounds {
            min: 0.25,
            max: 2.0,
        };
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let u: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            let h = b.min + (b.max - b.min) * u;
            let back = natural_of(transformed_of(h, b, 0.1).unwrap(), b, 0.1);
            worst = worst.max(((back - h) / h).abs());
        }
        assert!(worst < 1e-12, "worst relative error {worst:e}");
    }

    #[test]
    fn hyperparameter_vector() {
        let bounds = vec![Bounds::around_truth(1.0), Bounds::around_truth(2.0)];
        let hp = HyperParameter::from_natural(&[1.0, 3.0], bounds.clone(), 0.1).unwrap();
        let back = hp.natural();
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[1] - 3.0).abs() < 1e-12);
        assert!(HyperParameter::from_natural(&[1.0], bounds.clone(), 0.1).is_err());
        assert!(HyperParameter::from_natural(&[1.0, 5.0], bounds, 0.1).is_err());
    }

    #[test]
    fn sample_with_rng_matches_seeded_helper() {
        let fam = PriorFamily::Exponential { mean: 0.5 };
        let a = fam.sample(4, &mut rng_from_seed(21)).unwrap();
        assert_eq!(a, sample_parameters(fam, 4, 21).unwrap());
    }
}
