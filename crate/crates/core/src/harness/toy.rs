//! The toy Gaussian model `x_i(t) = mu_i + e_{i,t}`, `mu_i ~ N(mu0, 1)`,
//! observed through `y(t) = mean_i x_i(t)`.
//!
//! Marginally `y(t) ~ N(mu0, 2/m)`. Within one trial the `mu_i` are fixed,
//! so the time average `mu0_hat` has variance `1/m + 1/(m T)`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::par::Execution;
use crate::rng::{stream_rng, Stream};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub m: usize,
    pub t_len: usize,
    pub mu0: f64,
    pub n_trials: usize,
    /// `2/m`.
    pub var_target: f64,
    /// Across-trial variance of `y(t)`, averaged over `t`.
    pub var_estimate: f64,
    /// Standard error of `var_estimate` under the model.
    pub var_se: f64,
    /// `(var_estimate - var_target) / var_se`.
    pub var_z: f64,
    /// Per-trial time average of `y`.
    pub mu_hat: Vec<f64>,
    pub abs_err_median: f64,
    /// `sqrt(1/m + 1/(m T))`.
    pub mu_hat_sd_theory: f64,
    /// Two-sided sign-test p-value of `mu_hat - mu0`.
    pub sign_test_p: f64,
}

/// Sd of the across-trial sample variance averaged over `t`. Sample
/// variances at two times have covariance `2 rho^2 sigma^4 / (n-1)` with
/// `rho = 1/2`.
pub fn var_estimate_se(m: usize, t_len: usize, n_trials: usize) -> f64 {
    let sigma2 = 2.0 / m as f64;
    let t = t_len as f64;
    let per_pair = (2.0 + (t - 1.0) * 0.5) / (t * (n_trials as f64 - 1.0));
    sigma2 * per_pair.sqrt()
}

pub fn toy_gaussian_validator(
    m: usize,
    t_len: usize,
    mu0: f64,
    n_trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<ToyReport> {
    if m < 2 || t_len < 2 || n_trials < 2 {
        return Err(HdaError::config(
            "toy model needs m, t_len and n_trials >= 2",
        ));
    }
    let prior = Normal::new(mu0, 1.0).map_err(|e| HdaError::config(e.to_string()))?;
    let trials: Vec<Vec<f64>> = exec.map_range(n_trials, |k| {
        let mut rng = stream_rng(seed, Stream::Toy, k as u64);
        let mu: Vec<f64> = (0..m).map(|_| prior.sample(&mut rng)).collect();
        let mu_bar = stats::mean(&mu);
        (0..t_len)
            .map(|_| {
                let noise: f64 = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
                mu_bar + noise / m as f64
            })
            .collect()
    });

    let var_estimate = (0..t_len)
        .map(|t| stats::variance(&trials.iter().map(|y| y[t]).collect::<Vec<_>>()))
        .sum::<f64>()
        / t_len as f64;
    let var_target = 2.0 / m as f64;
    let var_se = var_estimate_se(m, t_len, n_trials);
    let mu_hat: Vec<f64> = trials.iter().map(|y| stats::mean(y)).collect();
    let abs_err: Vec<f64> = mu_hat.iter().map(|x| (x - mu0).abs()).collect();
    let pos = mu_hat.iter().filter(|&&x| x > mu0).count() as u64;
    let neg = mu_hat.iter().filter(|&&x| x < mu0).count() as u64;
    Ok(ToyReport {
        m,
        t_len,
        mu0,
        n_trials,
        var_target,
        var_estimate,
        var_se,
        var_z: (var_estimate - var_target) / var_se,
        abs_err_median: stats::median(&abs_err),
        mu_hat_sd_theory: (1.0 / m as f64 + 1.0 / (m * t_len) as f64).sqrt(),
        sign_test_p: stats::sign_test_p(pos, neg),
        mu_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_inputs() {
        assert!(toy_gaussian_validator(1, 10, 0.0, 10, 1, Execution::Sequential).is_err());
        assert!(toy_gaussian_validator(2, 1, 0.0, 10, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn deterministic_and_policy_independent() {
        let a = toy_gaussian_validator(5, 20, 1.0, 30, 4, Execution::Sequential).unwrap();
        let b = toy_gaussian_validator(5, 20, 1.0, 30, 4, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn se_formula_reduces_to_single_time_case() {
        // One time point: sd of a normal sample variance, sigma^2 sqrt(2/(n-1)).
        let se = var_estimate_se(4, 1, 51);
        assert!((se - 0.5 * (2.0f64 / 50.0).sqrt()).abs() < 1e-15);
    }
}
