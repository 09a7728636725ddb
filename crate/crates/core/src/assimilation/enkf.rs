//! Stochastic (perturbed-observation) ensemble Kalman update for a scalar
//! observation `y = H x + noise`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HdaError, Result};

/// Quantities computed during one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct EnkfUpdate {
    /// Kalman gain `K = C H^T / S`, one entry per state coordinate.
    pub gain: Vec<f64>,
    /// `S = H C H^T + gamma`.
    pub innovation_var: f64,
    /// Forecast ensemble mean.
    pub prior_mean: Vec<f64>,
    /// Perturbed observation used for each member.
    pub perturbed_obs: Vec<f64>,
}

/// Update every row of `ensemble` in place. Rows are members; `obs_row` is
/// the observation operator `H`. Covariances use `1/(N-1)`. Perturbations
/// are drawn from `rng` in member order.
pub fn enkf_update<R: Rng + ?Sized>(
    ensemble: &mut [Vec<f64>],
    obs_row: &[f64],
    y_obs: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<EnkfUpdate> {
    let n = ensemble.len();
    if n < 2 {
        return Err(HdaError::config("EnKF needs at least two members"));
    }
    if !(gamma >= 0.0) {
        return Err(HdaError::config("observation-noise variance must be >= 0"));
    }
    let d = obs_row.len();
    if ensemble.iter().any(|x| x.len() != d) {
        return Err(HdaError::config(
            "state and observation-row dimensions differ",
        ));
    }

    let mut mean = vec![0.0; d];
    for x in ensemble.iter() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let h_mean = dot(obs_row, &mean);
    let h_anom: Vec<f64> = ensemble.iter().map(|x| dot(obs_row, x) - h_mean).collect();
    let mut c_ht = vec![0.0; d];
    for (x, &ha) in ensemble.iter().zip(&h_anom) {
        for ((c, v), m) in c_ht.iter_mut().zip(x).zip(&mean) {
            *c += (v - m) * ha;
        }
    }
    let norm = 1.0 / (n - 1) as f64;
    c_ht.iter_mut().for_each(|c| *c *= norm);
    let s = dot(obs_row, &c_ht) + gamma;
    if !(s > 0.0 && s.is_finite()) {
        return Err(HdaError::Numeric(format!(
            "innovation variance {s:e} is not positive; use an observation-noise variance > 0"
        )));
    }
    let gain: Vec<f64> = c_ht.iter().map(|c| c / s).collect();

    let sd = gamma.sqrt();
    let perturbed_obs: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            y_obs + sd * e
        })
        .collect();
    for (x, &yn) in ensemble.iter_mut().zip(&perturbed_obs) {
        let innov = yn - dot(obs_row, x);
        for (v, k) in x.iter_mut().zip(&gain) {
            *v += k * innov;
        }
    }
    Ok(EnkfUpdate {
        gain,
        innovation_var: s,
        prior_mean: mean,
        perturbed_obs,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
