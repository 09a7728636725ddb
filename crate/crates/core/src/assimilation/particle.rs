//! Bootstrap particle filter primitives: Gaussian likelihood weights,
//! effective sample size and resampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

/// Normalized weights `w_n ~ exp(-(y_obs - y_n)^2 / (2 gamma))`.
///
/// Fails with [`HdaError::Degeneracy`] when even the best member's
/// unnormalized weight underflows to zero.
pub fn likelihood_weights(y_pred: &[f64], y_obs: f64, gamma: f64) -> Result<Vec<f64>> {
    if y_pred.is_empty() {
        return Err(HdaError::config("no particles to weight"));
    }
    if !(gamma > 0.0) {
        return Err(HdaError::config(
            "particle filter needs observation-noise variance > 0",
        ));
    }
    let sq: Vec<f64> = y_pred.iter().map(|y| (y_obs - y) * (y_obs - y)).collect();
    if sq.iter().any(|r| !r.is_finite()) {
        return Err(HdaError::Numeric("non-finite predicted observation".into()));
    }
    let best = sq.iter().copied().fold(f64::INFINITY, f64::min);
    if (-best / (2.0 * gamma)).exp() == 0.0 {
        return Err(HdaError::Degeneracy {
            min_residual: best.sqrt(),
        });
    }
    let mut w: Vec<f64> = sq
        .iter()
        .map(|r| (-(r - best) / (2.0 * gamma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// `1 / sum w^2`, in `[1, N]` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Draw `weights.len()` ancestor indices with replacement.
pub fn resample<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: Resampling,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = weights.len();
    match scheme {
        Resampling::Multinomial => {
            let dist = WeightedIndex::new(weights)
                .map_err(|e| HdaError::Numeric(format!("resampling weights: {e}")))?;
            Ok((0..n).map(|_| dist.sample(rng)).collect())
        }
        Resampling::Systematic => {
            let u0: f64 = rng.random::<f64>() / n as f64;
            let mut out = Vec::with_capacity(n);
            let mut cum = weights[0];
            let mut j = 0;
            for k in 0..n {
                let u = u0 + k as f64 / n as f64;
                while u > cum && j + 1 < n {
                    j += 1;
                    cum += weights[j];
                }
                out.push(j);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn equal_predictions_give_uniform_weights() {
        let w = likelihood_weights(&[0.3; 8], 0.1, 1.0).unwrap();
        assert!(w.iter().all(|&x| (x - 0.125).abs() < 1e-15));
        assert!((effective_sample_size(&w) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_takes_all_weight() {
        let sigma = 1e-3;
        let mut y = vec![0.5 + 1e6 * sigma; 6];
        y[2] = 0.5;
        let w = likelihood_weights(&y, 0.5, sigma * sigma).unwrap();
        assert_eq!(w[2], 1.0);
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let idx = resample(&w, scheme, &mut rng_from_seed(1)).unwrap();
            assert!(idx.iter().all(|&i| i == 2));
        }
    }

    #[test]
    fn degeneracy_reports_min_residual() {
        let err = likelihood_weights(&[1.0, 2.0], 0.0, 1e-6).unwrap_err();
        match err {
            HdaError::Degeneracy { min_residual } => assert_eq!(min_residual, 1.0),
            e => panic!("unexpected {e}"),
        }
        assert!(likelihood_weights(&[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn systematic_counts_are_within_one_of_expectation() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let idx = resample(&w, Resampling::Systematic, &mut rng_from_seed(5)).unwrap();
        for (j, &wj) in w.iter().enumerate() {
            let c = idx.iter().filter(|&&i| i == j).count() as f64;
            assert!((c - 4.0 * wj).abs() < 1.0 + 1e-12);
        }
    }
}
