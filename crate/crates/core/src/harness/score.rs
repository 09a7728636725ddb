//! Relative squared-error scores.
//!
//! `eps = (1/T) sum_t |sim(t) - truth(t)|^2 / |truth(t)|^2`. Terms whose
//! truth magnitude is below `1e-3 * max|truth|` are excluded and counted;
//! more than 10% exclusions is a scoring error.

use serde::{Deserialize, Serialize};

use crate::assimilation::AssimilationTrace;
use crate::error::{HdaError, Result};
use crate::synapse::SynapseType;

pub const EXCLUSION_FRACTION: f64 = 1e-3;
pub const MAX_EXCLUDED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesScore {
    pub eps: f64,
    /// Per-step relative squared error; `None` where excluded.
    pub terms: Vec<Option<f64>>,
    pub excluded: usize,
}

impl SeriesScore {
    /// Mean of the included terms in `range`; `NaN` if none.
    pub fn window_mean(&self, range: std::ops::Range<usize>) -> f64 {
        let vals: Vec<f64> = self.terms[range].iter().flatten().copied().collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}

pub fn score(simulated: &[f64], truth: &[f64]) -> Result<SeriesScore> {
    if simulated.len() != truth.len() {
        return Err(HdaError::Scoring(format!(
            "length mismatch: {} simulated vs {} truth",
            simulated.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(HdaError::Scoring("empty series".into()));
    }
    if simulated.iter().chain(truth).any(|x| !x.is_finite()) {
        return Err(HdaError::Scoring("non-finite value in series".into()));
    }
    let floor = EXCLUSION_FRACTION * truth.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let terms: Vec<Option<f64>> = simulated
        .iter()
        .zip(truth)
        .map(|(s, t)| {
            if t.abs() < floor || *t == 0.0 {
                None
            } else {
                let r = (s - t) / t;
                Some(r * r)
            }
        })
        .collect();
    let excluded = terms.iter().filter(|t| t.is_none()).count();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * truth.len() as f64 {
        return Err(HdaError::Scoring(format!(
            "{excluded} of {} terms have near-zero truth",
            truth.len()
        )));
    }
    let kept: Vec<f64> = terms.iter().flatten().copied().collect();
    Ok(SeriesScore {
        eps: kept.iter().sum::<f64>() / kept.len() as f64,
        terms,
        excluded,
    })
}

/// Scores over a window of analysis steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub first_step: usize,
    pub last_step: usize,
    pub eps_bold: f64,
    pub eps_h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub types: Vec<SynapseType>,
    pub eps_bold: f64,
    pub eps_h: Vec<f64>,
    pub bold: SeriesScore,
    pub h: Vec<SeriesScore>,
    pub initial: WindowScore,
    #[serde(rename = "final")]
    pub last: WindowScore,
}

impl ErrorReport {
    /// Mean of `eps_h` over types.
    pub fn eps_h_mean(&self) -> f64 {
        self.eps_h.iter().sum::<f64>() / self.eps_h.len() as f64
    }

    /// Both final-window scores are below `threshold` and below their
    /// initial-window values.
    pub fn improved_below(&self, threshold: f64) -> bool {
        let h_ok = self
            .last
            .eps_h
            .iter()
            .zip(&self.initial.eps_h)
            .all(|(f, i)| *f < threshold && f < i);
        h_ok && self.last.eps_bold < threshold && self.last.eps_bold < self.initial.eps_bold
    }
}

/// Score a trace: BOLD against the observations it assimilated, each
/// hyperparameter's posterior mean against its true value. The initial and
/// final windows cover the first and last `window` steps.
pub fn error_report(
    trace: &AssimilationTrace,
    h_star: &[f64],
    window: usize,
) -> Result<ErrorReport> {
    if h_star.len() != trace.types.len() {
        return Err(HdaError::Scoring(
            "one true value per assimilated type is required".into(),
        ));
    }
    let t = trace.len();
    if window == 0 || window > t {
        return Err(HdaError::Scoring(format!(
            "window {window} does not fit {t} steps"
        )));
    }
    let bold = score(&trace.y_pred_series(), &trace.y_obs_series())?;
    let h = h_star
        .iter()
        .enumerate()
        .map(|(k, &hs)| score(&trace.h_mean_series(k), &vec![hs; t]))
        .collect::<Result<Vec<_>>>()?;
    let win = |r: std::ops::Range<usize>| WindowScore {
        first_step: r.start + 1,
        last_step: r.end,
        eps_bold: bold.window_mean(r.clone()),
        eps_h: h.iter().map(|s| s.window_mean(r.clone())).collect(),
    };
    Ok(ErrorReport {
        types: trace.types.clone(),
        eps_bold: bold.eps,
        eps_h: h.iter().map(|s| s.eps).collect(),
        initial: win(0..window),
        last: win(t - window..t),
        bold,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_score_zero() {
        let x = [0.5, -1.0, 2.0];
        let s = score(&x, &x).unwrap();
        assert_eq!(s.eps, 0.0);
        assert_eq!(s.excluded, 0);
    }

    #[test]
    fn ten_percent_offset() {
        let truth = [1.0, -2.0, 3.0, 0.25];
        let sim: Vec<f64> = truth.iter().map(|t| 1.1 * t).collect();
        let s = score(&sim, &truth).unwrap();
        assert!((s.eps - 0.01).abs() < 1e-14);
    }

    #[test]
    fn near_zero_terms_are_excluded_then_fail() {
        let mut truth = vec![1.0; 20];
        truth[3] = 1e-4;
        truth[7] = 0.0;
        let s = score(&truth, &truth).unwrap();
        assert_eq!(s.excluded, 2);
        assert_eq!(s.terms[3], None);
        truth[9] = 1e-5;
        assert!(matches!(score(&truth, &truth), Err(HdaError::Scoring(_))));
    }

    #[test]
    fn mismatched_or_empty_series() {
        assert!(score(&[1.0], &[1.0, 2.0]).is_err());
        assert!(score(&[], &[]).is_err());
        assert!(score(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn window_means() {
        let s = score(&[2.0, 1.0, 1.0, 3.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.window_mean(0..2), 0.5);
        assert_eq!(s.window_mean(2..4), 2.0);
    }
}
