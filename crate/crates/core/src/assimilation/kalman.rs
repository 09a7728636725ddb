//! Exact Kalman filter for scalar linear-Gaussian systems, used as a
//! reference for the ensemble filter.

use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};

/// `x_{t+1} = a x_t + xi`, `xi ~ N(0, q)`; `y_t = h x_t + eta`, `eta ~ N(0, r)`;
/// prior `x_0 ~ N(m0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussian {
    pub a: f64,
    pub q: f64,
    pub h: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

impl LinearGaussian {
    pub fn validate(&self) -> Result<()> {
        if [self.q, self.r, self.p0]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(HdaError::config(
                "covariances must be finite and positive semidefinite",
            ));
        }
        if ![self.a, self.h, self.m0].iter().all(|v| v.is_finite()) {
            return Err(HdaError::config("system coefficients must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanStep {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub gain: f64,
    pub mean: f64,
    pub var: f64,
}

/// Posterior moments after each observation. Observation `t` is assimilated
/// after propagating the previous posterior once through the dynamics; the
/// first observation is assimilated against `(m0, p0)` directly when
/// `predict_first` is false.
pub fn kalman_oracle(
    sys: &LinearGaussian,
    observations: &[f64],
    predict_first: bool,
) -> Result<Vec<KalmanStep>> {
    sys.validate()?;
    let (mut m, mut p) = (sys.m0, sys.p0);
    let mut out = Vec::with_capacity(observations.len());
    for (t, &y) in observations.iter().enumerate() {
        if t > 0 || predict_first {
            m *= sys.a;
            p = sys.a * sys.a * p + sys.q;
        }
        let (prior_mean, prior_var) = (m, p);
        let s = sys.h * sys.h * p + sys.r;
        if !(s > 0.0) {
            return Err(HdaError::Numeric("zero innovation variance".into()));
        }
        let k = p * sys.h / s;
        m += k * (y - sys.h * m);
        p *= 1.0 - k * sys.h;
        out.push(KalmanStep {
            prior_mean,
            prior_var,
            gain: k,
            mean: m,
            var: p,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_state_conjugate_variance() {
        let sys = LinearGaussian {
            a: 1.0,
            q: 0.0,
            h: 1.0,
            r: 1.0,
            m0: 0.0,
            p0: 1.0,
        };
        let steps = kalman_oracle(&sys, &[0.3; 12], false).unwrap();
        for (k, st) in steps.iter().enumerate() {
            assert!((st.var - 1.0 / (k as f64 + 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn first_gain_is_one_half() {
        let sys = LinearGaussian {
            a: 0.9,
            q: 0.19,
            h: 1.0,
            r: 1.0,
            m0: 0.0,
            p0: 1.0,
        };
        // Predicted variance 0.81 + 0.19 = 1.
        let st = kalman_oracle(&sys, &[2.0], true).unwrap()[0];
        assert!((st.prior_var - 1.0).abs() < 1e-15);
        assert!((st.gain - 0.5).abs() < 1e-15);
        assert!((st.mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_covariance() {
        let sys = LinearGaussian {
            a: 1.0,
            q: -0.1,
            h: 1.0,
            r: 1.0,
            m0: 0.0,
            p0: 1.0,
        };
        assert!(kalman_oracle(&sys, &[0.0], false).is_err());
        let sys = LinearGaussian {
            q: 0.0,
            r: 0.0,
            p0: 0.0,
            ..sys
        };
        assert!(matches!(
            kalman_oracle(&sys, &[0.0], false),
            Err(HdaError::Numeric(_))
        ));
    }
}
