//! Balloon-Windkessel hemodynamics and BOLD observation.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::lif::add_white_noise;

/// Positivity floor for inflow, volume and deoxyhemoglobin.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

/// BOLD sampling period (s); 1.25 Hz.
pub const BOLD_PERIOD_S: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemodynamicParams {
    pub epsilon: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub rho: f64,
    pub v0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for HemodynamicParams {
    fn default() -> Self {
        HemodynamicParams {
            epsilon: 200.0,
            kappa: 1.25,
            gamma: 2.5,
            tau: 1.0,
            alpha: 0.2,
            rho: 0.8,
            v0: 0.02,
            k1: 5.6,
            k2: 2.0,
            k3: 1.4,
        }
    }
}

impl HemodynamicParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(HdaError::config("hemodynamic tau must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(HdaError::config("hemodynamic alpha must lie in (0, 1]"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(HdaError::config("hemodynamic rho must lie in (0, 1)"));
        }
        if self.v0 <= 0.0 {
            return Err(HdaError::config("hemodynamic V0 must be positive"));
        }
        Ok(())
    }
}

/// `(s, f, v, q)`: vasodilatory signal, inflow, volume, deoxyhemoglobin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemodynamicState {
    pub s: f64,
    pub f: f64,
    pub v: f64,
    pub q: f64,
}

impl Default for HemodynamicState {
    fn default() -> Self {
        Self::EQUILIBRIUM
    }
}

impl HemodynamicState {
    pub const EQUILIBRIUM: HemodynamicState = HemodynamicState {
        s: 0.0,
        f: 1.0,
        v: 1.0,
        q: 1.0,
    };

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.f, self.v, self.q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        HemodynamicState {
            s: a[0],
            f: a[1],
            v: a[2],
            q: a[3],
        }
    }

    /// Clamp `f`, `v`, `q` to [`POSITIVITY_FLOOR`]; returns how many were clamped.
    pub fn clamp_positive(&mut self) -> usize {
        let mut clamps = 0;
        for x in [&mut self.f, &mut self.v, &mut self.q] {
            if *x < POSITIVITY_FLOOR {
                *x = POSITIVITY_FLOOR;
                clamps += 1;
            }
        }
        if clamps > 0 {
            log::debug!("hemodynamic positivity clamp ({clamps} components)");
        }
        clamps
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// One explicit Euler step of `dt_s` seconds driven by activity `z`.
/// Returns the number of positivity clamps applied.
pub fn bw_step(
    state: &mut HemodynamicState,
    z: f64,
    params: &HemodynamicParams,
    dt_s: f64,
) -> Result<usize> {
    let HemodynamicState { s, f, v, q } = *state;
    let inv_alpha = 1.0 / params.alpha;
    let v_out = v.powf(inv_alpha);
    let extraction = 1.0 - (1.0 - params.rho).powf(1.0 / f);

    let ds = params.epsilon * z - params.kappa * s - params.gamma * (f - 1.0);
    let df = s;
    let dv = (f - v_out) / params.tau;
    let dq = (f * extraction / params.rho - v_out * q / v) / params.tau;

    *state = HemodynamicState {
        s: s + dt_s * ds,
        f: f + dt_s * df,
        v: v + dt_s * dv,
        q: q + dt_s * dq,
    };
    if !state.is_finite() {
        return Err(HdaError::NumericDivergence {
            what: "hemodynamic state".into(),
            index: 0,
            t_ms: f64::NAN,
        });
    }
    Ok(state.clamp_positive())
}

/// `y = V0 [k1 (1-q) + k2 (1 - q/v) + k3 (1-v)]`.
pub fn bold_readout(state: &HemodynamicState, params: &HemodynamicParams) -> f64 {
    let HemodynamicState { v, q, .. } = *state;
    params.v0 * (params.k1 * (1.0 - q) + params.k2 * (1.0 - q / v) + params.k3 * (1.0 - v))
}

/// Integrate a 1 ms activity series; returns the BOLD value after each step
/// and the total clamp count.
pub fn integrate_dense(
    state: &mut HemodynamicState,
    z: &[f64],
    params: &HemodynamicParams,
) -> Result<(Vec<f64>, usize)> {
    let mut clamps = 0;
    let mut y = Vec::with_capacity(z.len());
    for &zt in z {
        clamps += bw_step(state, zt, params, 1e-3)?;
        y.push(bold_readout(state, params));
    }
    Ok((y, clamps))
}

/// Sampled BOLD observations. `t_s[l]` is the time of sample `l` in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoldSeries {
    pub t_s: Vec<f64>,
    pub y: Vec<f64>,
}

impl BoldSeries {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,y")?;
        for (t, y) in self.t_s.iter().zip(&self.y) {
            writeln!(out, "{t},{y:e}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (t_s, y) = read_two_columns(input)?;
        Ok(BoldSeries { t_s, y })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

/// Read a two-column delimited file with a header line.
pub fn read_two_columns<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (k, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut col = || -> Result<f64> {
            parts
                .next()
                .and_then(|p| p.trim().parse().ok())
                .ok_or_else(|| HdaError::parse(format!("bad record on line {}: '{line}'", k + 1)))
        };
        a.push(col()?);
        b.push(col()?);
    }
    Ok((a, b))
}

/// Sample a dense 1 ms series every `period_s` and add Gaussian noise of
/// variance `noise_var`. `y_dense[k]` is the value at `(k+1)` ms.
pub fn downsample_observe<R: Rng + ?Sized>(
    y_dense: &[f64],
    period_s: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<BoldSeries> {
    let period_ms = period_s * 1000.0;
    if period_ms < 1.0 || (period_ms - period_ms.round()).abs() > 1e-9 {
        return Err(HdaError::config(format!(
            "sampling period {period_s} s is not a multiple of the 1 ms step"
        )));
    }
    if noise_var < 0.0 {
        return Err(HdaError::config("observation noise variance must be >= 0"));
    }
    let stride = period_ms.round() as usize;
    if !y_dense.len().is_multiple_of(stride) {
        return Err(HdaError::config(format!(
            "duration {} ms is not a multiple of the {stride} ms sampling period",
            y_dense.len()
        )));
    }
    let n = y_dense.len() / stride;
    let t_s = (1..=n).map(|l| l as f64 * period_s).collect();
    let mut y: Vec<f64> = (1..=n).map(|l| y_dense[l * stride - 1]).collect();
    add_white_noise(&mut y, noise_var, rng);
    Ok(BoldSeries { t_s, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_is_fixed() {
        let p = HemodynamicParams::default();
        let mut s = HemodynamicState::EQUILIBRIUM;
        bw_step(&mut s, 0.0, &p, 1e-3).unwrap();
        assert_eq!(s, HemodynamicState::EQUILIBRIUM);
        assert_eq!(bold_readout(&s, &p), 0.0);
    }

    #[test]
    fn drive_enters_vasodilatory_signal() {
        let p = HemodynamicParams::default();
        let mut s = HemodynamicState::EQUILIBRIUM;
        bw_step(&mut s, 0.01, &p, 1e-3).unwrap();
        assert_relative_eq!(s.s, 0.002, epsilon = 1e-15);
        assert_eq!((s.f, s.v, s.q), (1.0, 1.0, 1.0));
    }

    #[test]
    fn readout_by_hand() {
        let p = HemodynamicParams::default();
        let mut st = HemodynamicState::EQUILIBRIUM;
        st.q = 0.9;
        assert_relative_eq!(bold_readout(&st, &p), 0.0152, epsilon = 1e-15);
        st.q = 1.0;
        st.v = 1.1;
        let expect = 0.02 * (2.0 * (1.0 - 1.0 / 1.1) - 1.4 * 0.1);
        assert_relative_eq!(bold_readout(&st, &p), expect, epsilon = 1e-15);
        assert_relative_eq!(bold_readout(&st, &p), 8.3636e-4, epsilon = 1e-8);
    }

    #[test]
    fn clamp_floor_applies() {
        let p = HemodynamicParams::default();
        let mut s = HemodynamicState {
            s: -50.0,
            f: 1e-5,
            v: 1.0,
            q: 1.0,
        };
        let clamps = bw_step(&mut s, 0.0, &p, 1e-3).unwrap();
        assert_eq!(clamps, 1);
        assert_eq!(s.f, POSITIVITY_FLOOR);
        let mut t = HemodynamicState {
            s: 0.0,
            f: -1.0,
            v: 0.0,
            q: -3.0,
        };
        assert_eq!(t.clamp_positive(), 3);
        assert!(t.f > 0.0 && t.v > 0.0 && t.q > 0.0);
    }

    #[test]
    fn downsampling_grid() {
        let y: Vec<f64> = (0..40_000).map(|k| k as f64).collect();
        let obs = downsample_observe(&y, 0.8, 0.0, &mut rng_from_seed(0)).unwrap();
        assert_eq!(obs.len(), 50);
        assert_eq!(obs.y[0], 799.0);
        assert_eq!(obs.y[49], 39_999.0);
        assert_relative_eq!(obs.t_s[49], 40.0, epsilon = 1e-12);

        let a = downsample_observe(&y, 0.8, 1e-8, &mut rng_from_seed(3)).unwrap();
        let b = downsample_observe(&y, 0.8, 1e-8, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, obs);

        assert!(downsample_observe(&y, 0.0005, 0.0, &mut rng_from_seed(0)).is_err());
        assert!(downsample_observe(&y[..1000], 0.8, 0.0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn bold_series_round_trip() {
        let s = BoldSeries {
            t_s: vec![0.8, 1.6],
            y: vec![0.012_345_678_901_234_5, -3.5e-7],
        };
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(BoldSeries::read_from(buf.as_slice()).unwrap(), s);
    }
}
