//! One-axis configuration sweeps with repeated twin experiments.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::rng::{derive_seed, Stream};
use crate::stats;
use crate::topology::TopologyKind;

use super::config::{ExperimentConfig, SweepAxis, SweepSpec};
use super::run_twin;
use super::score::ErrorReport;

/// Summary of all repeats at one axis value. Statistics are over the
/// repeats that completed; `eps_h` is averaged over assimilated types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub eps_h_mean: f64,
    pub eps_h_std: f64,
    pub eps_bold_mean: f64,
    pub eps_bold_std: f64,
    pub eps_h_final_mean: f64,
    pub eps_h_final_std: f64,
    pub eps_bold_final_mean: f64,
    pub eps_bold_final_std: f64,
}

/// Outcome of a single repeat.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: std::result::Result<ErrorReport, String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

const COLUMNS: &str = "axis,value,n_ok,n_failed,eps_h_mean,eps_h_std,eps_bold_mean,eps_bold_std,\
eps_h_final_mean,eps_h_final_std,eps_bold_final_mean,eps_bold_final_std";

/// Apply one axis value to a copy of `base`.
pub fn apply_axis(
    base: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::SigmaH => cfg.filter.sigma_h = value,
        SweepAxis::ObsNoise => cfg.filter.gamma_obs = value * value,
        SweepAxis::NMembers => {
            if value.fract() != 0.0 || value < 2.0 {
                return Err(HdaError::config(format!(
                    "n_members value {value} is not an integer >= 2"
                )));
            }
            cfg.filter.n_members = value as usize;
        }
        SweepAxis::PRewire => cfg.topology.kind = TopologyKind::SmallWorld { p_rewire: value },
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run `spec.repeats` twin experiments per value. Repeat `r` uses the same
/// derived seed at every value. A failing cell is recorded, not fatal.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepReport> {
    if spec.values.is_empty() || spec.repeats == 0 {
        return Err(HdaError::config("sweep needs values and repeats > 0"));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| apply_axis(base, spec.axis, v))
        .collect::<Result<Vec<_>>>()?;
    let n_cells = configs.len() * spec.repeats;
    let cells = base.filter.execution.map_range(n_cells, |c| {
        let (vi, r) = (c / spec.repeats, c % spec.repeats);
        let mut cfg = configs[vi].clone();
        cfg.seed = derive_seed(base.seed, Stream::Sweep, r as u64);
        let outcome = run_twin(&cfg)
            .map(|run| run.report)
            .map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!(
                "sweep {}={} repeat {r}: {e}",
                spec.axis.name(),
                spec.values[vi]
            );
        }
        SweepCell {
            value: spec.values[vi],
            repeat: r,
            seed: cfg.seed,
            outcome,
        }
    });
    let rows = spec
        .values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let group = &cells[vi * spec.repeats..(vi + 1) * spec.repeats];
            summarize(value, group)
        })
        .collect();
    Ok(SweepReport {
        axis: spec.axis,
        rows,
        cells,
    })
}

fn summarize(value: f64, group: &[SweepCell]) -> SweepRow {
    let ok: Vec<&ErrorReport> = group
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok())
        .collect();
    let col = |f: &dyn Fn(&ErrorReport) -> f64| -> (f64, f64) {
        let v: Vec<f64> = ok.iter().map(|r| f(r)).collect();
        (stats::mean(&v), stats::std_dev(&v))
    };
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (eps_h_mean, eps_h_std) = col(&|r| r.eps_h_mean());
    let (eps_bold_mean, eps_bold_std) = col(&|r| r.eps_bold);
    let (eps_h_final_mean, eps_h_final_std) = col(&|r| mean_of(&r.last.eps_h));
    let (eps_bold_final_mean, eps_bold_final_std) = col(&|r| r.last.eps_bold);
    SweepRow {
        value,
        n_ok: ok.len(),
        n_failed: group.len() - ok.len(),
        eps_h_mean,
        eps_h_std,
        eps_bold_mean,
        eps_bold_std,
        eps_h_final_mean,
        eps_h_final_std,
        eps_bold_final_mean,
        eps_bold_final_std,
    }
}

impl SweepReport {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{COLUMNS}")?;
        for r in &self.rows {
            let nums = [
                r.eps_h_mean,
                r.eps_h_std,
                r.eps_bold_mean,
                r.eps_bold_std,
                r.eps_h_final_mean,
                r.eps_h_final_std,
                r.eps_bold_final_mean,
                r.eps_bold_final_std,
            ]
            .map(|x| format!("{x:e}"));
            writeln!(
                out,
                "{},{},{},{},{}",
                self.axis.name(),
                r.value,
                r.n_ok,
                r.n_failed,
                nums.join(",")
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Parse the delimited form; per-repeat cells are not stored there.
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| HdaError::parse("empty sweep file"))??;
        if header.trim() != COLUMNS {
            return Err(HdaError::parse("unexpected sweep header"));
        }
        let mut axis = None;
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || HdaError::parse(format!("bad sweep record on line {}", k + 2));
            if f.len() != 12 {
                return Err(bad());
            }
            let a: SweepAxis = f[0].parse()?;
            if axis.is_some_and(|x| x != a) {
                return Err(HdaError::parse("mixed axes in one sweep file"));
            }
            axis = Some(a);
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            rows.push(SweepRow {
                value: num(f[1])?,
                n_ok: f[2].parse().map_err(|_| bad())?,
                n_failed: f[3].parse().map_err(|_| bad())?,
                eps_h_mean: num(f[4])?,
                eps_h_std: num(f[5])?,
                eps_bold_mean: num(f[6])?,
                eps_bold_std: num(f[7])?,
                eps_h_final_mean: num(f[8])?,
                eps_h_final_std: num(f[9])?,
                eps_bold_final_mean: num(f[10])?,
                eps_bold_final_std: num(f[11])?,
            });
        }
        Ok(SweepReport {
            axis: axis.ok_or_else(|| HdaError::parse("sweep file has no rows"))?,
            rows,
            cells: Vec::new(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }

    /// Human-readable `mean ± std` table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>10} | {:>24} | {:>24} | fails\n",
            self.axis.name(),
            "eps_h",
            "eps_bold"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10} | {:>11.3e} ± {:<10.3e} | {:>11.3e} ± {:<10.3e} | {}",
                r.value, r.eps_h_mean, r.eps_h_std, r.eps_bold_mean, r.eps_bold_std, r.n_failed
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64) -> SweepRow {
        SweepRow {
            value,
            n_ok: 3,
            n_failed: 1,
            eps_h_mean: 0.012345678901234567,
            eps_h_std: f64::NAN,
            eps_bold_mean: 3e-3,
            eps_bold_std: 1e-4,
            eps_h_final_mean: 1.0 / 3.0,
            eps_h_final_std: 0.0,
            eps_bold_final_mean: 2.5e-2,
            eps_bold_final_std: 7e-5,
        }
    }

    #[test]
    fn file_round_trip() {
        let rep = SweepReport {
            axis: SweepAxis::NMembers,
            rows: vec![row(5.0), row(20.0)],
            cells: Vec::new(),
        };
        let mut buf = Vec::new();
        rep.write_to(&mut buf).unwrap();
        let back = SweepReport::read_from(&buf[..]).unwrap();
        assert_eq!(back.axis, SweepAxis::NMembers);
        assert_eq!(back.rows.len(), 2);
        assert!(back.rows[0].eps_h_std.is_nan());
        let mut a = back.rows[1].clone();
        let mut b = rep.rows[1].clone();
        a.eps_h_std = 0.0;
        b.eps_h_std = 0.0;
        assert_eq!(a, b);
        assert!(rep.table().contains("±"));
    }

    #[test]
    fn axis_application() {
        let base = ExperimentConfig::default();
        assert_eq!(
            apply_axis(&base, SweepAxis::ObsNoise, 1e-2)
                .unwrap()
                .filter
                .gamma_obs,
            1e-4
        );
        assert_eq!(
            apply_axis(&base, SweepAxis::NMembers, 50.0)
                .unwrap()
                .filter
                .n_members,
            50
        );
        assert!(apply_axis(&base, SweepAxis::NMembers, 2.5).is_err());
        assert_eq!(
            apply_axis(&base, SweepAxis::PRewire, 0.3)
                .unwrap()
                .topology
                .kind,
            TopologyKind::SmallWorld { p_rewire: 0.3 }
        );
    }
}
