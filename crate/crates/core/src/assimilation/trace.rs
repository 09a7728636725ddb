//! Per-step filter records and their delimited text form.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::synapse::SynapseType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t_s: f64,
    /// Posterior ensemble mean of each natural hyperparameter.
    pub h_mean: Vec<f64>,
    pub h_std: Vec<f64>,
    pub y_obs: f64,
    /// Forecast ensemble mean of the predicted BOLD value.
    pub y_pred_mean: f64,
    pub ess: f64,
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssimilationTrace {
    pub types: Vec<SynapseType>,
    pub rows: Vec<TraceRow>,
}

impl AssimilationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Posterior mean series of type index `k`.
    pub fn h_mean_series(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.h_mean[k]).collect()
    }

    pub fn y_pred_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_pred_mean).collect()
    }

    pub fn y_obs_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_obs).collect()
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["step".to_string(), "t_s".to_string()];
        cols.extend(self.types.iter().map(|u| format!("h_mean[{u}]")));
        cols.extend(self.types.iter().map(|u| format!("h_std[{u}]")));
        cols.extend(["y_obs", "y_pred_mean", "ess", "clamps"].map(String::from));
        cols.join(",")
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        for r in &self.rows {
            let mut f = vec![r.step.to_string(), format!("{}", r.t_s)];
            f.extend(r.h_mean.iter().map(|x| format!("{x:e}")));
            f.extend(r.h_std.iter().map(|x| format!("{x:e}")));
            f.push(format!("{:e}", r.y_obs));
            f.push(format!("{:e}", r.y_pred_mean));
            f.push(format!("{}", r.ess));
            f.push(r.clamps.to_string());
            writeln!(out, "{}", f.join(","))?;
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
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| HdaError::parse("empty trace file"))??;
        let types = header
            .split(',')
            .filter_map(|c| c.strip_prefix("h_mean[").and_then(|c| c.strip_suffix(']')))
            .map(str::parse)
            .collect::<Result<Vec<SynapseType>>>()?;
        let m = types.len();
        let width = 2 + 2 * m + 4;
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || HdaError::parse(format!("bad trace record on line {}: '{line}'", k + 2));
            if f.len() != width {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            rows.push(TraceRow {
                step: f[0].parse().map_err(|_| bad())?,
                t_s: num(f[1])?,
                h_mean: f[2..2 + m].iter().map(|s| num(s)).collect::<Result<_>>()?,
                h_std: f[2 + m..2 + 2 * m]
                    .iter()
                    .map(|s| num(s))
                    .collect::<Result<_>>()?,
                y_obs: num(f[2 + 2 * m])?,
                y_pred_mean: num(f[3 + 2 * m])?,
                ess: num(f[4 + 2 * m])?,
                clamps: f[5 + 2 * m].parse().map_err(|_| bad())?,
            });
        }
        Ok(AssimilationTrace { types, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let trace = AssimilationTrace {
            types: vec![SynapseType::Ampa, SynapseType::GabaA],
            rows: vec![
                TraceRow {
                    step: 1,
                    t_s: 0.8,
                    h_mean: vec![0.0071, 0.02],
                    h_std: vec![1e-4, 3e-3],
                    y_obs: 0.013,
                    y_pred_mean: -2.5e-4,
                    ess: f64::NAN,
                    clamps: 0,
                },
                TraceRow {
                    step: 2,
                    t_s: 1.6,
                    h_mean: vec![1.0 / 3.0, 0.1],
                    h_std: vec![0.0, 0.0],
                    y_obs: 0.04,
                    y_pred_mean: 0.041,
                    ess: 12.5,
                    clamps: 3,
                },
            ],
        };
        let mut buf = Vec::new();
        trace.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "step,t_s,h_mean[AMPA],h_mean[GABA_A],h_std[AMPA],h_std[GABA_A],y_obs,y_pred_mean,ess,clamps\n"
        ));
        let back = AssimilationTrace::read_from(&buf[..]).unwrap();
        assert_eq!(back.types, trace.types);
        assert_eq!(back.rows[1], trace.rows[1]);
        assert!(back.rows[0].ess.is_nan());
        assert_eq!(back.rows[0].h_mean, trace.rows[0].h_mean);
    }

    #[test]
    fn rejects_short_record() {
        let text = "step,t_s,h_mean[AMPA],h_std[AMPA],y_obs,y_pred_mean,ess,clamps\n1,0.8,1\n";
        assert!(AssimilationTrace::read_from(text.as_bytes()).is_err());
    }
}
