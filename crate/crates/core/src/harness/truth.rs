//! Ground-truth generation for twin experiments, and archiving of the
//! hidden quantities needed for scoring.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::hemodynamics::{downsample_observe, integrate_dense, BoldSeries, HemodynamicState};
use crate::hyperprior::PriorFamily;
use crate::lif::{self, add_white_noise, Spike, SynapticConductances};
use crate::rng::{stream_rng, Stream};
use crate::synapse::{PerType, SynapseType};
use crate::topology::NetworkTopology;

use super::config::ExperimentConfig;

/// Output of one forward run with the true hyperparameters.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub h_star: PerType<f64>,
    pub theta: SynapticConductances,
    pub raster: Vec<Spike>,
    /// Population activity including the configured noise.
    pub z: Vec<f64>,
    /// BOLD after every 1 ms step, `bold_dense[k]` at `(k + 1)` ms.
    pub bold_dense: Vec<f64>,
    pub observations: BoldSeries,
    pub clamps: usize,
}

/// Hyperparameters and bookkeeping written next to the archived arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub h_star: PerType<f64>,
    pub n_neurons: usize,
    pub duration_ms: u64,
    pub n_spikes: usize,
    pub mean_rate_hz: f64,
    pub n_observations: usize,
    pub clamps: usize,
}

/// Draw `theta* ~ Exp(h*)` per type, run the network and the hemodynamic
/// model, then sample noisy observations.
pub fn generate_ground_truth(
    cfg: &ExperimentConfig,
    topo: &NetworkTopology,
) -> Result<GroundTruth> {
    cfg.validate()?;
    let n = topo.n_neurons();
    if n != cfg.topology.n {
        return Err(HdaError::config("topology size differs from configuration"));
    }
    let mut theta = SynapticConductances::zeros(n);
    for u in SynapseType::ALL {
        let mut rng = stream_rng(cfg.seed, Stream::TruthParameters, u.index() as u64);
        let fam = PriorFamily::Exponential {
            mean: *cfg.ground_truth.get(u),
        };
        *theta.get_mut(u) = fam.sample(n, &mut rng)?;
    }

    let mut rng = stream_rng(cfg.seed, Stream::TruthNetwork, 0);
    let out = lif::run(topo, &cfg.neuron, &theta, cfg.duration_ms, &mut rng)?;
    let mut z = out.z;
    add_white_noise(
        &mut z,
        cfg.z_noise_var,
        &mut stream_rng(cfg.seed, Stream::TruthObservation, 0),
    );

    let mut hemo = HemodynamicState::EQUILIBRIUM;
    let (bold_dense, clamps) = integrate_dense(&mut hemo, &z, &cfg.hemodynamics)?;
    let observations = downsample_observe(
        &bold_dense,
        cfg.filter.analysis_period_s,
        cfg.obs_noise_var,
        &mut stream_rng(cfg.seed, Stream::TruthObservation, 1),
    )?;
    log::info!(
        "ground truth: {} spikes over {} ms ({:.2} Hz)",
        out.raster.len(),
        cfg.duration_ms,
        out.raster.len() as f64 / n as f64 / (cfg.duration_ms as f64 / 1000.0)
    );
    Ok(GroundTruth {
        h_star: cfg.ground_truth,
        theta,
        raster: out.raster,
        z,
        bold_dense,
        observations,
        clamps,
    })
}

impl GroundTruth {
    pub fn summary(&self, duration_ms: u64) -> TruthSummary {
        let n = self.theta.get(SynapseType::Ampa).len();
        TruthSummary {
            h_star: self.h_star,
            n_neurons: n,
            duration_ms,
            n_spikes: self.raster.len(),
            mean_rate_hz: self.raster.len() as f64 / n as f64 / (duration_ms as f64 / 1000.0),
            n_observations: self.observations.len(),
            clamps: self.clamps,
        }
    }

    /// Write `observations.csv`, `bold_dense.csv`, `activity.csv`,
    /// `raster.csv`, `theta.csv` and `truth.json` into `dir`.
    pub fn archive(&self, dir: &Path, duration_ms: u64) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.observations.save(dir.join("observations.csv"))?;
        let dense = BoldSeries {
            t_s: (1..=self.bold_dense.len())
                .map(|k| k as f64 / 1000.0)
                .collect(),
            y: self.bold_dense.clone(),
        };
        dense.save(dir.join("bold_dense.csv"))?;

        let mut w = BufWriter::new(fs::File::create(dir.join("activity.csv"))?);
        writeln!(w, "t_ms,z")?;
        for (k, z) in self.z.iter().enumerate() {
            writeln!(w, "{},{z:e}", k + 1)?;
        }
        w.flush()?;

        let mut w = BufWriter::new(fs::File::create(dir.join("raster.csv"))?);
        writeln!(w, "t_ms,neuron")?;
        for s in &self.raster {
            writeln!(w, "{},{}", s.t_ms, s.neuron)?;
        }
        w.flush()?;

        save_theta(&self.theta, &dir.join("theta.csv"))?;
        let json = serde_json::to_string_pretty(&self.summary(duration_ms))
            .map_err(|e| HdaError::Numeric(format!("summary: {e}")))?;
        fs::write(dir.join("truth.json"), json)?;
        Ok(())
    }
}

/// `neuron,AMPA,NMDA,GABA_A,GABA_B`, shortest round-trip float formatting.
pub fn save_theta(theta: &SynapticConductances, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "neuron,AMPA,NMDA,GABA_A,GABA_B")?;
    for i in 0..theta.get(SynapseType::Ampa).len() {
        let vals: Vec<String> = SynapseType::ALL
            .iter()
            .map(|&u| format!("{:e}", theta.get(u)[i]))
            .collect();
        writeln!(w, "{i},{}", vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_theta(path: &Path) -> Result<SynapticConductances> {
    let file = fs::File::open(path)?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || HdaError::parse(format!("bad theta record on line {}", k + 1));
        if f.len() != 5 || f[0].parse::<usize>().ok() != Some(rows.len()) {
            return Err(bad());
        }
        let mut r = [0.0; 4];
        for (slot, s) in r.iter_mut().zip(&f[1..]) {
            *slot = s.parse().map_err(|_| bad())?;
        }
        rows.push(r);
    }
    let mut theta = SynapticConductances::zeros(rows.len());
    for u in SynapseType::ALL {
        *theta.get_mut(u) = rows.iter().map(|r| r[u.index()]).collect();
    }
    Ok(theta)
}

pub fn load_summary(path: &Path) -> Result<TruthSummary> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| HdaError::parse(format!("{}: {e}", path.display())))
}
