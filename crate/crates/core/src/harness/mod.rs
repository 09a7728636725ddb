//! Experiment orchestration: configuration, twin experiments (generate a
//! hidden ground truth, then assimilate its BOLD samples), scoring, sweeps,
//! the toy Gaussian validator, and run-directory outputs.

mod config;
mod score;
mod sweep;
mod toy;
mod truth;

pub use config::{
    BoundsOverride, ExperimentConfig, PriorShape, SweepAxis, SweepSpec, TopologySpec, ToySpec,
};
pub use score::{error_report, score, ErrorReport, SeriesScore, WindowScore};
pub use sweep::{apply_axis, run_sweep, SweepCell, SweepReport, SweepRow};
pub use toy::{toy_gaussian_validator, var_estimate_se, ToyReport};
pub use truth::{
    generate_ground_truth, load_summary, load_theta, save_theta, GroundTruth, TruthSummary,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assimilation::{run_hda, AssimilationTrace, ModelContext};
use crate::error::{HdaError, Result};
use crate::hemodynamics::BoldSeries;
use crate::lif::SynapticConductances;
use crate::topology::{
    generate_ba_scale_free, generate_random_fixed_degree, generate_ws_small_world, NetworkTopology,
    TopologyKind,
};

pub fn build_topology(spec: &TopologySpec, master_seed: u64) -> Result<NetworkTopology> {
    let seed = spec.resolved_seed(master_seed);
    match spec.kind {
        TopologyKind::Random => generate_random_fixed_degree(spec.n, spec.degree, seed),
        TopologyKind::SmallWorld { p_rewire } => {
            generate_ws_small_world(spec.n, spec.degree, p_rewire, seed)
        }
        TopologyKind::ScaleFree { m_attach } => generate_ba_scale_free(spec.n, m_attach, seed),
    }
}

/// Filter context for `cfg`; non-assimilated conductances come from `known`.
pub fn model_context<'a>(
    cfg: &ExperimentConfig,
    topology: &'a NetworkTopology,
    known: &'a SynapticConductances,
) -> ModelContext<'a> {
    ModelContext {
        topology,
        neuron: cfg.neuron,
        hemo: cfg.hemodynamics,
        assimilated: cfg.assimilated.clone(),
        bounds: cfg.bounds(),
        lambda: cfg.lambda,
        known,
    }
}

/// Assimilate `observations`; members use streams derived from `cfg.seed`.
pub fn assimilate(
    cfg: &ExperimentConfig,
    topology: &NetworkTopology,
    known: &SynapticConductances,
    observations: &BoldSeries,
) -> Result<AssimilationTrace> {
    run_hda(
        model_context(cfg, topology, known),
        cfg.filter,
        observations,
        cfg.seed,
    )
}

#[derive(Debug, Clone)]
pub struct TwinRun {
    pub topology: NetworkTopology,
    pub truth: GroundTruth,
    pub trace: AssimilationTrace,
    pub report: ErrorReport,
}

/// Generate a ground truth, assimilate its observations and score.
pub fn run_twin(cfg: &ExperimentConfig) -> Result<TwinRun> {
    cfg.validate()?;
    let topology = build_topology(&cfg.topology, cfg.seed)?;
    let truth = generate_ground_truth(cfg, &topology)?;
    let trace = assimilate(cfg, &topology, &truth.theta, &truth.observations)?;
    let report = error_report(&trace, &cfg.h_star(), cfg.score_window)?;
    Ok(TwinRun {
        topology,
        truth,
        trace,
        report,
    })
}

/// Written as `metadata.json` in every run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub topology_seed: u64,
    pub state_vector: Vec<String>,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

impl RunMetadata {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: &[&str]) -> Self {
        let mut state_vector: Vec<String> =
            cfg.assimilated.iter().map(|u| format!("h'[{u}]")).collect();
        state_vector.extend(["s", "f", "v", "q", "y_pred"].map(String::from));
        RunMetadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            topology_seed: cfg.topology.resolved_seed(cfg.seed),
            state_vector,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config: cfg.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("metadata.json"), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HdaError::Numeric(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Write the configuration, topology, archived truth, trace, report and
/// metadata of a twin run into `dir`.
pub fn write_twin(dir: &Path, cfg: &ExperimentConfig, run: &TwinRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    run.topology.save(dir.join("topology.txt"))?;
    run.truth.archive(&dir.join("truth"), cfg.duration_ms)?;
    run.trace.save(dir.join("trace.csv"))?;
    write_json(&dir.join("report.json"), &run.report)?;
    RunMetadata::new(
        "assimilate",
        cfg,
        &[
            "config.toml",
            "topology.txt",
            "truth/",
            "trace.csv",
            "report.json",
        ],
    )
    .save(dir)
}
