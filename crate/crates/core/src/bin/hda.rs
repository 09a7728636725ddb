use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hda::harness::{
    self, build_topology, generate_ground_truth, load_summary, load_theta, run_sweep, run_twin,
    toy_gaussian_validator, write_json, ExperimentConfig, RunMetadata, SweepAxis, SweepSpec,
};
use hda::hemodynamics::{read_two_columns, BoldSeries};
use hda::topology::NetworkTopology;
use hda::Result;

#[derive(Parser)]
#[command(
    name = "hda",
    version,
    about = "Hierarchical data assimilation for spiking network models"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ground truth and archive it with its BOLD observations.
    GenTruth(Common),
    /// Assimilate observations, generating the truth first unless --truth is given.
    Assimilate {
        #[command(flatten)]
        common: Common,
        /// Directory written by gen-truth.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Repeat twin experiments across values of one configuration axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// sigma_h, obs_noise, n_members or p_rewire.
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Check the toy Gaussian model's variance and estimator consistency.
    ValidateToy(Common),
    /// Relative squared error of a simulated series against a reference.
    Score {
        #[command(flatten)]
        common: Common,
        /// Two-column `t,y` file with the simulated series.
        #[arg(long)]
        sim: PathBuf,
        /// Two-column `t,y` file with the reference series.
        #[arg(long)]
        truth: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn gen_truth(c: &Common) -> Result<()> {
    let (cfg, out) = load_config(c)?;
    let topo = build_topology(&cfg.topology, cfg.seed)?;
    let truth = generate_ground_truth(&cfg, &topo)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    topo.save(out.join("topology.txt"))?;
    truth.archive(&out.join("truth"), cfg.duration_ms)?;
    RunMetadata::new(
        "gen-truth",
        &cfg,
        &["config.toml", "topology.txt", "truth/"],
    )
    .save(&out)?;
    let s = truth.summary(cfg.duration_ms);
    println!(
        "{} observations, {:.2} Hz mean rate -> {}",
        s.n_observations,
        s.mean_rate_hz,
        out.display()
    );
    Ok(())
}

fn assimilate(c: &Common, truth_dir: Option<&Path>) -> Result<()> {
    let (cfg, out) = load_config(c)?;
    let report = match truth_dir {
        None => {
            let run = run_twin(&cfg)?;
            harness::write_twin(&out, &cfg, &run)?;
            run.report
        }
        Some(dir) => {
            let topo = NetworkTopology::load(dir.join("topology.txt"))?;
            let theta = load_theta(&dir.join("truth/theta.csv"))?;
            let obs = BoldSeries::load(dir.join("truth/observations.csv"))?;
            let summary = load_summary(&dir.join("truth/truth.json"))?;
            if summary.h_star != cfg.ground_truth {
                log::warn!("configured ground truth differs from {}", dir.display());
            }
            let trace = harness::assimilate(&cfg, &topo, &theta, &obs)?;
            let h_star: Vec<f64> = cfg
                .assimilated
                .iter()
                .map(|&u| *summary.h_star.get(u))
                .collect();
            let report = harness::error_report(&trace, &h_star, cfg.score_window)?;
            fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
            trace.save(out.join("trace.csv"))?;
            write_json(&out.join("report.json"), &report)?;
            RunMetadata::new(
                "assimilate",
                &cfg,
                &["config.toml", "trace.csv", "report.json"],
            )
            .save(&out)?;
            report
        }
    };
    println!(
        "eps_bold {:.3e}  eps_h {:?}  final window: eps_bold {:.3e} eps_h {:?}",
        report.eps_bold, report.eps_h, report.last.eps_bold, report.last.eps_h
    );
    Ok(())
}

fn sweep(
    c: &Common,
    axis: Option<SweepAxis>,
    values: Option<Vec<f64>>,
    repeats: Option<usize>,
) -> Result<()> {
    let (cfg, out) = load_config(c)?;
    let mut spec = cfg.sweep.clone().unwrap_or(SweepSpec {
        axis: SweepAxis::NMembers,
        values: vec![5.0, 20.0, 50.0],
        repeats: 5,
    });
    if let Some(a) = axis {
        spec.axis = a;
    }
    if let Some(v) = values {
        spec.values = v;
    }
    if let Some(r) = repeats {
        spec.repeats = r;
    }
    let report = run_sweep(&cfg, &spec)?;
    report.save(out.join("sweep.csv"))?;
    let mut meta_cfg = cfg.clone();
    meta_cfg.sweep = Some(spec);
    fs::write(out.join("config.toml"), meta_cfg.to_toml_string()?)?;
    RunMetadata::new("sweep", &meta_cfg, &["config.toml", "sweep.csv"]).save(&out)?;
    print!("{}", report.table());
    Ok(())
}

fn validate_toy(c: &Common) -> Result<()> {
    let (cfg, out) = load_config(c)?;
    let t = cfg.toy;
    let rep = toy_gaussian_validator(
        t.m,
        t.t_len,
        t.mu0,
        t.n_trials,
        cfg.seed,
        cfg.filter.execution,
    )?;
    write_json(&out.join("toy.json"), &rep)?;
    RunMetadata::new("validate-toy", &cfg, &["toy.json"]).save(&out)?;
    println!(
        "var(y) {:.4e} vs 2/m {:.4e} (z = {:+.2}); median |mu0_hat - mu0| {:.3e}; sign test p {:.3}",
        rep.var_estimate, rep.var_target, rep.var_z, rep.abs_err_median, rep.sign_test_p
    );
    Ok(())
}

fn score(c: &Common, sim: &Path, truth: &Path) -> Result<()> {
    let (_, s) = read_two_columns(fs::File::open(sim)?)?;
    let (_, t) = read_two_columns(fs::File::open(truth)?)?;
    let result = harness::score(&s, &t)?;
    if c.out.is_some() || c.config.is_some() {
        let (cfg, out) = load_config(c)?;
        write_json(&out.join("score.json"), &result)?;
        RunMetadata::new("score", &cfg, &["score.json"]).save(&out)?;
    }
    println!(
        "eps {:.6e} ({} terms excluded)",
        result.eps, result.excluded
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result: Result<()> = match &cli.command {
        Command::GenTruth(c) => gen_truth(c),
        Command::Assimilate { common, truth } => assimilate(common, truth.as_deref()),
        Command::Sweep {
            common,
            axis,
            values,
            repeats,
        } => sweep(common, *axis, values.clone(), *repeats),
        Command::ValidateToy(c) => validate_toy(c),
        Command::Score { common, sim, truth } => score(common, sim, truth),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hda: {} error: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
