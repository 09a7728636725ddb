use statrs::distribution::{ContinuousCDF, Exp};

use hda::assimilation::{run_hda, Assimilator, FilterConfig, FilterKind};
use hda::harness::{
    build_topology, generate_ground_truth, load_summary, load_theta, model_context, run_twin,
    write_twin, ExperimentConfig,
};
use hda::hemodynamics::BoldSeries;
use hda::lif::SynapticConductances;
use hda::par::Execution;
use hda::stats;
use hda::{HdaError, SynapseType};

fn short(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        duration_ms: 4000,
        score_window: 2,
        ..Default::default()
    };
    cfg.filter.n_members = 6;
    cfg
}

fn trace_text(cfg: &ExperimentConfig) -> Vec<u8> {
    let run = run_twin(cfg).unwrap();
    let mut buf = Vec::new();
    run.trace.write_to(&mut buf).unwrap();
    buf
}

#[test]
fn parallel_and_sequential_runs_are_identical() {
    let mut cfg = short(3);
    cfg.filter.execution = Execution::Sequential;
    let seq = trace_text(&cfg);
    cfg.filter.execution = Execution::Parallel;
    assert_eq!(seq, trace_text(&cfg));
    cfg.filter.kind = FilterKind::Pf;
    let pf_par = trace_text(&cfg);
    cfg.filter.execution = Execution::Sequential;
    assert_eq!(pf_par, trace_text(&cfg));
}

#[test]
fn seeds_control_the_run() {
    assert_eq!(trace_text(&short(5)), trace_text(&short(5)));
    assert_ne!(trace_text(&short(5)), trace_text(&short(6)));
}

#[test]
fn ground_truth_sampling_grid() {
    let mut cfg = ExperimentConfig {
        obs_noise_var: 0.0,
        ..Default::default()
    };
    cfg.seed = 9;
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let truth = generate_ground_truth(&cfg, &topo).unwrap();
    assert_eq!(truth.observations.len(), 50);
    assert_eq!(truth.bold_dense.len(), 40_000);
    for (l, (&t, &y)) in truth
        .observations
        .t_s
        .iter()
        .zip(&truth.observations.y)
        .enumerate()
    {
        assert!((t - 0.8 * (l + 1) as f64).abs() < 1e-9);
        assert_eq!(y, truth.bold_dense[800 * (l + 1) - 1]);
    }
    let rate = truth.summary(cfg.duration_ms).mean_rate_hz;
    assert!(rate > 1.0 && rate < 100.0, "mean rate {rate} Hz");
}

#[test]
fn archived_run_round_trips() {
    let cfg = short(4);
    let run = run_twin(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_twin(dir.path(), &cfg, &run).unwrap();
    let summary = load_summary(&dir.path().join("truth/truth.json")).unwrap();
    assert_eq!(summary.h_star, cfg.ground_truth);
    assert_eq!(summary.n_observations, 5);
    let theta = load_theta(&dir.path().join("truth/theta.csv")).unwrap();
    assert_eq!(theta, run.truth.theta);
    let obs = BoldSeries::load(dir.path().join("truth/observations.csv")).unwrap();
    assert_eq!(obs, run.truth.observations);
    let back = ExperimentConfig::load(dir.path().join("config.toml")).unwrap();
    assert_eq!(
        back.to_toml_string().unwrap(),
        cfg.to_toml_string().unwrap()
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["state_vector"][0], "h'[AMPA]");
    assert_eq!(meta["seed"], 4);
}

/// Observations produced by member 0 itself, with no hyperparameter walk and
/// no observation noise, leave member 0 untouched by every analysis.
#[test]
fn self_assimilation_is_a_fixed_point() {
    let cfg = short(8);
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let known = SynapticConductances::uniform(topo.n_neurons(), cfg.ground_truth);
    let fc = FilterConfig {
        sigma_h: 0.0,
        gamma_obs: 0.0,
        ..cfg.filter
    };
    let mut a = Assimilator::new(model_context(&cfg, &topo, &known), fc, cfg.seed).unwrap();
    for _ in 0..4 {
        a.forecast().unwrap();
        let before = a.members()[0].state_vector();
        let y = a.members()[0].y_pred;
        a.analyse(y).unwrap();
        assert_eq!(a.members()[0].state_vector(), before);
    }
}

#[test]
fn zero_walk_keeps_hyperparameters_and_conductances() {
    let cfg = short(2);
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let known = SynapticConductances::uniform(topo.n_neurons(), cfg.ground_truth);
    let fc = FilterConfig {
        sigma_h: 0.0,
        ..cfg.filter
    };
    let mut a = Assimilator::new(model_context(&cfg, &topo, &known), fc, 1).unwrap();
    let h0: Vec<Vec<f64>> = a.members().iter().map(|m| m.h_prime.clone()).collect();
    let g0: Vec<SynapticConductances> = a.members().iter().map(|m| m.g.clone()).collect();
    a.forecast().unwrap();
    for (m, (h, g)) in a.members().iter().zip(h0.iter().zip(&g0)) {
        assert_eq!(&m.h_prime, h);
        assert_eq!(&m.g, g);
    }
}

#[test]
fn walked_conductances_stay_exponential() {
    let cfg = ExperimentConfig {
        seed: 12,
        ..short(12)
    };
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let known = SynapticConductances::uniform(topo.n_neurons(), cfg.ground_truth);
    let fc = FilterConfig {
        n_members: 10,
        sigma_h: 3.0,
        ..cfg.filter
    };
    let mut a = Assimilator::new(model_context(&cfg, &topo, &known), fc, 2).unwrap();
    for _ in 0..3 {
        a.forecast().unwrap();
    }
    let ctx = a.context();
    let pooled: Vec<f64> = a
        .members()
        .iter()
        .flat_map(|m| {
            let h = m.h_natural(ctx)[0];
            m.g.get(SynapseType::Ampa)
                .iter()
                .map(move |x| x / h)
                .collect::<Vec<_>>()
        })
        .collect();
    let d = Exp::new(1.0).unwrap();
    let ks = stats::ks_statistic(&pooled, |x| d.cdf(x));
    assert!(ks < stats::ks_critical(pooled.len(), 0.01), "KS {ks}");
}

#[test]
fn hyperparameters_stay_inside_bounds() {
    let cfg = short(7);
    let run = run_twin(&cfg).unwrap();
    let b = cfg.bounds()[0];
    for r in &run.trace.rows {
        assert!(r.h_mean[0] > b.min && r.h_mean[0] < b.max);
    }
    let mut pf = cfg.clone();
    pf.filter.kind = FilterKind::Pf;
    let run = run_twin(&pf).unwrap();
    for r in &run.trace.rows {
        assert!(r.ess >= 1.0 - 1e-9 && r.ess <= pf.filter.n_members as f64 + 1e-9);
    }
}

#[test]
fn malformed_observations_are_rejected() {
    let cfg = short(1);
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let known = SynapticConductances::uniform(topo.n_neurons(), cfg.ground_truth);
    let empty = BoldSeries {
        t_s: vec![],
        y: vec![],
    };
    let err = run_hda(model_context(&cfg, &topo, &known), cfg.filter, &empty, 1).unwrap_err();
    assert_eq!(err.category(), "config");
    let shifted = BoldSeries {
        t_s: vec![0.5],
        y: vec![0.0],
    };
    assert!(run_hda(model_context(&cfg, &topo, &known), cfg.filter, &shifted, 1).is_err());
}

#[test]
fn pf_degeneracy_is_reported() {
    let cfg = short(1);
    let topo = build_topology(&cfg.topology, cfg.seed).unwrap();
    let known = SynapticConductances::uniform(topo.n_neurons(), cfg.ground_truth);
    let fc = FilterConfig {
        kind: FilterKind::Pf,
        gamma_obs: 1e-30,
        ..cfg.filter
    };
    let mut a = Assimilator::new(model_context(&cfg, &topo, &known), fc, 1).unwrap();
    a.forecast().unwrap();
    match a.analyse(1.0) {
        Err(HdaError::Degeneracy { min_residual }) => assert!(min_residual > 0.5),
        other => panic!("expected degeneracy, got {other:?}"),
    }
}
