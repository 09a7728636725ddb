//! Conductance-based leaky integrate-and-fire network, Euler-integrated on a
//! 1 ms grid.
//!
//! Each step runs in three phases:
//!
//! 1. membrane update for non-refractory neurons using the gating values
//!    from the start of the step;
//! 2. gating decay plus increments from the spikes emitted on the previous
//!    step (one-step propagation delay) and from background Poisson input;
//! 3. threshold test on the updated potentials, reset and refractory hold.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{HdaError, Result};
use crate::synapse::{PerType, SynapseType};
use crate::topology::NetworkTopology;

/// Background excitatory input: every neuron receives a Poisson stream of
/// external spikes on its AMPA gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundDrive {
    /// Expected external spikes per neuron per ms.
    pub rate_per_ms: f64,
    /// Gating increment per external spike.
    pub weight: f64,
}

impl BackgroundDrive {
    pub const OFF: BackgroundDrive = BackgroundDrive {
        rate_per_ms: 0.0,
        weight: 0.0,
    };
}

impl Default for BackgroundDrive {
    fn default() -> Self {
        BackgroundDrive {
            rate_per_ms: 3.0,
            weight: 0.3,
        }
    }
}

/// Membrane and synapse constants. Units: mV, mS, uF, ms, nA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub c_m: f64,
    pub g_leak: f64,
    pub v_leak: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub t_ref_ms: f64,
    pub v_syn: PerType<f64>,
    pub tau_syn: PerType<f64>,
    pub i_ext: f64,
    #[serde(default)]
    pub background: BackgroundDrive,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            c_m: 1.0,
            g_leak: 0.03,
            v_leak: -75.0,
            v_th: -50.0,
            v_rest: -65.0,
            t_ref_ms: 5.0,
            v_syn: PerType {
                ampa: 0.0,
                nmda: 0.0,
                gaba_a: -70.0,
                gaba_b: -100.0,
            },
            tau_syn: PerType {
                ampa: 2.0,
                nmda: 40.0,
                gaba_a: 10.0,
                gaba_b: 50.0,
            },
            i_ext: 0.0,
            background: BackgroundDrive::default(),
        }
    }
}

impl NeuronParams {
    /// Table constants with background input switched off.
    pub fn without_background() -> Self {
        NeuronParams {
            background: BackgroundDrive::OFF,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HdaError::config(format!("neuron params: {m}")));
        if self.v_rest >= self.v_th {
            return fail("v_rest must be below v_th");
        }
        if self.t_ref_ms <= 0.0 {
            return fail("t_ref must be positive");
        }
        if self.c_m <= 0.0 || self.g_leak <= 0.0 {
            return fail("c_m and g_leak must be positive");
        }
        if SynapseType::ALL
            .iter()
            .any(|&u| *self.tau_syn.get(u) <= 0.0)
        {
            return fail("every tau_syn must be positive");
        }
        if self.background.rate_per_ms < 0.0 || self.background.weight < 0.0 {
            return fail("background drive must be nonnegative");
        }
        Ok(())
    }

    fn refractory_steps(&self, dt: f64) -> Result<u32> {
        let steps = self.t_ref_ms / dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(HdaError::config(format!(
                "t_ref = {} ms is not a multiple of dt = {dt} ms",
                self.t_ref_ms
            )));
        }
        Ok(steps.round() as u32)
    }
}

/// Per-neuron synaptic conductances `g_{u,i}` (mS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapticConductances {
    pub g: PerType<Vec<f64>>,
}

impl SynapticConductances {
    pub fn zeros(n: usize) -> Self {
        SynapticConductances {
            g: PerType::from_fn(|_| vec![0.0; n]),
        }
    }

    pub fn uniform(n: usize, values: PerType<f64>) -> Self {
        SynapticConductances {
            g: PerType::from_fn(|u| vec![*values.get(u); n]),
        }
    }

    pub fn get(&self, u: SynapseType) -> &[f64] {
        self.g.get(u)
    }

    pub fn get_mut(&mut self, u: SynapseType) -> &mut Vec<f64> {
        self.g.get_mut(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub v: Vec<f64>,
    pub j_gate: PerType<Vec<f64>>,
    pub refractory: Vec<u32>,
    /// Neurons that fired on the most recent step.
    pub spikes: Vec<u32>,
    pub t_ms: f64,
}

impl NetworkState {
    /// Potentials i.i.d. uniform on `[v_rest, v_th)`, gates closed.
    pub fn initial<R: Rng + ?Sized>(n: usize, params: &NeuronParams, rng: &mut R) -> Self {
        let v = (0..n)
            .map(|_| rng.random_range(params.v_rest..params.v_th))
            .collect();
        NetworkState {
            v,
            j_gate: PerType::from_fn(|_| vec![0.0; n]),
            refractory: vec![0; n],
            spikes: Vec::new(),
            t_ms: 0.0,
        }
    }

    /// Every neuron at `v`, gates closed.
    pub fn at_potential(n: usize, v: f64) -> Self {
        NetworkState {
            v: vec![v; n],
            j_gate: PerType::from_fn(|_| vec![0.0; n]),
            refractory: vec![0; n],
            spikes: Vec::new(),
            t_ms: 0.0,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.v.len()
    }
}

/// Advance the network by one Euler step of `dt` ms.
pub fn step<R: Rng + ?Sized>(
    state: &mut NetworkState,
    topo: &NetworkTopology,
    params: &NeuronParams,
    g: &SynapticConductances,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    let n = state.n_neurons();
    let t_ref_steps = params.refractory_steps(dt)?;
    let k = dt / params.c_m;

    for i in 0..n {
        if state.refractory[i] > 0 {
            state.refractory[i] -= 1;
            state.v[i] = params.v_rest;
            continue;
        }
        let v = state.v[i];
        let mut current = -params.g_leak * (v - params.v_leak) + params.i_ext;
        for u in SynapseType::ALL {
            let j = state.j_gate.get(u)[i];
            if j != 0.0 {
                current += g.get(u)[i] * (params.v_syn.get(u) - v) * j;
            }
        }
        let v_new = v + k * current;
        if !v_new.is_finite() {
            return Err(HdaError::NumericDivergence {
                what: "membrane potential".into(),
                index: i,
                t_ms: state.t_ms,
            });
        }
        state.v[i] = v_new;
    }

    for u in SynapseType::ALL {
        let decay = 1.0 - dt / params.tau_syn.get(u);
        state.j_gate.get_mut(u).iter_mut().for_each(|j| *j *= decay);
    }
    for &pre in &state.spikes {
        let pre = pre as usize;
        for u in topo.class(pre).synapse_types() {
            let gate = state.j_gate.get_mut(u);
            for (post, w) in topo.outgoing(u, pre) {
                gate[post] += w;
            }
        }
    }
    let bg = params.background;
    if bg.rate_per_ms > 0.0 && bg.weight > 0.0 {
        let poisson = Poisson::new(bg.rate_per_ms * dt)
            .map_err(|e| HdaError::config(format!("background rate: {e}")))?;
        let gate = state.j_gate.get_mut(SynapseType::Ampa);
        for j in gate.iter_mut() {
            let count: f64 = poisson.sample(rng);
            *j += count * bg.weight;
        }
    }

    state.spikes.clear();
    for i in 0..n {
        if state.refractory[i] == 0 && state.v[i] >= params.v_th {
            state.spikes.push(i as u32);
            state.v[i] = params.v_rest;
            state.refractory[i] = t_ref_steps;
        }
    }
    state.t_ms += dt;
    Ok(())
}

/// `z(t) = count(t) / N`.
pub fn population_activity(spike_counts: &[usize], n: usize) -> Vec<f64> {
    assert!(n > 0, "population size must be positive");
    spike_counts.iter().map(|&c| c as f64 / n as f64).collect()
}

/// Add i.i.d. Gaussian noise of variance `var` to a series in place.
pub fn add_white_noise<R: Rng + ?Sized>(series: &mut [f64], var: f64, rng: &mut R) {
    if var <= 0.0 {
        return;
    }
    let sd = var.sqrt();
    for x in series {
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        *x += sd * e;
    }
}

/// A spike event: `(t_ms, neuron)`, `t_ms` being the end of the step it fired in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spike {
    pub t_ms: u64,
    pub neuron: u32,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub raster: Vec<Spike>,
    pub z: Vec<f64>,
    pub state: NetworkState,
}

/// Run from a fresh [`NetworkState::initial`] for `duration_ms` steps of 1 ms.
pub fn run<R: Rng + ?Sized>(
    topo: &NetworkTopology,
    params: &NeuronParams,
    g: &SynapticConductances,
    duration_ms: u64,
    rng: &mut R,
) -> Result<RunOutput> {
    let state = NetworkState::initial(topo.n_neurons(), params, rng);
    run_from(state, topo, params, g, duration_ms, rng)
}

/// Run from a given state.
pub fn run_from<R: Rng + ?Sized>(
    mut state: NetworkState,
    topo: &NetworkTopology,
    params: &NeuronParams,
    g: &SynapticConductances,
    duration_ms: u64,
    rng: &mut R,
) -> Result<RunOutput> {
    params.validate()?;
    let n = topo.n_neurons();
    let mut raster = Vec::new();
    let mut counts = Vec::with_capacity(duration_ms as usize);
    for _ in 0..duration_ms {
        step(&mut state, topo, params, g, 1.0, rng)?;
        let t = state.t_ms.round() as u64;
        raster.extend(state.spikes.iter().map(|&i| Spike { t_ms: t, neuron: i }));
        counts.push(state.spikes.len());
    }
    Ok(RunOutput {
        raster,
        z: population_activity(&counts, n),
        state,
    })
}

/// Per-neuron firing rates (Hz) over consecutive windows of `window_ms`,
/// flattened as `[window][neuron]`.
pub fn windowed_rates(raster: &[Spike], n: usize, duration_ms: u64, window_ms: u64) -> Vec<f64> {
    let n_windows = (duration_ms / window_ms) as usize;
    let mut counts = vec![0u32; n_windows * n];
    for s in raster {
        // Spike stamped t fired during (t-1, t].
        let w = ((s.t_ms.saturating_sub(1)) / window_ms) as usize;
        if w < n_windows {
            counts[w * n + s.neuron as usize] += 1;
        }
    }
    let scale = 1000.0 / window_ms as f64;
    counts.into_iter().map(|c| c as f64 * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::topology::generate_random_fixed_degree;
    use approx::assert_relative_eq;

    fn lone_neuron_topology() -> NetworkTopology {
        generate_random_fixed_degree(50, 10, 0).unwrap()
    }

    #[test]
    fn leak_fixed_point() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -75.0);
        let mut rng = rng_from_seed(0);
        step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
        assert!(s.v.iter().all(|&v| v == -75.0));
    }

    #[test]
    fn euler_update_by_hand() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -65.0);
        step(&mut s, &topo, &p, &g, 1.0, &mut rng_from_seed(0)).unwrap();
        // -65 + 1 * (-0.03 * 10)
        assert_relative_eq!(s.v[0], -65.3, epsilon = 1e-12);
    }

    #[test]
    fn threshold_reset_and_refractory_hold() {
        let topo = lone_neuron_topology();
        let mut p = NeuronParams::without_background();
        // Strong external current pushes neuron over threshold every time it is free.
        p.i_ext = 100.0;
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -51.0);
        let mut rng = rng_from_seed(0);
        step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
        assert_eq!(s.spikes.len(), 50);
        assert!(s.v.iter().all(|&v| v == -65.0));
        assert!(s.refractory.iter().all(|&r| r == 5));
        for _ in 0..5 {
            step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
            assert!(s.spikes.is_empty());
            assert!(s.v.iter().all(|&v| v == -65.0));
        }
        step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
        assert_eq!(s.spikes.len(), 50);
    }

    #[test]
    fn gating_decay_law() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -75.0);
        for u in SynapseType::ALL {
            s.j_gate.get_mut(u).fill(1.0);
        }
        let mut rng = rng_from_seed(0);
        step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
        assert_eq!(s.j_gate.ampa[0], 0.5);
        for _ in 0..9 {
            step(&mut s, &topo, &p, &g, 1.0, &mut rng).unwrap();
        }
        for u in SynapseType::ALL {
            let expect = (1.0 - 1.0 / p.tau_syn.get(u)).powi(10);
            assert_relative_eq!(s.j_gate.get(u)[3], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn spikes_propagate_with_one_step_delay() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -75.0);
        s.spikes = vec![0];
        step(&mut s, &topo, &p, &g, 1.0, &mut rng_from_seed(0)).unwrap();
        for (post, w) in topo.outgoing(SynapseType::Ampa, 0) {
            assert_eq!(s.j_gate.ampa[post], w);
            assert_eq!(
                s.j_gate.nmda[post],
                topo.weights(SynapseType::Nmda).get(post, 0)
            );
        }
        assert!(s.j_gate.gaba_a.iter().all(|&j| j == 0.0));
    }

    #[test]
    fn divergence_reports_neuron() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let mut s = NetworkState::at_potential(50, -75.0);
        s.v[7] = f64::NAN;
        let err = step(&mut s, &topo, &p, &g, 1.0, &mut rng_from_seed(0)).unwrap_err();
        assert!(
            matches!(err, HdaError::NumericDivergence { index: 7, .. }),
            "{err}"
        );
    }

    #[test]
    fn population_activity_counts() {
        assert_eq!(population_activity(&[0, 0, 0], 10), vec![0.0; 3]);
        assert_eq!(population_activity(&[5], 100), vec![0.05]);
    }

    #[test]
    fn zero_duration_run() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::default();
        let g = SynapticConductances::zeros(50);
        let out = run(&topo, &p, &g, 0, &mut rng_from_seed(1)).unwrap();
        assert!(out.raster.is_empty() && out.z.is_empty());
        assert_eq!(out.state.t_ms, 0.0);
    }

    #[test]
    fn silent_without_drive() {
        let topo = lone_neuron_topology();
        let p = NeuronParams::without_background();
        let g = SynapticConductances::zeros(50);
        let out = run(&topo, &p, &g, 2000, &mut rng_from_seed(1)).unwrap();
        assert!(out.raster.is_empty());
    }

    #[test]
    fn windowed_rates_by_count() {
        let raster = vec![
            Spike { t_ms: 1, neuron: 0 },
            Spike {
                t_ms: 800,
                neuron: 0,
            },
            Spike {
                t_ms: 801,
                neuron: 1,
            },
        ];
        let r = windowed_rates(&raster, 2, 1600, 800);
        assert_eq!(r, vec![2.5, 0.0, 0.0, 1.25]);
    }
}
