//! Hierarchical data assimilation (HDA) for leaky integrate-and-fire networks.
//!
//! The crate simulates a conductance-based LIF network whose population
//! activity drives a Balloon-Windkessel hemodynamic model, then recovers the
//! hyperparameters of the synaptic-conductance distributions from the
//! downsampled BOLD signal with an ensemble Kalman filter or a bootstrap
//! particle filter.
//!
//! Module map:
//!
//! - [`topology`]: typed, weighted synaptic graphs (fixed-degree random,
//!   Watts-Strogatz, Barabasi-Albert) and their text serialization.
//! - [`lif`]: Euler integration of membrane and gating dynamics.
//! - [`hemodynamics`]: Balloon-Windkessel integration, BOLD readout and
//!   noisy downsampling.
//! - [`hyperprior`]: prior families, CDF and MCMC parameter transport, and
//!   the logistic hyperparameter transform.
//! - [`assimilation`]: ensemble members, EnKF and particle-filter analysis,
//!   and an exact Kalman filter used as a test oracle.
//! - [`harness`]: configuration, twin-experiment orchestration, scoring,
//!   sweeps and the toy Gaussian validator.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assimilation;
pub mod error;
pub mod harness;
pub mod hemodynamics;
pub mod hyperprior;
pub mod lif;
pub mod par;
pub mod rng;
pub mod stats;
pub mod synapse;
pub mod topology;

pub use error::{HdaError, Result};
pub use synapse::SynapseType;
