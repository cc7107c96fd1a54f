//! Adaptive Bayesian estimation of a qubit-resonator coupling `g` and the
//! resonator frequency `omega_r` from single-shot excitation measurements.
//!
//! The pieces:
//!
//! * [`physics`]: excitation probabilities with optional relaxation and
//!   readout error.
//! * [`smc`]: weighted particle posterior with Liu-West resampling.
//! * [`strategy`]: adaptive choice of the next `(omega_q, t)`.
//! * [`session`]: the measure-update loop and the verification/restart
//!   protocol.
//! * [`sim`]: simulated experiments, ensembles, error curves and sweeps.
//! * [`baseline`]: uniform-grid acquisition and maximum-likelihood fit.
//! * [`config`]: flat key/value configuration shared by the front ends.

pub mod baseline;
pub mod config;
pub mod error;
pub mod format;
pub mod optimize;
pub mod physics;
pub mod rng;
pub mod session;
pub mod sim;
pub mod smc;
pub mod strategy;

pub use error::{Error, Result};
pub use physics::{ControlSetting, NoiseParams, Relaxation, SystemParams};
pub use session::{run_estimation, OutlierProtocol, RunRecord, RunStatus, SessionConfig};
pub use smc::{ParticleCloud, PosteriorSummary, PriorSpec, Resampling};
pub use strategy::{Strategy, StrategyParams};
