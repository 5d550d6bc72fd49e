//! Exciton-polariton condensate in a double well: a two-mode model fed by
//! laser-pumped exciton reservoirs, with phase noise, first-order coherence
//! estimators and the non-Hermitian spectrum of the balanced gain/loss dimer.
//!
//! All quantities are in units of the Josephson coupling |J| (time in 1/|J|).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod correlation;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod run;
pub mod spectral;

pub use error::{Error, Result};
pub use integrator::{IntegrationConfig, NoiseConfig, Trajectory, Well};
pub use model::{Coherence, ModelParams, SystemState};
