//! Particle gradient flows of homogeneous aggregation-diffusion energies in one dimension.
//!
//! The crate is organized around the discrete functional of [`model`]:
//!
//! - [`model`] evaluates energies, forces, moments and the Cauchy–Schwarz deficit;
//! - [`flow`] integrates the gradient flow with implicit Euler and Newton inner solves;
//! - [`thresholds`] computes the critical couplings `C_p`, critical profiles and deficit infima;
//! - [`blowup`] detects collapsing clusters in recorded trajectories;
//! - [`io`] reads run configurations and writes CSV, JSON and SVG artifacts;
//! - [`cli`] is the command-line front end used by the `homoflow` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod cli;
pub mod error;
pub mod flow;
pub mod io;
pub mod model;
mod optim;
pub mod thresholds;

pub use error::{Error, Result};
pub use flow::{
    simulate, simulate_log, ChiScaling, DtSchedule, ModelSpec, RunSpec, SimulationResult, Termination,
};
pub use io::profile::InitialProfile;
pub use model::{Configuration, EnergyBreakdown, ModelParams};
