//! Simulation of a continuously measured levitated oscillator: conditional
//! Gaussian-state dynamics, state estimation from the photocurrent record,
//! feedback cooling, closed-form steady states and a Fock-basis oracle.
//!
//! Everything below [`params`] works in simulation units where
//! `ħ = m = ω = 1`; the ground state has `Vx = Vp = 1/2`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod measurement;
pub mod oracle;
pub mod params;
pub mod steady;

pub use dynamics::{GaussianState, Mode, TrajectoryOutput};
pub use error::{Error, Result};
pub use params::{SimParams, TrapParams};
pub use steady::SteadyStateReport;
