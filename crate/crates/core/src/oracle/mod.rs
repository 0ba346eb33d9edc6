//! Fock-basis integration of the conditioned master equation, used to check
//! the Gaussian-moment equations on small instances.

mod compare;
mod fock;
mod sme;

pub use compare::{
    compare_oracle, compare_oracle_with, dt_halving_study, HalvingStudy, OracleReport, INITIAL_TRUNCATION_THRESHOLD,
};
pub use fock::{build_operators, DensityState, FockOperators, MAX_DIM, MIN_DIM};
pub use sme::{sme_step, SmeIntegrator, SmeScheme, StepReport, POSITIVITY_THRESHOLD, TRUNCATION_THRESHOLD};
