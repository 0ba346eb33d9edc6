//! Shared fixtures for the benchmarks.

use levcool_core::params::DEFAULT_DT;
use levcool_core::SimParams;

/// A conditioned, feedback-damped oscillator at a thermal start.
pub fn sim_params(k_tilde: f64, eta: f64, periods: f64) -> SimParams {
    SimParams {
        kappa_s: 2.0 * k_tilde,
        eta,
        gamma_s: 10.0,
        n_th: 2.0,
        dt: DEFAULT_DT,
        duration: periods * levcool_core::params::TRAP_PERIOD,
    }
}
