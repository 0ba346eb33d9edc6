//! Conditional Gaussian-state dynamics under continuous position measurement,
//! the innovation-driven state estimator and LQG damping feedback.
//!
//! Means advance by Euler–Maruyama. The covariance subsystem is deterministic
//! and autonomous; it is propagated by the exact Riccati flow in [`riccati`].

mod riccati;
mod trajectory;

pub use riccati::VarianceFlow;
pub use trajectory::{
    ensemble_map, initial_estimate, initial_true_state, simulate_trajectory, Mode, StepSample, TrajectoryOutput,
    TrajectoryRunner,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::RecordIncrement;
use crate::params::SimParams;

/// Variances above this are treated as integrator blow-up.
pub const VARIANCE_CEILING: f64 = 1e6;
/// Relative slack on the Heisenberg bound `VxVp − C² ≥ 1/4`.
pub const HEISENBERG_TOLERANCE: f64 = 1e-9;

/// First and second moments of a Gaussian motional state, simulation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// Symmetrized covariance ½⟨{x, p}⟩ − ⟨x⟩⟨p⟩.
    pub cov_xp: f64,
}

impl GaussianState {
    pub fn ground() -> Self {
        Self::coherent(0.0, 0.0)
    }

    pub fn coherent(mean_x: f64, mean_p: f64) -> Self {
        Self {
            mean_x,
            mean_p,
            var_x: 0.5,
            var_p: 0.5,
            cov_xp: 0.0,
        }
    }

    pub fn thermal(n_th: f64) -> Self {
        Self {
            mean_x: 0.0,
            mean_p: 0.0,
            var_x: n_th + 0.5,
            var_p: n_th + 0.5,
            cov_xp: 0.0,
        }
    }

    /// `VxVp − C²`; equals 1/4 for pure states.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    /// Mean energy `(Vx + Vp + ⟨x⟩² + ⟨p⟩²)/2` in units of ħω.
    pub fn energy(&self) -> f64 {
        0.5 * (self.var_x + self.var_p + self.mean_x * self.mean_x + self.mean_p * self.mean_p)
    }

    pub fn validate(&self) -> Result<()> {
        let vars = [self.var_x, self.var_p];
        if !vars.iter().all(|v| *v > 0.0 && *v < VARIANCE_CEILING)
            || !self.cov_xp.is_finite()
            || !self.mean_x.is_finite()
            || !self.mean_p.is_finite()
        {
            return Err(Error::IntegratorBlowup(format!(
                "state left the admissible region: {self:?}"
            )));
        }
        let bound = 0.25 * (1.0 - HEISENBERG_TOLERANCE);
        let product = self.uncertainty_product();
        if product < bound {
            return Err(Error::IntegratorBlowup(format!(
                "Heisenberg bound violated: VxVp - C^2 = {product:.12e}"
            )));
        }
        Ok(())
    }
}

/// Feedback actuation applied to the means as rates: `d⟨x⟩ −= fx·dt`,
/// `d⟨p⟩ −= fp·dt`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub fx: f64,
    pub fp: f64,
}

impl Actuation {
    pub const NONE: Actuation = Actuation { fx: 0.0, fp: 0.0 };

    /// LQG damping `Γ(⟨x⟩, ⟨p⟩)` computed from the (estimated) means, the
    /// solution of the energy cost with `H_f = Γ(⟨p⟩x + ⟨x⟩p)`.
    pub fn damping(gamma_s: f64, estimate: &GaussianState) -> Self {
        Self {
            fx: gamma_s * estimate.mean_x,
            fp: gamma_s * estimate.mean_p,
        }
    }
}

/// Right-hand sides `(dVx/dt, dVp/dt, dCxp/dt)` of the covariance equations.
pub fn variance_rates(s: &GaussianState, sp: &SimParams) -> (f64, f64, f64) {
    let r = sp.information_rate();
    (
        2.0 * s.cov_xp - r * s.var_x * s.var_x,
        -2.0 * s.cov_xp + 2.0 * sp.kappa_s - r * s.cov_xp * s.cov_xp,
        s.var_p - s.var_x - r * s.var_x * s.cov_xp,
    )
}

/// Stepper with the covariance propagator precomputed for fixed `(η, κ_s, dt)`.
#[derive(Debug, Clone, Copy)]
pub struct ConditionalStepper {
    flow: VarianceFlow,
    noise_gain: f64,
    dt: f64,
}

impl ConditionalStepper {
    pub fn new(sp: &SimParams) -> Self {
        Self {
            flow: VarianceFlow::new(sp.eta, sp.kappa_s, sp.dt),
            noise_gain: sp.information_rate().sqrt(),
            dt: sp.dt,
        }
    }

    /// One step driven by the Wiener increment `d_w`, with `actuation`
    /// subtracted from the mean drifts.
    pub fn step(&self, s: &GaussianState, d_w: f64, actuation: Actuation) -> Result<GaussianState> {
        let dt = self.dt;
        let (var_x, var_p, cov_xp) = self
            .flow
            .advance(s.var_x, s.var_p, s.cov_xp)
            .ok_or_else(|| Error::IntegratorBlowup("singular covariance propagator".into()))?;
        let next = GaussianState {
            mean_x: s.mean_x + (s.mean_p - actuation.fx) * dt + self.noise_gain * s.var_x * d_w,
            mean_p: s.mean_p + (-s.mean_x - actuation.fp) * dt + self.noise_gain * s.cov_xp * d_w,
            var_x,
            var_p,
            cov_xp,
        };
        next.validate()?;
        Ok(next)
    }

    /// The innovation `√(8ηκ_s)·(dI − ⟨x⟩_est·dt)` that replaces dW in the filter.
    pub fn innovation(&self, est: &GaussianState, inc: &RecordIncrement) -> f64 {
        self.noise_gain * (inc.d_i - est.mean_x * inc.dt)
    }

    pub fn estimate(
        &self,
        est: &GaussianState,
        inc: &RecordIncrement,
        feedback_applied: Actuation,
    ) -> Result<GaussianState> {
        self.step(est, self.innovation(est, inc), feedback_applied)
    }
}

/// One conditional step of the true state. With `feedback`, the state is
/// damped using its own means.
pub fn conditional_step(s: &GaussianState, sp: &SimParams, d_w: f64, feedback: bool) -> Result<GaussianState> {
    let actuation = if feedback {
        Actuation::damping(sp.gamma_s, s)
    } else {
        Actuation::NONE
    };
    ConditionalStepper::new(sp).step(s, d_w, actuation)
}

/// One filter step driven by the measurement record; `feedback_applied` echoes
/// the actuation the controller commanded this step.
pub fn estimator_step(
    est: &GaussianState,
    inc: &RecordIncrement,
    sp: &SimParams,
    feedback_applied: Actuation,
) -> Result<GaussianState> {
    ConditionalStepper::new(sp).estimate(est, inc, feedback_applied)
}
