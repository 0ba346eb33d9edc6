//! Physical parameters and the conversion into simulation units.
//!
//! All dynamics run with ħ = m = ω = 1 and time measured in 1/ω. Lengths are
//! in units of √(ħ/mω) = √2·x₀, so the motional ground state has
//! `Vx = Vp = 1/2`. The normalized ("tilde") variances used in the steady-state
//! analysis are `Ṽ = 2V` in these units.
//!
//! The dimensional measurement strength κ (units 1/(m²·s)) enters as
//! `kappa_s = κ·(ħ/mω)/ω = 2·κx₀²/ω = 2·k̃`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{finite, Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Default integrator step: 10⁻⁴ trap periods, in units of 1/ω.
pub const DEFAULT_DT: f64 = 2.0 * PI * 1e-4;

/// One trap period in simulation time units.
pub const TRAP_PERIOD: f64 = 2.0 * PI;

/// Physical description of the trapped particle and the measurement/feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Particle mass, kg.
    pub mass: f64,
    /// Trap angular frequency ω, rad/s.
    pub omega: f64,
    /// Initial thermal energy scale, K.
    pub temperature: f64,
    /// Quantum efficiency η ∈ [0, 1].
    pub eta: f64,
    /// Normalized measurement strength k̃ = κx₀²/ω.
    pub k_tilde: f64,
    /// Feedback damping rate in units of ω.
    pub gamma_fb: f64,
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        if !(finite("mass", self.mass)? > 0.0) {
            return Err(Error::invalid("mass", "must be > 0"));
        }
        if !(finite("omega", self.omega)? > 0.0) {
            return Err(Error::invalid("omega", "must be > 0"));
        }
        if finite("temperature", self.temperature)? < 0.0 {
            return Err(Error::invalid("temperature", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&finite("eta", self.eta)?) {
            return Err(Error::invalid("eta", "must lie in [0, 1]"));
        }
        if finite("k_tilde", self.k_tilde)? < 0.0 {
            return Err(Error::invalid("k_tilde", "must be >= 0"));
        }
        if finite("gamma_fb", self.gamma_fb)? < 0.0 {
            return Err(Error::invalid("gamma_fb", "must be >= 0"));
        }
        Ok(())
    }

    pub fn ground_state_scale(&self) -> Result<GroundStateScale> {
        self.validate()?;
        Ok(GroundStateScale::new(self.mass, self.omega))
    }
}

/// Nondimensionalized parameter set consumed by every integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Measurement strength in simulation units, `2·k̃`.
    pub kappa_s: f64,
    pub eta: f64,
    /// Feedback damping rate in units of ω.
    pub gamma_s: f64,
    /// Initial thermal occupation.
    pub n_th: f64,
    /// Integrator step in units of 1/ω.
    pub dt: f64,
    /// Total simulated time in units of 1/ω.
    pub duration: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if finite("kappa_s", self.kappa_s)? < 0.0 {
            return Err(Error::invalid("kappa_s", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&finite("eta", self.eta)?) {
            return Err(Error::invalid("eta", "must lie in [0, 1]"));
        }
        if finite("gamma_s", self.gamma_s)? < 0.0 {
            return Err(Error::invalid("gamma_s", "must be >= 0"));
        }
        if finite("n_th", self.n_th)? < 0.0 {
            return Err(Error::invalid("n_th", "must be >= 0"));
        }
        if !(finite("dt", self.dt)? > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        if finite("duration", self.duration)? < self.dt {
            return Err(Error::invalid("duration", "must be >= dt"));
        }
        Ok(())
    }

    /// `8·η·κ_s`, the rate at which measurement information is acquired.
    pub fn information_rate(&self) -> f64 {
        8.0 * self.eta * self.kappa_s
    }

    /// The steady-state parameter χ = 1/(2ηκ_s) = 1/(4ηk̃).
    pub fn chi(&self) -> f64 {
        1.0 / (2.0 * self.eta * self.kappa_s)
    }

    pub fn k_tilde(&self) -> f64 {
        self.kappa_s / 2.0
    }

    /// Number of fixed steps covering `duration`.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Recovers a physical parameter set for the given mass and trap frequency.
    ///
    /// The temperature is chosen so that the Bose occupation reproduces `n_th`.
    pub fn to_trap_params(&self, mass: f64, omega: f64) -> TrapParams {
        let temperature = if self.n_th > 0.0 {
            HBAR * omega / (K_B * (1.0 / self.n_th).ln_1p())
        } else {
            0.0
        };
        TrapParams {
            mass,
            omega,
            temperature,
            eta: self.eta,
            k_tilde: self.k_tilde(),
            gamma_fb: self.gamma_s,
        }
    }
}

/// Ground-state length and momentum scales of the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateScale {
    /// x₀ = √(ħ/2mω), m.
    pub x0: f64,
    /// ħ/2x₀, kg·m/s.
    pub p0: f64,
}

impl GroundStateScale {
    pub fn new(mass: f64, omega: f64) -> Self {
        let x0 = (HBAR / (2.0 * mass * omega)).sqrt();
        Self {
            x0,
            p0: HBAR / (2.0 * x0),
        }
    }

    /// Length unit of the simulation, √(ħ/mω).
    pub fn sim_length(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.x0
    }
}

/// Converts physical parameters into simulation units.
pub fn normalize_params(tp: &TrapParams, dt: f64, duration: f64) -> Result<SimParams> {
    tp.validate()?;
    let sp = SimParams {
        kappa_s: 2.0 * tp.k_tilde,
        eta: tp.eta,
        gamma_s: tp.gamma_fb,
        n_th: thermal_occupation(tp)?,
        dt,
        duration,
    };
    sp.validate()?;
    Ok(sp)
}

/// Bose-Einstein occupation `1/(exp(ħω/k_BT) − 1)` of the trap mode.
pub fn thermal_occupation(tp: &TrapParams) -> Result<f64> {
    if finite("temperature", tp.temperature)? < 0.0 {
        return Err(Error::invalid("temperature", "must be >= 0"));
    }
    if !(finite("omega", tp.omega)? > 0.0) {
        return Err(Error::invalid("omega", "must be > 0"));
    }
    Ok(bose_occupation(tp.temperature, tp.omega))
}

pub(crate) fn bose_occupation(temperature: f64, omega: f64) -> f64 {
    if temperature == 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Phonon reheating rate `k_B·T·γ_th/(ħω)` for a gas at `t_gas` with thermal
/// damping `gamma_th` (1/s). Diagnostic only; it never enters the dynamics.
pub fn thermal_budget(t_gas: f64, gamma_th: f64, omega: f64) -> f64 {
    K_B * t_gas * gamma_th / (HBAR * omega)
}
