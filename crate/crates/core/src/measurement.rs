//! Optical probe model: measurement strength, photocurrent synthesis and
//! resolution diagnostics.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::params::SimParams;

/// Probe light scattering into the mirror standing-wave mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalProbe {
    /// Scattering rate into the mirror mode, 1/s.
    pub gamma: f64,
    /// Probe wavenumber, 1/m.
    pub k_l: f64,
    /// Trap-centre phase k_L·L in the standing wave, rad.
    pub mirror_distance_phase: f64,
}

impl OpticalProbe {
    pub fn new(gamma: f64, k_l: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", "must be finite and >= 0"));
        }
        if !(k_l.is_finite() && k_l > 0.0) {
            return Err(Error::invalid("k_l", "must be finite and > 0"));
        }
        Ok(Self {
            gamma,
            k_l,
            mirror_distance_phase: FRAC_PI_4,
        })
    }
}

/// One step of the (elastic-subtracted, renormalized) photocurrent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordIncrement {
    #[serde(rename = "dI")]
    pub d_i: f64,
    pub dt: f64,
    /// The Wiener increment that generated this record step.
    #[serde(rename = "dW_used")]
    pub d_w_used: f64,
}

/// κ = γ·k_L²/2, units 1/(m²·s).
pub fn kappa_from_probe(probe: &OpticalProbe) -> f64 {
    probe.gamma * probe.k_l * probe.k_l / 2.0
}

/// Deterministic mirror-mode detection rate `γ/2 + γ·k_L·⟨x⟩` (1/s).
pub fn photon_rate(probe: &OpticalProbe, mean_x: f64) -> Result<f64> {
    let kx = probe.k_l * mean_x;
    if !(kx.abs() < LAMB_DICKE_PASS) {
        return Err(Error::LambDickeViolation { kx });
    }
    Ok(probe.gamma / 2.0 + probe.gamma * kx)
}

/// Forms `dI = ⟨x⟩dt + dW/√(8ηκ_s)` from the true conditional mean and the
/// Wiener increment that drove it this step.
pub fn generate_record_increment(true_mean_x: f64, sp: &SimParams, d_w: f64) -> Result<RecordIncrement> {
    let rate = sp.information_rate();
    if !(rate > 0.0) {
        return Err(Error::MeasurementOff);
    }
    Ok(RecordIncrement {
        d_i: true_mean_x * sp.dt + d_w / rate.sqrt(),
        dt: sp.dt,
        d_w_used: d_w,
    })
}

/// Best position resolution `1/√(8·Δt·η·κ_s)` after integrating the record
/// for `delta_t` (simulation units; `delta_t = 1` is one inverse trap frequency).
pub fn resolution(delta_t: f64, eta: f64, kappa_s: f64) -> f64 {
    1.0 / (8.0 * delta_t * eta * kappa_s).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionGeometry {
    /// Camera imaging the motion in the plane perpendicular to the collected light.
    ImagingPerpendicular,
    /// Light collected along the measured axis (mirror mode).
    MirrorAxial,
}

const SIMPSON_INTERVALS: usize = 2048;

/// Fraction of the x-axis recoil witnessed by a detector that collects a
/// fraction `collection_efficiency` of the scattering directions.
///
/// Directions are parameterized by the angle θ from the measured axis. Each
/// direction carries emission weight (3/4)|cos θ| and imparts x-recoil weight
/// cos²θ. The detector aperture is a window of half-width π·efficiency centred
/// on θ = 0 (axial) or θ = π/2 (imaging). The result is the collected x-recoil
/// over the total emitted recoil.
pub fn recoil_fraction(collection_efficiency: f64, geometry: DetectionGeometry) -> Result<f64> {
    if !(0.0..=1.0).contains(&collection_efficiency) {
        return Err(Error::invalid("collection_efficiency", "must lie in [0, 1]"));
    }
    let emission = |theta: f64| 0.75 * theta.cos().abs();
    let x_recoil = |theta: f64| emission(theta) * theta.cos().powi(2);
    let centre = match geometry {
        DetectionGeometry::MirrorAxial => 0.0,
        DetectionGeometry::ImagingPerpendicular => FRAC_PI_2,
    };
    let half_width = PI * collection_efficiency;
    // Integrate on the piecewise-smooth pieces split at the kinks of |cos θ|.
    let total = simpson(emission, -FRAC_PI_2, FRAC_PI_2) * 2.0;
    let detected = integrate_split(x_recoil, centre - half_width, centre + half_width);
    Ok(detected / total)
}

fn integrate_split(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> f64 {
    // Kinks of |cos θ| at odd multiples of π/2.
    let mut knots = vec![a];
    let first = ((a - FRAC_PI_2) / PI).ceil() as i64;
    let last = ((b - FRAC_PI_2) / PI).floor() as i64;
    for k in first..=last {
        let kink = FRAC_PI_2 + k as f64 * PI;
        if kink > a && kink < b {
            knots.push(kink);
        }
    }
    knots.push(b);
    knots.windows(2).map(|w| simpson(f, w[0], w[1])).sum()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = SIMPSON_INTERVALS;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

const LAMB_DICKE_PASS: f64 = 0.1;
const LAMB_DICKE_WARN: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambDicke {
    Pass,
    Warn,
    Fail,
}

/// Classifies the linearized standing-wave coupling for motion of rms size `rms_x` (m).
pub fn lamb_dicke_check(k_l: f64, rms_x: f64) -> LambDicke {
    let kx = (k_l * rms_x).abs();
    if kx < LAMB_DICKE_PASS {
        LambDicke::Pass
    } else if kx < LAMB_DICKE_WARN {
        LambDicke::Warn
    } else {
        LambDicke::Fail
    }
}
