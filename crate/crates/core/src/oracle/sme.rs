use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fock::{DensityState, FockOperators};
use crate::error::{Error, Result};
use crate::params::SimParams;

/// Population allowed in the top three Fock levels after a step.
pub const TRUNCATION_THRESHOLD: f64 = 1e-4;
/// Most negative eigenvalue tolerated after a step.
pub const POSITIVITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmeScheme {
    EulerMaruyama,
    /// Euler–Maruyama plus the diagonal-noise Milstein correction
    /// `½·H[x](H[x]ρ)·(dW² − dt)`.
    Milstein,
    /// Completely positive first-order map `ρ ∝ MρM + (1 − η)·dt·LρL` with
    /// `L = √(2κ_s)·x`, `M = 1 − ½L²dt + √η·L·dy + ½η·L²(dy² − dt)` and
    /// `dy = dW + 2√η·⟨L⟩dt`.
    #[default]
    Kraus,
}

fn real(a: f64) -> Complex64 {
    Complex64::new(a, 0.0)
}

/// Fixed-step integrator of
/// `dρ = −i[H, ρ]dt + 2κ_s·D[x]ρ·dt + √(2ηκ_s)·H[x]ρ·dW`, `H = (x² + p²)/2`.
///
/// The Hamiltonian part is applied exactly as the diagonal rotation
/// `e^{−i(n + ½)dt}` after the measurement increment.
#[derive(Debug, Clone)]
pub struct SmeIntegrator<'a> {
    ops: &'a FockOperators,
    kappa_s: f64,
    eta: f64,
    gain: f64,
    dt: f64,
    scheme: SmeScheme,
    rotation: DMatrix<Complex64>,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Trace change before renormalization. O(dt^1.5) for the explicit
    /// schemes; the Kraus map is unnormalized and drifts at O(√dt).
    pub trace_drift: f64,
    pub top_population: f64,
}

impl<'a> SmeIntegrator<'a> {
    pub fn new(ops: &'a FockOperators, sp: &SimParams, scheme: SmeScheme) -> Result<Self> {
        sp.validate()?;
        let n = ops.dim;
        let rotation = DMatrix::from_fn(n, n, |m, k| {
            Complex64::from_polar(1.0, -((m as f64) - (k as f64)) * sp.dt)
        });
        Ok(Self {
            ops,
            kappa_s: sp.kappa_s,
            eta: sp.eta,
            gain: (2.0 * sp.eta * sp.kappa_s).sqrt(),
            dt: sp.dt,
            scheme,
            rotation,
        })
    }

    /// `H[x]m = xm + mx − 2⟨x⟩m` for Hermitian `m`, without the gain.
    fn innovation_map(&self, m: &DMatrix<Complex64>, mean_x: f64) -> DMatrix<Complex64> {
        let xm = self.ops.x_left(m);
        let mx = xm.adjoint();
        xm + mx - m * real(2.0 * mean_x)
    }

    fn explicit_update(&self, rho: &DMatrix<Complex64>, mean_x: f64, d_w: f64) -> DMatrix<Complex64> {
        let ops = self.ops;
        let xr = ops.x_left(rho);
        let rx = xr.adjoint();
        let xrx = ops.x_left(&rx);
        let xxr = ops.x_left(&xr);
        let rxx = xxr.adjoint();
        let dissipator = xrx - (xxr + rxx) * real(0.5);

        let mut next = rho + dissipator * real(2.0 * self.kappa_s * self.dt);
        if self.gain > 0.0 {
            let b = self.innovation_map(rho, mean_x) * real(self.gain);
            if self.scheme == SmeScheme::Milstein {
                let tr_xb = ops.trace_x(&b);
                let hb = (self.innovation_map(&b, mean_x) - rho * real(2.0 * tr_xb)) * real(self.gain);
                next += hb * real(0.5 * (d_w * d_w - self.dt));
            }
            next += b * real(d_w);
        }
        next
    }

    fn kraus_update(&self, rho: &DMatrix<Complex64>, mean_x: f64, d_w: f64) -> DMatrix<Complex64> {
        let ops = self.ops;
        let dt = self.dt;
        let l2 = 2.0 * self.kappa_s;
        // √η·L·dy with L = √(2κ)x equals gain·x·dy.
        let dy = d_w + 2.0 * self.gain * mean_x * dt;
        let c1 = self.gain * dy;
        let c2 = -0.5 * l2 * dt + 0.5 * self.gain * self.gain * (dy * dy - dt);
        // M = 1 + c1·x + c2·x², real and Hermitian.
        let apply_m = |m: &DMatrix<Complex64>| {
            let xm = ops.x_left(m);
            let xxm = ops.x_left(&xm);
            m + xm * real(c1) + xxm * real(c2)
        };
        let m_rho = apply_m(rho);
        let mut next = apply_m(&m_rho.adjoint());
        let unread = (1.0 - self.eta) * l2 * dt;
        if unread > 0.0 {
            let xr = ops.x_left(rho);
            next += ops.x_left(&xr.adjoint()) * real(unread);
        }
        next
    }

    pub fn step(&self, ds: &DensityState, d_w: f64) -> Result<(DensityState, StepReport)> {
        let rho = &ds.rho;
        let trace_before = ds.trace();
        let mean_x = self.ops.trace_x(rho) / trace_before;

        let mut next = match self.scheme {
            SmeScheme::Kraus => self.kraus_update(rho, mean_x, d_w),
            SmeScheme::EulerMaruyama | SmeScheme::Milstein => self.explicit_update(rho, mean_x, d_w),
        };
        let trace_drift = next.trace().re - trace_before;

        next.component_mul_assign(&self.rotation);
        let hermitian = (&next + next.adjoint()) * real(0.5);
        let trace = hermitian.trace().re;
        if !(trace.is_finite() && trace > 0.0) {
            return Err(Error::IntegratorBlowup(format!("density matrix trace became {trace}")));
        }
        let out = DensityState {
            rho: hermitian * real(1.0 / trace),
        };

        let top_population = out.top_population(3);
        if top_population > TRUNCATION_THRESHOLD {
            return Err(Error::TruncationLeak {
                population: top_population,
                threshold: TRUNCATION_THRESHOLD,
            });
        }
        if !out.is_positive_within(POSITIVITY_THRESHOLD) {
            return Err(Error::PositivityLoss {
                threshold: -POSITIVITY_THRESHOLD,
            });
        }
        Ok((
            out,
            StepReport {
                trace_drift,
                top_population,
            },
        ))
    }
}

/// One step of the conditioned master equation with the default scheme.
pub fn sme_step(ds: &DensityState, ops: &FockOperators, sp: &SimParams, d_w: f64) -> Result<DensityState> {
    SmeIntegrator::new(ops, sp, SmeScheme::default())?
        .step(ds, d_w)
        .map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Actuation, ConditionalStepper, GaussianState};
    use crate::oracle::build_operators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::FRAC_PI_2;

    fn params(kappa_s: f64, eta: f64, dt: f64) -> SimParams {
        SimParams {
            kappa_s,
            eta,
            gamma_s: 0.0,
            n_th: 0.0,
            dt,
            duration: 1.0,
        }
    }

    fn fidelity_pure(a: &DensityState, b: &DensityState) -> f64 {
        // For pure states Tr(ρσ) is the fidelity.
        (&a.rho * &b.rho).trace().re
    }

    #[test]
    fn free_evolution_is_rigid_rotation() {
        let dim = 40;
        let ops = build_operators(dim).unwrap();
        let n = 2000;
        let sp = params(0.0, 0.0, FRAC_PI_2 / n as f64);
        let integ = SmeIntegrator::new(&ops, &sp, SmeScheme::Milstein).unwrap();
        let mut s = DensityState::coherent(dim, 1.5, 0.5);
        for _ in 0..n {
            s = integ.step(&s, 0.0).unwrap().0;
        }
        // A quarter period maps (x, p) → (p, −x).
        let expected = DensityState::coherent(dim, 0.5, -1.5);
        assert!(1.0 - fidelity_pure(&s, &expected) < 1e-6);
    }

    #[test]
    fn one_step_matches_moment_equations() {
        let dim = 40;
        let ops = build_operators(dim).unwrap();
        let dt = 1e-4;
        let sp = params(0.7, 0.6, dt);
        let start = DensityState::coherent(dim, 0.8, -0.4);
        let g0 = start.moments(&ops);
        let stepper = ConditionalStepper::new(&sp);
        for &d_w in &[0.0, dt.sqrt(), -2.0 * dt.sqrt()] {
            let f1 = sme_step(&start, &ops, &sp, d_w).unwrap().moments(&ops);
            let g1 = stepper.step(&g0, d_w, Actuation::NONE).unwrap();
            let budget = 10.0 * dt.powf(1.5);
            assert!(
                (f1.mean_x - g1.mean_x).abs() < budget,
                "x: {} vs {}",
                f1.mean_x,
                g1.mean_x
            );
            assert!((f1.mean_p - g1.mean_p).abs() < budget);
            assert!((f1.var_x - g1.var_x).abs() < budget, "Vx: {} vs {}", f1.var_x, g1.var_x);
            assert!((f1.var_p - g1.var_p).abs() < budget);
            assert!((f1.cov_xp - g1.cov_xp).abs() < budget);
        }
    }

    #[test]
    fn moment_increments_carry_the_expected_coefficients() {
        // dVp = 2κ dt at a coherent state with no measurement record;
        // d⟨x⟩ = √(8ηκ)·Vx·dW from the record.
        let dim = 30;
        let ops = build_operators(dim).unwrap();
        let dt = 1e-6;
        let kappa = 0.5;
        let s0 = DensityState::coherent(dim, 0.0, 0.0);
        let dvp = sme_step(&s0, &ops, &params(kappa, 0.0, dt), 0.0)
            .unwrap()
            .moments(&ops)
            .var_p
            - 0.5;
        assert!((dvp / dt - 2.0 * kappa).abs() < 1e-4);
        let d_w = 1e-3;
        let eta = 1.0;
        let dx = sme_step(&s0, &ops, &params(kappa, eta, dt), d_w)
            .unwrap()
            .moments(&ops)
            .mean_x;
        assert!((dx / d_w - (8.0 * eta * kappa).sqrt() * 0.5).abs() < 1e-3);
    }

    #[test]
    fn unconditioned_map_loses_purity_monotonically() {
        let dim = 30;
        let ops = build_operators(dim).unwrap();
        let sp = params(0.2, 0.0, 1e-3);
        let integ = SmeIntegrator::new(&ops, &sp, SmeScheme::Milstein).unwrap();
        let mut s = DensityState::coherent(dim, 1.0, 0.0);
        let mut last = s.purity();
        for _ in 0..1000 {
            let (next, report) = integ.step(&s, 0.0).unwrap();
            assert!(report.trace_drift.abs() < 1e-12);
            assert!((next.trace() - 1.0).abs() < 1e-12);
            let p = next.purity();
            assert!(p <= last + 1e-14);
            last = p;
            s = next;
        }
        assert!(last < 0.99);
    }

    #[test]
    fn conditioned_run_keeps_density_matrix_valid() {
        let dim = 30;
        let ops = build_operators(dim).unwrap();
        let dt = 1e-3;
        let sp = params(0.2, 1.0, dt);
        let integ = SmeIntegrator::new(&ops, &sp, SmeScheme::Kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = DensityState::coherent(dim, 0.0, 0.0);
        for _ in 0..1000 {
            let z: f64 = rng.sample(StandardNormal);
            s = integ.step(&s, z * dt.sqrt()).unwrap().0;
            let m = s.moments(&ops);
            assert!(m.uncertainty_product() >= 0.25 - 1e-9);
            assert!(s.min_eigenvalue() > -1e-12);
            assert!(s.third_central_moment_x(&ops).abs() < 1e-3);
        }
        s.validate().unwrap();
        // η = 1 keeps the state pure.
        assert!(s.purity() > 1.0 - 1e-9);
    }

    #[test]
    fn explicit_schemes_conserve_trace_before_renormalization() {
        let dim = 30;
        let ops = build_operators(dim).unwrap();
        let dt = 1e-4;
        let sp = params(0.2, 0.5, dt);
        let s = DensityState::coherent(dim, 0.7, 0.2);
        for scheme in [SmeScheme::EulerMaruyama, SmeScheme::Milstein] {
            let integ = SmeIntegrator::new(&ops, &sp, scheme).unwrap();
            let (_, report) = integ.step(&s, 0.8 * dt.sqrt()).unwrap();
            assert!(report.trace_drift.abs() < 1e-12, "{scheme:?}: {}", report.trace_drift);
        }
    }

    #[test]
    fn schemes_agree_to_first_order() {
        let dim = 30;
        let ops = build_operators(dim).unwrap();
        let dt = 1e-5;
        let sp = params(0.4, 0.7, dt);
        let s = DensityState::coherent(dim, 0.5, -0.3);
        let d_w = -1.3 * dt.sqrt();
        let a = SmeIntegrator::new(&ops, &sp, SmeScheme::Kraus)
            .unwrap()
            .step(&s, d_w)
            .unwrap()
            .0;
        let b = SmeIntegrator::new(&ops, &sp, SmeScheme::Milstein)
            .unwrap()
            .step(&s, d_w)
            .unwrap()
            .0;
        let diff = (&a.rho - &b.rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 10.0 * dt.powf(1.5), "{diff}");
    }

    #[test]
    fn truncation_leak_is_reported() {
        let dim = 8;
        let ops = build_operators(dim).unwrap();
        let s = DensityState::coherent(dim, 2.0, 0.0);
        let err = sme_step(&s, &ops, &params(0.0, 0.0, 1e-3), 0.0).unwrap_err();
        assert!(matches!(err, Error::TruncationLeak { .. }));
    }

    #[test]
    fn ground_state_is_gaussian() {
        let ops = build_operators(16).unwrap();
        let g = GaussianState::ground();
        let m = DensityState::coherent(16, 0.0, 0.0).moments(&ops);
        assert!((m.var_x - g.var_x).abs() < 1e-15);
    }
}
