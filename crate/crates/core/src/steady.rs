//! Closed-form steady states of the measured, feedback-damped oscillator.
//!
//! Everything here is in tilde units where the ground state has
//! `Ṽx = Ṽp = 1`, i.e. twice the simulation-unit variances.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conditional (filter) steady state for given efficiency and strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSteadyState {
    pub v_x_tilde: f64,
    pub v_p_tilde: f64,
    pub c_xp_tilde: f64,
    /// ξ = √(1 + 4/(ηχ²)).
    pub xi: f64,
    /// χ = 1/(4ηk̃).
    pub chi: f64,
}

/// Steady spread of the conditional means across trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessSteadyState {
    pub v_x_excess: f64,
    pub v_p_excess: f64,
    pub c_xp_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub conditional: ConditionalSteadyState,
    pub excess: ExcessSteadyState,
    pub purity_conditional: f64,
    pub phonon: f64,
    pub eta: f64,
    pub k_tilde: f64,
    pub gamma_fb: f64,
}

fn check_eta_k(eta: f64, k_tilde: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", format!("must lie in (0, 1], got {eta}")));
    }
    if !(k_tilde > 0.0 && k_tilde.is_finite()) {
        return Err(Error::invalid(
            "k_tilde",
            format!("must be finite and > 0, got {k_tilde}"),
        ));
    }
    Ok(())
}

pub fn conditional_steady_state(eta: f64, k_tilde: f64) -> Result<ConditionalSteadyState> {
    check_eta_k(eta, k_tilde)?;
    let chi = 1.0 / (4.0 * eta * k_tilde);
    let xi = (1.0 + 4.0 / (eta * chi * chi)).sqrt();
    let v_x_tilde = (2.0 / eta / (xi + 1.0)).sqrt();
    let v_p_tilde = (2.0 / eta * xi * xi / (xi + 1.0)).sqrt();
    // From the stationarity of Vx: 2C = 8ηκ_s Vx², i.e. C̃ = Ṽx²/χ.
    let c_xp_tilde = v_x_tilde * v_x_tilde / chi;
    Ok(ConditionalSteadyState {
        v_x_tilde,
        v_p_tilde,
        c_xp_tilde,
        xi,
        chi,
    })
}

/// Source terms `(2/χ)·(Ṽx², C̃², ṼxC̃)` feeding the excess moments.
pub fn excess_sources(cond: &ConditionalSteadyState) -> [f64; 3] {
    let g = 2.0 / cond.chi;
    [
        g * cond.v_x_tilde * cond.v_x_tilde,
        g * cond.c_xp_tilde * cond.c_xp_tilde,
        g * cond.v_x_tilde * cond.c_xp_tilde,
    ]
}

/// Right-hand sides of the excess-moment equations (ω = 1).
pub fn excess_rates(exc: &ExcessSteadyState, gamma_fb: f64, sources: &[f64; 3]) -> [f64; 3] {
    let (a, b, c) = (exc.v_x_excess, exc.v_p_excess, exc.c_xp_excess);
    [
        -2.0 * gamma_fb * a + 2.0 * c + sources[0],
        -2.0 * gamma_fb * b - 2.0 * c + sources[1],
        -2.0 * gamma_fb * c - (a - b) + sources[2],
    ]
}

pub fn excess_steady_state(eta: f64, k_tilde: f64, gamma_fb: f64) -> Result<ExcessSteadyState> {
    if !(gamma_fb > 0.0 && gamma_fb.is_finite()) {
        return Err(Error::invalid("gamma_fb", "a steady state needs finite damping > 0"));
    }
    let cond = conditional_steady_state(eta, k_tilde)?;
    let s = excess_sources(&cond);
    let g2 = 2.0 * gamma_fb;
    #[rustfmt::skip]
    let system = Matrix3::new(
        -g2, 0.0, 2.0,
        0.0, -g2, -2.0,
        -1.0, 1.0, -g2,
    );
    let solution = system
        .lu()
        .solve(&-Vector3::from(s))
        .ok_or(Error::SingularSystem("excess steady state"))?;
    Ok(ExcessSteadyState {
        v_x_excess: solution[0],
        v_p_excess: solution[1],
        c_xp_excess: solution[2],
    })
}

/// Purity `Tr ρ² = 1/√(ṼxṼp − C̃²)` of a Gaussian state.
pub fn purity(v_x_tilde: f64, v_p_tilde: f64, c_xp_tilde: f64) -> Result<f64> {
    let det = v_x_tilde * v_p_tilde - c_xp_tilde * c_xp_tilde;
    if !(det >= 1.0 - 1e-12) {
        return Err(Error::invalid(
            "variances",
            format!("violate the uncertainty bound: VxVp - C^2 = {det}"),
        ));
    }
    Ok(1.0 / det.sqrt())
}

/// Mean phonon number from the total (conditional + excess) second moments.
///
/// With `⟨x²⟩ = Ṽ_total/2` in ground-state units, `⟨n⟩ = ⟨x²⟩/2 + ⟨p²⟩/2 − 1/2`.
pub fn phonon_number(cond: &ConditionalSteadyState, exc: &ExcessSteadyState) -> f64 {
    (cond.v_x_tilde + exc.v_x_excess) / 4.0 + (cond.v_p_tilde + exc.v_p_excess) / 4.0 - 0.5
}

pub fn steady_state_report(eta: f64, k_tilde: f64, gamma_fb: f64) -> Result<SteadyStateReport> {
    let conditional = conditional_steady_state(eta, k_tilde)?;
    let excess = excess_steady_state(eta, k_tilde, gamma_fb)?;
    Ok(SteadyStateReport {
        conditional,
        excess,
        purity_conditional: purity(conditional.v_x_tilde, conditional.v_p_tilde, conditional.c_xp_tilde)?,
        phonon: phonon_number(&conditional, &excess),
        eta,
        k_tilde,
        gamma_fb,
    })
}

/// Evaluates the steady-state pipeline over `eta_list × k_tilde_grid`,
/// eta-major, in the order given.
pub fn cooling_landscape(eta_list: &[f64], k_tilde_grid: &[f64], gamma_fb: f64) -> Result<Vec<SteadyStateReport>> {
    let mut table = Vec::with_capacity(eta_list.len() * k_tilde_grid.len());
    for &eta in eta_list {
        for &k_tilde in k_tilde_grid {
            let report = steady_state_report(eta, k_tilde, gamma_fb).map_err(|e| Error::AtGridPoint {
                eta,
                k_tilde,
                source: Box::new(e),
            })?;
            table.push(report);
        }
    }
    Ok(table)
}

/// `n` points log-spaced from `lo` to `hi` inclusive. Interior decades land
/// exactly on powers of ten when they fall on a grid node.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let e = a + (b - a) * i as f64 / (n - 1) as f64;
                let rounded = e.round();
                if (e - rounded).abs() < 1e-12 {
                    10f64.powi(rounded as i32)
                } else {
                    10f64.powf(e)
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weak_measurement_limit_is_minimum_uncertainty() {
        let s = conditional_steady_state(1.0, 1e-9).unwrap();
        assert_relative_eq!(s.v_x_tilde, 1.0, epsilon = 1e-6);
        assert_relative_eq!(s.v_p_tilde, 1.0, epsilon = 1e-6);
        assert!(s.c_xp_tilde.abs() < 1e-6);
        assert!((s.xi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_point() {
        let s = conditional_steady_state(0.2, 1.0).unwrap();
        assert_relative_eq!(s.chi, 1.25, max_relative = 1e-15);
        assert!((s.xi - 3.715).abs() < 1e-3);
        assert!((s.v_x_tilde - 1.456).abs() < 1e-3);
        assert!((s.v_p_tilde - 5.410).abs() < 1e-3);
    }

    #[test]
    fn domain_errors() {
        assert!(conditional_steady_state(0.0, 1.0).is_err());
        assert!(conditional_steady_state(1.1, 1.0).is_err());
        assert!(conditional_steady_state(0.5, 0.0).is_err());
        assert!(excess_steady_state(0.5, 1.0, 0.0).is_err());
        assert!(purity(0.5, 1.0, 0.0).is_err());
    }

    fn integrate_excess(eta: f64, k: f64, gamma: f64) -> ExcessSteadyState {
        // RK4 from zero excess for 40/Γ + 40 time units, an independent route
        // to the stationary point.
        let s = excess_sources(&conditional_steady_state(eta, k).unwrap());
        let h = 0.2 / gamma.max(1.0);
        let steps = ((40.0 / gamma + 40.0) / h) as usize;
        let mut v = [0.0f64; 3];
        let f = |v: [f64; 3]| {
            excess_rates(
                &ExcessSteadyState {
                    v_x_excess: v[0],
                    v_p_excess: v[1],
                    c_xp_excess: v[2],
                },
                gamma,
                &s,
            )
        };
        for _ in 0..steps {
            let k1 = f(v);
            let k2 = f(std::array::from_fn(|i| v[i] + 0.5 * h * k1[i]));
            let k3 = f(std::array::from_fn(|i| v[i] + 0.5 * h * k2[i]));
            let k4 = f(std::array::from_fn(|i| v[i] + h * k3[i]));
            for i in 0..3 {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        ExcessSteadyState {
            v_x_excess: v[0],
            v_p_excess: v[1],
            c_xp_excess: v[2],
        }
    }

    #[test]
    fn excess_matches_ode_integration() {
        for (eta, k, gamma) in [(0.1, 1.0, 10.0), (0.5, 0.1, 1.0), (1.0, 10.0, 3.0), (0.05, 0.3, 0.5)] {
            let lin = excess_steady_state(eta, k, gamma).unwrap();
            let ode = integrate_excess(eta, k, gamma);
            assert!((lin.v_x_excess - ode.v_x_excess).abs() < 1e-8, "{lin:?} {ode:?}");
            assert!((lin.v_p_excess - ode.v_p_excess).abs() < 1e-8);
            assert!((lin.c_xp_excess - ode.c_xp_excess).abs() < 1e-8);
        }
    }

    #[test]
    fn infinitely_fast_damping_removes_excess() {
        let e = excess_steady_state(0.2, 1.0, 1e6).unwrap();
        assert!(e.v_x_excess.abs() <= 1e-5 && e.v_p_excess.abs() <= 1e-5 && e.c_xp_excess.abs() <= 1e-5);
    }

    #[test]
    fn excess_trace_closed_form() {
        // Summing the Vx and Vp equations gives ṼxE + ṼpE = (s_x + s_p)/(2Γ).
        for (eta, k, gamma) in [(0.2, 1.0, 10.0), (0.2, 1.0, 100.0), (0.7, 0.05, 2.0)] {
            let s = excess_sources(&conditional_steady_state(eta, k).unwrap());
            let e = excess_steady_state(eta, k, gamma).unwrap();
            assert_relative_eq!(
                e.v_x_excess + e.v_p_excess,
                (s[0] + s[1]) / (2.0 * gamma),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn purity_values() {
        assert_eq!(purity(1.0, 1.0, 0.0).unwrap(), 1.0);
        for (eta, k) in [(0.2, 1.0), (0.9, 1e-3), (0.01, 500.0)] {
            let s = conditional_steady_state(eta, k).unwrap();
            let p = purity(s.v_x_tilde, s.v_p_tilde, s.c_xp_tilde).unwrap();
            assert!((p - eta.sqrt()).abs() < 1e-9);
        }
        let r = steady_state_report(0.2, 1.0, 10.0).unwrap();
        assert!((r.purity_conditional - 0.447).abs() < 1e-3);
    }

    #[test]
    fn phonon_values() {
        let ground = ConditionalSteadyState {
            v_x_tilde: 1.0,
            v_p_tilde: 1.0,
            c_xp_tilde: 0.0,
            xi: 1.0,
            chi: f64::INFINITY,
        };
        let zero = ExcessSteadyState {
            v_x_excess: 0.0,
            v_p_excess: 0.0,
            c_xp_excess: 0.0,
        };
        assert_eq!(phonon_number(&ground, &zero), 0.0);
        assert!(steady_state_report(0.2, 1.0, 10.0).unwrap().phonon < 3.0);
        assert!(steady_state_report(1.0, 0.01, 10.0).unwrap().phonon < 0.05);
    }

    #[test]
    fn stronger_damping_has_diminishing_return() {
        let n10 = steady_state_report(0.2, 1.0, 10.0).unwrap().phonon;
        let n100 = steady_state_report(0.2, 1.0, 100.0).unwrap().phonon;
        // Independent closed form: the excess contributes (s_x + s_p)/(8Γ) phonons.
        let s = excess_sources(&conditional_steady_state(0.2, 1.0).unwrap());
        assert_relative_eq!(n10 - n100, (s[0] + s[1]) / 8.0 * (0.1 - 0.01), max_relative = 1e-10);
        let rel = (n10 - n100) / n10;
        assert!((rel - 0.06836).abs() < 1e-4, "relative change {rel}");
    }

    #[test]
    fn landscape_order_and_single_point() {
        let one = cooling_landscape(&[0.2], &[1.0], 10.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], steady_state_report(0.2, 1.0, 10.0).unwrap());

        let etas = [0.05, 0.1, 0.2, 0.5, 1.0];
        let ks = log_grid(0.1, 10.0, 21);
        let table = cooling_landscape(&etas, &ks, 10.0).unwrap();
        assert_eq!(table.len(), etas.len() * ks.len());
        for (i, k) in ks.iter().enumerate() {
            for w in etas.windows(2).enumerate() {
                let lo = &table[w.0 * ks.len() + i];
                let hi = &table[(w.0 + 1) * ks.len() + i];
                assert_eq!(lo.k_tilde, *k);
                assert!(hi.phonon < lo.phonon, "eta {} vs {} at k {k}", w.1[0], w.1[1]);
            }
        }
        let err = cooling_landscape(&[0.2, 0.0], &[1.0], 10.0).unwrap_err();
        assert!(matches!(err, Error::AtGridPoint { eta, .. } if eta == 0.0));
    }

    #[test]
    fn monotone_in_eta_and_gamma() {
        for k in log_grid(1e-3, 1e3, 13) {
            let mut last = f64::INFINITY;
            for i in 1..=20 {
                let n = steady_state_report(i as f64 / 20.0, k, 10.0).unwrap().phonon;
                assert!(n <= last + 1e-12);
                last = n;
            }
            let mut last = f64::INFINITY;
            for g in log_grid(0.1, 1e4, 12) {
                let n = steady_state_report(0.3, k, g).unwrap().phonon;
                assert!(n <= last + 1e-12);
                last = n;
            }
        }
    }

    #[test]
    fn squeezing_onset() {
        assert!(conditional_steady_state(1.0, 10.0).unwrap().v_x_tilde < 1.0);
        assert!((conditional_steady_state(1.0, 0.01).unwrap().v_x_tilde - 1.0).abs() < 1e-3);
    }

    #[test]
    fn purity_independent_of_strength() {
        for eta in [0.05, 0.3, 1.0] {
            let ps: Vec<f64> = log_grid(1e-3, 1e3, 20)
                .into_iter()
                .map(|k| {
                    let s = conditional_steady_state(eta, k).unwrap();
                    purity(s.v_x_tilde, s.v_p_tilde, s.c_xp_tilde).unwrap()
                })
                .collect();
            let spread = ps.iter().cloned().fold(f64::MIN, f64::max) - ps.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-9);
        }
    }

    #[test]
    fn fig4_dashed_curve_shape() {
        let ks = log_grid(1e-2, 1e2, 41);
        let vx: Vec<f64> = ks
            .iter()
            .map(|&k| conditional_steady_state(0.15, k).unwrap().v_x_tilde)
            .collect();
        let vp: Vec<f64> = ks
            .iter()
            .map(|&k| conditional_steady_state(0.15, k).unwrap().v_p_tilde)
            .collect();
        assert!(vx.windows(2).all(|w| w[1] < w[0]));
        assert!(vp.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn log_grid_hits_decades() {
        let g = log_grid(0.1, 10.0, 41);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[20], 1.0);
        assert_eq!(g[40], 10.0);
        assert_eq!(log_grid(1e-2, 1e2, 81)[0], 1e-2);
    }
}
