//! Exact fixed-step propagation of the conditional covariance.
//!
//! The second moments obey the matrix Riccati equation
//! `Σ' = AΣ + ΣAᵀ + D − ΣBΣ` with `A = [[0, 1], [−1, 0]]`, `D = diag(0, 2κ)`
//! and `B = diag(8ηκ, 0)`. Writing `Σ = Y X⁻¹` linearizes it:
//! `[X; Y]' = [[−Aᵀ, B], [D, A]]·[X; Y]`. One step therefore costs a 2×2 solve
//! against the precomputed 4×4 propagator, is exact up to round-off for any
//! step size, and keeps `VxVp − C² ≥ 1/4` for pure-state flows.

use nalgebra::{Matrix2, Matrix4};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceFlow {
    phi_xx: Matrix2<f64>,
    phi_xy: Matrix2<f64>,
    phi_yx: Matrix2<f64>,
    phi_yy: Matrix2<f64>,
}

impl VarianceFlow {
    pub fn new(eta: f64, kappa_s: f64, dt: f64) -> Self {
        let b = 8.0 * eta * kappa_s;
        let d = 2.0 * kappa_s;
        // Rows/cols ordered (X_x, X_p, Y_x, Y_p); −Aᵀ = [[0, 1], [−1, 0]].
        #[rustfmt::skip]
        let generator = Matrix4::new(
            0.0, 1.0, b,   0.0,
            -1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, d,   -1.0, 0.0,
        );
        let phi = (generator * dt).exp();
        Self {
            phi_xx: phi.fixed_view::<2, 2>(0, 0).into_owned(),
            phi_xy: phi.fixed_view::<2, 2>(0, 2).into_owned(),
            phi_yx: phi.fixed_view::<2, 2>(2, 0).into_owned(),
            phi_yy: phi.fixed_view::<2, 2>(2, 2).into_owned(),
        }
    }

    /// Advances `(Vx, Vp, Cxp)` by one step. Returns `None` if the step is
    /// numerically singular.
    pub fn advance(&self, var_x: f64, var_p: f64, cov_xp: f64) -> Option<(f64, f64, f64)> {
        let sigma = Matrix2::new(var_x, cov_xp, cov_xp, var_p);
        let x = self.phi_xx + self.phi_xy * sigma;
        let y = self.phi_yx + self.phi_yy * sigma;
        // Σ' = Y X⁻¹, computed as (X⁻ᵀ Yᵀ)ᵀ.
        let next = x.transpose().lu().solve(&y.transpose())?.transpose();
        let c = 0.5 * (next[(0, 1)] + next[(1, 0)]);
        Some((next[(0, 0)], next[(1, 1)], c))
    }
}
