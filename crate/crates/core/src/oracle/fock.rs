use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::dynamics::GaussianState;
use crate::error::{Error, Result};

pub const MIN_DIM: usize = 4;
pub const MAX_DIM: usize = 128;

/// Position and momentum on the truncated Fock basis, simulation units.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    pub dim: usize,
    pub x_op: DMatrix<Complex64>,
    pub p_op: DMatrix<Complex64>,
    pub x_sq_op: DMatrix<Complex64>,
    /// `x_op[(n, n + 1)]`; x is real symmetric tridiagonal.
    x_band: Vec<f64>,
}

/// `x = (a + a†)/√2`, `p = −i(a − a†)/√2`.
pub fn build_operators(dim: usize) -> Result<FockOperators> {
    if !(MIN_DIM..=MAX_DIM).contains(&dim) {
        return Err(Error::invalid(
            "dim",
            format!("must lie in [{MIN_DIM}, {MAX_DIM}], got {dim}"),
        ));
    }
    let x_band: Vec<f64> = (0..dim - 1).map(|n| ((n + 1) as f64).sqrt() * FRAC_1_SQRT_2).collect();
    let mut x_op = DMatrix::zeros(dim, dim);
    let mut p_op = DMatrix::zeros(dim, dim);
    for (n, &b) in x_band.iter().enumerate() {
        x_op[(n, n + 1)] = Complex64::new(b, 0.0);
        x_op[(n + 1, n)] = Complex64::new(b, 0.0);
        // a[n, n+1] = √(n+1): p[n, n+1] = −i·b, p[n+1, n] = +i·b.
        p_op[(n, n + 1)] = Complex64::new(0.0, -b);
        p_op[(n + 1, n)] = Complex64::new(0.0, b);
    }
    let x_sq_op = &x_op * &x_op;
    Ok(FockOperators {
        dim,
        x_op,
        p_op,
        x_sq_op,
        x_band,
    })
}

impl FockOperators {
    /// `x·m` using the tridiagonal structure of x.
    pub(crate) fn x_left(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                if i > 0 {
                    acc += m[(i - 1, j)] * self.x_band[i - 1];
                }
                if i + 1 < n {
                    acc += m[(i + 1, j)] * self.x_band[i];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `p·m` using the tridiagonal structure of p.
    pub(crate) fn p_left(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                if i > 0 {
                    acc += m[(i - 1, j)] * Complex64::new(0.0, self.x_band[i - 1]);
                }
                if i + 1 < n {
                    acc += m[(i + 1, j)] * Complex64::new(0.0, -self.x_band[i]);
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `Re Tr(p·m)`.
    pub(crate) fn trace_p(&self, m: &DMatrix<Complex64>) -> f64 {
        self.x_band
            .iter()
            .enumerate()
            .map(|(i, &b)| (Complex64::new(0.0, -b) * m[(i + 1, i)] + Complex64::new(0.0, b) * m[(i, i + 1)]).re)
            .sum()
    }

    /// `Re Tr(x·m)`.
    pub(crate) fn trace_x(&self, m: &DMatrix<Complex64>) -> f64 {
        self.x_band
            .iter()
            .enumerate()
            .map(|(i, &b)| b * (m[(i + 1, i)].re + m[(i, i + 1)].re))
            .sum()
    }
}

/// Density matrix on the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: DMatrix<Complex64>,
}

impl DensityState {
    /// Pure coherent state with `⟨x⟩ = mean_x`, `⟨p⟩ = mean_p`, renormalized
    /// after truncation.
    pub fn coherent(dim: usize, mean_x: f64, mean_p: f64) -> Self {
        let alpha = Complex64::new(mean_x, mean_p) * FRAC_1_SQRT_2;
        let mut amps = Vec::with_capacity(dim);
        let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..dim {
            amps.push(c);
            c = c * alpha / ((n + 1) as f64).sqrt();
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = nalgebra::DVector::from_iterator(dim, amps.into_iter().map(|a| a / norm));
        Self {
            rho: &psi * psi.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn expectation(&self, op: &DMatrix<Complex64>) -> f64 {
        (op * &self.rho).trace().re
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Total population of the highest `levels` Fock states.
    pub fn top_population(&self, levels: usize) -> f64 {
        let n = self.dim();
        (n.saturating_sub(levels)..n).map(|i| self.rho[(i, i)].re).sum()
    }

    /// Gaussian moments of the state.
    pub fn moments(&self, ops: &FockOperators) -> GaussianState {
        let xr = ops.x_left(&self.rho);
        let pr = ops.p_left(&self.rho);
        let mean_x = xr.trace().re;
        let mean_p = pr.trace().re;
        let x2 = ops.trace_x(&xr);
        let p2 = ops.trace_p(&pr);
        // ½⟨xp + px⟩ = Re⟨xp⟩ for Hermitian x, p.
        let xp = ops.trace_x(&pr);
        GaussianState {
            mean_x,
            mean_p,
            var_x: x2 - mean_x * mean_x,
            var_p: p2 - mean_p * mean_p,
            cov_xp: xp - mean_x * mean_p,
        }
    }

    /// ⟨(x − ⟨x⟩)³⟩.
    pub fn third_central_moment_x(&self, ops: &FockOperators) -> f64 {
        let xr = ops.x_left(&self.rho);
        let xxr = ops.x_left(&xr);
        let m1 = xr.trace().re;
        let m2 = xxr.trace().re;
        let m3 = ops.trace_x(&xxr);
        m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// True when every eigenvalue is at least `-threshold`, decided by
    /// attempting a Cholesky factorization of `ρ + threshold·I`.
    pub fn is_positive_within(&self, threshold: f64) -> bool {
        let n = self.dim();
        let mut l = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..n {
            let mut pivot = self.rho[(j, j)].re + threshold;
            for k in 0..j {
                pivot -= l[(j, k)].norm_sqr();
            }
            if !(pivot > 0.0) {
                return false;
            }
            let d = pivot.sqrt();
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut v = self.rho[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / d;
            }
        }
        true
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::invalid("rho", format!("not Hermitian: deviation {herm:.3e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::invalid("rho", format!("trace {tr} differs from 1")));
        }
        if !self.is_positive_within(1e-8) {
            return Err(Error::PositivityLoss { threshold: -1e-8 });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_elements() {
        let ops = build_operators(4).unwrap();
        assert!((ops.x_op[(0, 1)].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(build_operators(3).is_err());
        assert!(build_operators(129).is_err());
    }

    #[test]
    fn hermitian_and_canonical() {
        let ops = build_operators(24).unwrap();
        let herm = |m: &DMatrix<Complex64>| (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(herm(&ops.x_op) < 1e-12 && herm(&ops.p_op) < 1e-12);
        let comm = &ops.x_op * &ops.p_op - &ops.p_op * &ops.x_op;
        for i in 0..ops.dim - 2 {
            for j in 0..ops.dim - 2 {
                let expected = if i == j {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((comm[(i, j)] - expected).norm() < 1e-10, "[{i},{j}] = {}", comm[(i, j)]);
            }
        }
    }

    #[test]
    fn ground_state_moments() {
        let ops = build_operators(10).unwrap();
        let g = DensityState::coherent(10, 0.0, 0.0);
        assert!((g.expectation(&ops.x_sq_op) - 0.5).abs() < 1e-15);
        let m = g.moments(&ops);
        assert!((m.var_p - 0.5).abs() < 1e-15 && m.cov_xp.abs() < 1e-15);
    }

    #[test]
    fn coherent_state_moments() {
        let ops = build_operators(40).unwrap();
        let s = DensityState::coherent(40, 1.2, -0.7);
        let m = s.moments(&ops);
        assert!((m.mean_x - 1.2).abs() < 1e-12 && (m.mean_p + 0.7).abs() < 1e-12);
        assert!((m.var_x - 0.5).abs() < 1e-12 && (m.var_p - 0.5).abs() < 1e-12);
        assert!(m.cov_xp.abs() < 1e-12);
        assert!(s.third_central_moment_x(&ops).abs() < 1e-12);
        let n = 40;
        let shifted = &ops.x_op - DMatrix::<Complex64>::identity(n, n) * Complex64::new(m.mean_x, 0.0);
        let skewed = DensityState {
            rho: (DensityState::coherent(n, 1.2, -0.7).rho
                + DensityState::coherent(n, -0.5, 0.2).rho * Complex64::new(0.5, 0.0))
                * Complex64::new(1.0 / 1.5, 0.0),
        };
        let mean = skewed.expectation(&ops.x_op);
        let shifted = &shifted - DMatrix::<Complex64>::identity(n, n) * Complex64::new(mean - m.mean_x, 0.0);
        let dense = skewed.expectation(&(&shifted * &shifted * &shifted));
        assert!((skewed.third_central_moment_x(&ops) - dense).abs() < 1e-12);
        s.validate().unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-12);
        assert!(s.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn banded_products_match_dense() {
        let ops = build_operators(12).unwrap();
        let s = DensityState::coherent(12, 0.4, 0.9);
        let dense = &ops.x_op * &s.rho;
        let banded = ops.x_left(&s.rho);
        assert!((dense - banded).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-15);
        assert!((ops.trace_x(&s.rho) - s.expectation(&ops.x_op)).abs() < 1e-15);
        let dense_p = &ops.p_op * &s.rho;
        assert!(
            (dense_p - ops.p_left(&s.rho))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
                < 1e-15
        );
        assert!((ops.trace_p(&s.rho) - s.expectation(&ops.p_op)).abs() < 1e-15);
    }

    #[test]
    fn positivity_probe() {
        let mut s = DensityState::coherent(6, 0.0, 0.0);
        assert!(s.is_positive_within(1e-8));
        s.rho[(5, 5)] = Complex64::new(-1e-3, 0.0);
        assert!(!s.is_positive_within(1e-6));
        assert!(s.is_positive_within(2e-3));
        let mixed = DensityState {
            rho: (DensityState::coherent(6, 0.3, 0.1).rho + DensityState::coherent(6, -0.2, 0.4).rho)
                * Complex64::new(0.5, 0.0),
        };
        assert!(mixed.is_positive_within(1e-12));
        assert!(s.min_eigenvalue() < -9e-4);
    }
}
