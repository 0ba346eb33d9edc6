use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fock::{build_operators, DensityState};
use super::sme::{SmeIntegrator, SmeScheme};
use crate::dynamics::{initial_true_state, Actuation, ConditionalStepper, GaussianState};
use crate::error::{Error, Result};
use crate::params::SimParams;

/// Largest top-three-level population accepted for the initial state.
pub const INITIAL_TRUNCATION_THRESHOLD: f64 = 1e-6;

/// Worst-case disagreement between Gaussian-moment and Fock-basis runs
/// driven by the same Wiener increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub dim: usize,
    pub dt: f64,
    pub duration: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: SmeScheme,
    pub max_dev_mean_x: f64,
    pub max_dev_mean_p: f64,
    pub max_dev_var_x: f64,
    pub max_dev_var_p: f64,
    pub max_dev_cov_xp: f64,
    /// Largest |⟨(x − ⟨x⟩)³⟩| seen in the Fock run.
    pub max_third_moment: f64,
    /// Smallest `VxVp − C²` seen in the Fock run.
    pub min_uncertainty_product: f64,
    /// Largest |Tr ρ − 1| before renormalization.
    pub max_trace_drift: f64,
    pub max_top_population: f64,
    pub final_gaussian: GaussianState,
    pub final_fock: GaussianState,
}

impl OracleReport {
    pub fn max_mean_deviation(&self) -> f64 {
        self.max_dev_mean_x.max(self.max_dev_mean_p)
    }

    pub fn max_variance_deviation(&self) -> f64 {
        self.max_dev_var_x.max(self.max_dev_var_p).max(self.max_dev_cov_xp)
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_mean_deviation().max(self.max_variance_deviation())
    }
}

/// Same-path comparison at `dt` and `dt/2`; the coarse increments are sums of
/// consecutive fine ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingStudy {
    pub coarse: OracleReport,
    pub fine: OracleReport,
}

impl HalvingStudy {
    /// Coarse deviation over fine deviation.
    pub fn ratio(&self) -> f64 {
        self.coarse.max_deviation() / self.fine.max_deviation()
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
    }
    Ok(((duration / dt).round() as usize).max(1))
}

fn run(
    sp: &SimParams,
    dim: usize,
    seed: u64,
    start: GaussianState,
    increments: &[f64],
    scheme: SmeScheme,
) -> Result<OracleReport> {
    let ops = build_operators(dim)?;
    let mut fock = DensityState::coherent(dim, start.mean_x, start.mean_p);
    let leak = fock.top_population(3);
    if leak >= INITIAL_TRUNCATION_THRESHOLD {
        return Err(Error::TruncationLeak {
            population: leak,
            threshold: INITIAL_TRUNCATION_THRESHOLD,
        });
    }
    let integ = SmeIntegrator::new(&ops, sp, scheme)?;
    let stepper = ConditionalStepper::new(sp);
    let mut gauss = start;
    let mut report = OracleReport {
        dim,
        dt: sp.dt,
        duration: increments.len() as f64 * sp.dt,
        n_steps: increments.len(),
        seed,
        scheme,
        max_dev_mean_x: 0.0,
        max_dev_mean_p: 0.0,
        max_dev_var_x: 0.0,
        max_dev_var_p: 0.0,
        max_dev_cov_xp: 0.0,
        max_third_moment: fock.third_central_moment_x(&ops).abs(),
        min_uncertainty_product: fock.moments(&ops).uncertainty_product(),
        max_trace_drift: 0.0,
        max_top_population: leak,
        final_gaussian: gauss,
        final_fock: fock.moments(&ops),
    };
    for (step, &d_w) in increments.iter().enumerate() {
        let (next, diag) = integ.step(&fock, d_w).map_err(|e| e.at_step(step))?;
        fock = next;
        gauss = stepper
            .step(&gauss, d_w, Actuation::NONE)
            .map_err(|e| e.at_step(step))?;
        let m = fock.moments(&ops);
        report.max_dev_mean_x = report.max_dev_mean_x.max((m.mean_x - gauss.mean_x).abs());
        report.max_dev_mean_p = report.max_dev_mean_p.max((m.mean_p - gauss.mean_p).abs());
        report.max_dev_var_x = report.max_dev_var_x.max((m.var_x - gauss.var_x).abs());
        report.max_dev_var_p = report.max_dev_var_p.max((m.var_p - gauss.var_p).abs());
        report.max_dev_cov_xp = report.max_dev_cov_xp.max((m.cov_xp - gauss.cov_xp).abs());
        report.max_third_moment = report.max_third_moment.max(fock.third_central_moment_x(&ops).abs());
        report.min_uncertainty_product = report.min_uncertainty_product.min(m.uncertainty_product());
        report.max_trace_drift = report.max_trace_drift.max(diag.trace_drift.abs());
        report.max_top_population = report.max_top_population.max(diag.top_population);
        report.final_fock = m;
    }
    report.final_gaussian = gauss;
    Ok(report)
}

/// Runs the Gaussian-moment integrator and the Fock-basis master equation
/// side by side for `duration`, sharing one seeded Wiener path.
///
/// The initial state is the coherent state used by the trajectory runner for
/// the same seed; `sp.duration` is ignored.
pub fn compare_oracle(sp: &SimParams, duration: f64, dim: usize, seed: u64) -> Result<OracleReport> {
    compare_oracle_with(sp, duration, dim, seed, SmeScheme::default())
}

pub fn compare_oracle_with(
    sp: &SimParams,
    duration: f64,
    dim: usize,
    seed: u64,
    scheme: SmeScheme,
) -> Result<OracleReport> {
    sp.validate()?;
    let n = steps_for(duration, sp.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = initial_true_state(sp.n_th, &mut rng);
    let sqrt_dt = sp.dt.sqrt();
    let increments: Vec<f64> = (0..n).map(|_| sqrt_dt * rng.sample::<f64, _>(StandardNormal)).collect();
    run(sp, dim, seed, start, &increments, scheme)
}

/// Runs the comparison at `sp.dt` and `sp.dt / 2` on one Brownian path.
pub fn dt_halving_study(sp: &SimParams, duration: f64, dim: usize, seed: u64) -> Result<HalvingStudy> {
    sp.validate()?;
    let n = steps_for(duration, sp.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = initial_true_state(sp.n_th, &mut rng);
    let fine_sp = SimParams { dt: sp.dt / 2.0, ..*sp };
    let sqrt_fine = fine_sp.dt.sqrt();
    let fine: Vec<f64> = (0..2 * n)
        .map(|_| sqrt_fine * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let coarse: Vec<f64> = fine.chunks_exact(2).map(|pair| pair[0] + pair[1]).collect();
    let scheme = SmeScheme::default();
    Ok(HalvingStudy {
        coarse: run(sp, dim, seed, start, &coarse, scheme)?,
        fine: run(&fine_sp, dim, seed, start, &fine, scheme)?,
    })
}
