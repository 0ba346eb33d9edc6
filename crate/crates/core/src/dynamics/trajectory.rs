use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{Actuation, ConditionalStepper, GaussianState};
use crate::error::{Error, Result};
use crate::measurement::{generate_record_increment, RecordIncrement};
use crate::params::{normalize_params, SimParams, TrapParams};

/// Refuse runs longer than this many steps.
pub const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// True conditional state and its measurement record; no estimator.
    MeasureOnly,
    /// Adds a real-time estimator fed by the record.
    EstimateOnly,
    /// Estimator plus damping feedback computed from the estimated means.
    FullFeedback,
    /// Ensemble-averaged evolution: η = 0 in the true state, no record.
    Unconditioned,
}

impl Mode {
    pub fn has_record(self) -> bool {
        !matches!(self, Mode::Unconditioned)
    }

    pub fn has_estimator(self) -> bool {
        matches!(self, Mode::EstimateOnly | Mode::FullFeedback)
    }
}

/// Everything produced by one step of the coupled loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub step: usize,
    /// Time at the end of the step.
    pub time: f64,
    pub true_state: GaussianState,
    pub est_state: Option<GaussianState>,
    pub record: Option<RecordIncrement>,
    /// Actuation applied during the step (zero without feedback).
    pub actuation: Actuation,
}

/// Recorded time series of one seeded run. Samples are taken at the end of
/// every step. `est_states` is empty in modes without an estimator and
/// `record` is empty in unconditioned mode; otherwise every sequence has the
/// same length as `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutput {
    pub times: Vec<f64>,
    pub true_states: Vec<GaussianState>,
    pub est_states: Vec<GaussianState>,
    pub record: Vec<RecordIncrement>,
    pub feedback: Vec<Actuation>,
    pub seed: u64,
    pub mode: Mode,
    pub params_echo: SimParams,
}

impl TrajectoryOutput {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Coherent state carrying the thermal energy `n_th`, with a phase drawn from `rng`.
pub fn initial_true_state(n_th: f64, rng: &mut impl Rng) -> GaussianState {
    let phase: f64 = rng.random_range(0.0..TAU);
    let amplitude = (2.0 * n_th).sqrt();
    GaussianState::coherent(amplitude * phase.cos(), -amplitude * phase.sin())
}

/// Zero-mean estimate with thermal variances.
pub fn initial_estimate(n_th: f64) -> GaussianState {
    GaussianState::thermal(n_th)
}

/// Step-by-step driver of the coupled true-state / record / estimator loop.
///
/// Each step draws `dW ~ N(0, dt)`, computes the actuation from the current
/// estimate, advances the true state, forms the record increment from the
/// pre-step true mean and the same `dW`, then advances the estimator.
pub struct TrajectoryRunner {
    sp: SimParams,
    mode: Mode,
    rng: ChaCha8Rng,
    truth_stepper: ConditionalStepper,
    est_stepper: ConditionalStepper,
    truth: GaussianState,
    est: Option<GaussianState>,
    step: usize,
    n_steps: usize,
    sqrt_dt: f64,
    failed: bool,
}

impl TrajectoryRunner {
    pub fn new(sp: SimParams, seed: u64, mode: Mode) -> Result<Self> {
        sp.validate()?;
        let n_steps = sp.n_steps();
        if n_steps > MAX_STEPS {
            return Err(Error::invalid(
                "duration",
                format!("{n_steps} steps exceed {MAX_STEPS}"),
            ));
        }
        if mode.has_record() && !(sp.information_rate() > 0.0) {
            return Err(Error::MeasurementOff);
        }
        let truth_params = match mode {
            Mode::Unconditioned => SimParams { eta: 0.0, ..sp },
            _ => sp,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = initial_true_state(sp.n_th, &mut rng);
        Ok(Self {
            sp,
            mode,
            rng,
            truth_stepper: ConditionalStepper::new(&truth_params),
            est_stepper: ConditionalStepper::new(&sp),
            truth,
            est: mode.has_estimator().then(|| initial_estimate(sp.n_th)),
            step: 0,
            n_steps,
            sqrt_dt: sp.dt.sqrt(),
            failed: false,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.sp
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn true_state(&self) -> &GaussianState {
        &self.truth
    }

    fn advance(&mut self) -> Result<StepSample> {
        let z: f64 = self.rng.sample(StandardNormal);
        let d_w = self.sqrt_dt * z;
        let actuation = match (self.mode, &self.est) {
            (Mode::FullFeedback, Some(est)) => Actuation::damping(self.sp.gamma_s, est),
            _ => Actuation::NONE,
        };
        let record = if self.mode.has_record() {
            Some(generate_record_increment(self.truth.mean_x, &self.sp, d_w)?)
        } else {
            None
        };
        self.truth = self.truth_stepper.step(&self.truth, d_w, actuation)?;
        if let (Some(est), Some(inc)) = (self.est.as_mut(), record.as_ref()) {
            *est = self.est_stepper.estimate(est, inc, actuation)?;
        }
        self.step += 1;
        Ok(StepSample {
            step: self.step - 1,
            time: self.step as f64 * self.sp.dt,
            true_state: self.truth,
            est_state: self.est,
            record,
            actuation,
        })
    }
}

impl Iterator for TrajectoryRunner {
    type Item = Result<StepSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.step >= self.n_steps {
            return None;
        }
        let step = self.step;
        let sample = self.advance().map_err(|e| e.at_step(step));
        self.failed = sample.is_err();
        Some(sample)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = if self.failed { 0 } else { self.n_steps - self.step };
        (0, Some(left))
    }
}

/// Runs one seeded trajectory of `duration` (units of 1/ω) with step `dt`.
pub fn simulate_trajectory(tp: &TrapParams, dt: f64, duration: f64, seed: u64, mode: Mode) -> Result<TrajectoryOutput> {
    let sp = normalize_params(tp, dt, duration)?;
    let runner = TrajectoryRunner::new(sp, seed, mode)?;
    let n = runner.n_steps();
    let mut out = TrajectoryOutput {
        times: Vec::with_capacity(n),
        true_states: Vec::with_capacity(n),
        est_states: Vec::with_capacity(if mode.has_estimator() { n } else { 0 }),
        record: Vec::with_capacity(if mode.has_record() { n } else { 0 }),
        feedback: Vec::with_capacity(n),
        seed,
        mode,
        params_echo: sp,
    };
    for sample in runner {
        let sample = sample?;
        out.times.push(sample.time);
        out.true_states.push(sample.true_state);
        out.est_states.extend(sample.est_state);
        out.record.extend(sample.record);
        out.feedback.push(sample.actuation);
    }
    Ok(out)
}

/// Maps `f` over `seeds` in parallel; results come back in seed order
/// regardless of completion order.
pub fn ensemble_map<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    seeds.par_iter().map(|&seed| f(seed)).collect()
}
