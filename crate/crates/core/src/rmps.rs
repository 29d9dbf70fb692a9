//! Recursive modified pattern search over the unconstrained angle space.
//!
//! Each iteration polls the `2N` points `x +- s e_i` (every perturbed
//! coordinate folded back through its wrapping rule), moves to the best one
//! if it strictly improves on the current value, and divides the global step
//! `s` by `rho` when the iteration gained less than `tau1`. A run stops at
//! `max_iter` iterations or once `s <= kappa`; runs are chained, restarting
//! either from the best point so far or from a random lattice point, until
//! `max_run` runs are done or two consecutive runs end within `tau2` of each
//! other.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corrspace::{self, wrap_cases, CorrelationMatrix, UnconstrainedVector, WrapCase};
use crate::error::{Error, Result};
use crate::objective::{Pullback, INFEASIBLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestartMode {
    /// Start every run from the best point found so far, with a fresh step.
    #[default]
    WarmBest,
    /// Start run `r >= 2` from a uniform draw on the lattice
    /// `offset + mesh_r Z^N` restricted to one period per coordinate, with
    /// `mesh_r = grid_mesh_initial / grid_mesh_divisor^(r - 2)`.
    GridRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub s_initial: f64,
    pub rho: f64,
    pub kappa: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub max_iter: usize,
    pub max_run: usize,
    pub restart_mode: RestartMode,
    pub grid_mesh_initial: f64,
    pub grid_mesh_divisor: f64,
    pub grid_offset: f64,
    pub seed: u64,
    /// Worker count for candidate evaluation; 0 means serial. Interpreted by
    /// the caller that builds the [`CandidateEvaluator`].
    pub parallelism: usize,
    /// Shrink the step only when no candidate improved, instead of whenever
    /// the gain was below `tau1`.
    pub strict_failure_shrink: bool,
    /// Reuse the known value of the current point instead of re-evaluating it
    /// at the start of every iteration. Results are identical for
    /// deterministic objectives; only the evaluation count changes.
    pub cache_current_value: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            s_initial: 1.0,
            rho: 2.0,
            kappa: 1e-6,
            tau1: 1e-8,
            tau2: 1e-6,
            max_iter: 10_000,
            max_run: 10,
            restart_mode: RestartMode::WarmBest,
            grid_mesh_initial: 0.5,
            grid_mesh_divisor: 2.0,
            grid_offset: 0.0,
            seed: 0,
            parallelism: 0,
            strict_failure_shrink: false,
            cache_current_value: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.s_initial) {
            return Err(Error::invalid("s_initial", "must be positive"));
        }
        if !(self.rho.is_finite() && self.rho > 1.0) {
            return Err(Error::invalid("rho", "must exceed 1"));
        }
        if !finite_pos(self.kappa) || self.kappa >= self.s_initial {
            return Err(Error::invalid("kappa", "must lie in (0, s_initial)"));
        }
        if !(self.tau1 >= 0.0) || !(self.tau2 >= 0.0) {
            return Err(Error::invalid("tau", "thresholds must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        if self.max_run == 0 {
            return Err(Error::invalid("max_run", "must be at least 1"));
        }
        if self.restart_mode == RestartMode::GridRandom {
            if !finite_pos(self.grid_mesh_initial) {
                return Err(Error::invalid("grid_mesh_initial", "must be positive"));
            }
            if !(self.grid_mesh_divisor.is_finite() && self.grid_mesh_divisor >= 1.0) {
                return Err(Error::invalid("grid_mesh_divisor", "must be at least 1"));
            }
            if !self.grid_offset.is_finite() {
                return Err(Error::invalid("grid_offset", "must be finite"));
            }
        }
        Ok(())
    }
}

/// State after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub run: usize,
    pub iteration: usize,
    /// Step size at the end of the iteration (after any reduction).
    pub step_size: f64,
    /// Best value seen so far across all runs.
    pub best_value: f64,
    /// Cumulative objective evaluations.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub best_phi: UnconstrainedVector,
    pub best_value: f64,
    pub best_corr: CorrelationMatrix,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    pub runs_completed: usize,
    /// Value at the end of each run.
    pub run_values: Vec<f64>,
}

/// Optimization stopped on an evaluation failure; carries the trace so far.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("optimization aborted after {evaluations} evaluations: {source}")]
pub struct OptimizeError {
    pub source: Error,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
}

impl From<Error> for OptimizeError {
    fn from(source: Error) -> Self {
        OptimizeError {
            source,
            trace: Vec::new(),
            evaluations: 0,
        }
    }
}

/// Runs a batch of independent evaluations. Implementations may run them in
/// any order or concurrently but must return the results by index.
pub trait CandidateEvaluator {
    fn evaluate(&self, count: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SerialEvaluator;

impl CandidateEvaluator for SerialEvaluator {
    fn evaluate(&self, count: usize, f: &(dyn Fn(usize) -> Result<f64> + Sync)) -> Vec<Result<f64>> {
        (0..count).map(f).collect()
    }
}

/// Result of one polling sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PollOutcome {
    /// 0-based candidate index `h`: coordinate `h / 2`, step `-s` for even
    /// `h`, `+s` for odd `h`.
    pub best_index: usize,
    pub best_value: f64,
    pub values: Vec<f64>,
    pub failures: usize,
}

impl PollOutcome {
    pub fn coordinate(&self) -> usize {
        self.best_index / 2
    }

    pub fn is_positive_step(&self) -> bool {
        self.best_index % 2 == 1
    }
}

fn candidate(phi: &[f64], cases: &[WrapCase], step: f64, h: usize) -> Vec<f64> {
    let i = h / 2;
    let mut x = phi.to_vec();
    x[i] = candidate_coordinate(phi[i], cases[i], step, h);
    x
}

fn candidate_coordinate(value: f64, case: WrapCase, step: f64, h: usize) -> f64 {
    let signed = if h % 2 == 0 { -step } else { step };
    case.wrap(value + signed)
}

/// Evaluates all `2N` coordinate perturbations of `phi` and picks the
/// smallest value, lowest index on ties. Failed candidates score
/// [`INFEASIBLE`]; if every candidate fails the first error is returned.
pub fn poll_candidates<P: Pullback + ?Sized>(
    pullback: &P,
    phi: &[f64],
    step: f64,
    evaluator: &dyn CandidateEvaluator,
) -> Result<PollOutcome> {
    let cases = wrap_cases(pullback.dim());
    if phi.len() != cases.len() {
        return Err(Error::DimensionMismatch {
            expected: cases.len(),
            found: phi.len(),
        });
    }
    if !(step > 0.0) {
        return Err(Error::invalid("step", "must be positive"));
    }
    let count = 2 * cases.len();
    let evaluator = if pullback.concurrent_safe() {
        evaluator
    } else {
        &SerialEvaluator
    };
    let results = match pullback.neighborhood(phi) {
        Some(near) => {
            let eval = |h: usize| {
                let i = h / 2;
                near.value_at(i, candidate_coordinate(phi[i], cases[i], step, h))
            };
            evaluator.evaluate(count, &eval)
        }
        None => {
            let eval = |h: usize| pullback.value(&candidate(phi, &cases, step, h));
            evaluator.evaluate(count, &eval)
        }
    };
    let mut values = Vec::with_capacity(count);
    let mut failures = 0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok(v) if !v.is_nan() => values.push(v),
            Ok(_) => values.push(INFEASIBLE),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
                values.push(INFEASIBLE);
            }
        }
    }
    if count > 0 && failures == count {
        return Err(first_error.unwrap_or(Error::Evaluation("all candidates failed".into())));
    }
    let mut best_index = 0;
    let mut best_value = values.first().copied().unwrap_or(INFEASIBLE);
    for (h, &v) in values.iter().enumerate().skip(1) {
        if v < best_value {
            best_value = v;
            best_index = h;
        }
    }
    Ok(PollOutcome {
        best_index,
        best_value,
        values,
        failures,
    })
}

/// Serial [`optimize_with`].
pub fn optimize<P: Pullback + ?Sized>(
    pullback: &P,
    init: &CorrelationMatrix,
    config: &OptimizerConfig,
) -> Result<RunResult, OptimizeError> {
    optimize_with(pullback, init, config, &SerialEvaluator)
}

/// Minimizes `pullback` starting from the angles of `init`.
pub fn optimize_with<P: Pullback + ?Sized>(
    pullback: &P,
    init: &CorrelationMatrix,
    config: &OptimizerConfig,
    evaluator: &dyn CandidateEvaluator,
) -> Result<RunResult, OptimizeError> {
    config.validate()?;
    let d = pullback.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: init.dim(),
        }
        .into());
    }
    let start = corrspace::corr_to_phi(init)?;
    Engine::new(pullback, config, evaluator).run(start.angles().to_vec())
}

/// Like [`optimize_with`] but starting from an arbitrary unconstrained point.
pub fn optimize_from<P: Pullback + ?Sized>(
    pullback: &P,
    start: &UnconstrainedVector,
    config: &OptimizerConfig,
    evaluator: &dyn CandidateEvaluator,
) -> Result<RunResult, OptimizeError> {
    config.validate()?;
    if start.dim() != pullback.dim() {
        return Err(Error::DimensionMismatch {
            expected: pullback.dim(),
            found: start.dim(),
        }
        .into());
    }
    let d = start.dim();
    Engine::new(pullback, config, evaluator).run(corrspace::wrap_values(d, start.values()))
}

struct Engine<'a, P: ?Sized> {
    pullback: &'a P,
    config: &'a OptimizerConfig,
    evaluator: &'a dyn CandidateEvaluator,
    cases: Vec<WrapCase>,
    trace: Vec<TraceEntry>,
    evaluations: usize,
}

impl<'a, P: Pullback + ?Sized> Engine<'a, P> {
    fn new(pullback: &'a P, config: &'a OptimizerConfig, evaluator: &'a dyn CandidateEvaluator) -> Self {
        Engine {
            pullback,
            config,
            evaluator,
            cases: wrap_cases(pullback.dim()),
            trace: Vec::new(),
            evaluations: 0,
        }
    }

    fn abort(&mut self, source: Error) -> OptimizeError {
        OptimizeError {
            source,
            trace: core::mem::take(&mut self.trace),
            evaluations: self.evaluations,
        }
    }

    fn evaluate_point(&mut self, phi: &[f64]) -> Result<f64, OptimizeError> {
        self.evaluations += 1;
        match self.pullback.value(phi) {
            Ok(v) if v.is_nan() => Ok(INFEASIBLE),
            Ok(v) => Ok(v),
            Err(e) => Err(self.abort(e)),
        }
    }

    fn grid_start(&self, rng: &mut ChaCha8Rng, run: usize) -> Vec<f64> {
        let c = self.config;
        let exponent = i32::try_from(run.saturating_sub(2)).unwrap_or(i32::MAX);
        let mesh = c.grid_mesh_initial / libm::pow(c.grid_mesh_divisor, f64::from(exponent));
        self.cases
            .iter()
            .map(|case| {
                let (lo, hi) = case.period_window();
                let k_min = libm::ceil((lo - c.grid_offset) / mesh);
                let k_max = libm::ceil((hi - c.grid_offset) / mesh) - 1.0;
                let k = if k_max > k_min {
                    // k_max - k_min is a small nonnegative integer count
                    let span = (k_max - k_min) as u64 + 1;
                    k_min + rng.random_range(0..span) as f64
                } else {
                    k_min
                };
                case.wrap(c.grid_offset + mesh * k)
            })
            .collect()
    }

    fn run(mut self, start: Vec<f64>) -> Result<RunResult, OptimizeError> {
        let c = self.config;
        let n = self.cases.len();
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);

        let mut best_phi = start.clone();
        let mut best_value = f64::INFINITY;
        let mut run_values: Vec<f64> = Vec::new();

        for run in 1..=c.max_run {
            let mut current = match (run, c.restart_mode) {
                (1, _) => start.clone(),
                (_, RestartMode::WarmBest) => best_phi.clone(),
                (_, RestartMode::GridRandom) => self.grid_start(&mut rng, run),
            };
            let mut current_value = self.evaluate_point(&current)?;
            if current_value < best_value {
                best_value = current_value;
                best_phi = current.clone();
            }
            let mut step = c.s_initial;
            let mut j = 1;
            while j <= c.max_iter && step > c.kappa && n > 0 {
                let f1 = if c.cache_current_value || j == 1 {
                    current_value
                } else {
                    self.evaluate_point(&current)?
                };
                let poll = match poll_candidates(self.pullback, &current, step, self.evaluator) {
                    Ok(p) => p,
                    Err(e) => return Err(self.abort(e)),
                };
                self.evaluations += poll.values.len();
                let f2 = poll.best_value;
                if f2 < f1 {
                    current = candidate(&current, &self.cases, step, poll.best_index);
                    current_value = f2;
                } else {
                    current_value = f1;
                }
                let shrink = if c.strict_failure_shrink {
                    f2 >= f1
                } else {
                    j > 1 && libm::fabs(f1 - f1.min(f2)) < c.tau1
                };
                if shrink && step > c.kappa {
                    step /= c.rho;
                }
                if current_value < best_value {
                    best_value = current_value;
                    best_phi = current.clone();
                }
                self.trace.push(TraceEntry {
                    run,
                    iteration: j,
                    step_size: step,
                    best_value,
                    evaluations: self.evaluations,
                });
                j += 1;
            }
            let converged = run_values
                .last()
                .is_some_and(|prev: &f64| libm::fabs(current_value - prev) < c.tau2);
            run_values.push(current_value);
            if converged {
                break;
            }
        }

        let d = self.pullback.dim();
        let best_corr = corrspace::phi_to_corr(&corrspace::AngularVector::from_wrapped(
            d,
            corrspace::wrap_values(d, &best_phi),
        ));
        let runs_completed = run_values.len();
        Ok(RunResult {
            best_phi: UnconstrainedVector::new(d, best_phi).map_err(|e| self.abort(e))?,
            best_value,
            best_corr,
            trace: self.trace,
            evaluations: self.evaluations,
            runs_completed,
            run_values,
        })
    }
}

/// Max-norm of the central finite-difference gradient of `pullback` at `phi`.
pub fn stationarity_check<P: Pullback + ?Sized>(pullback: &P, phi: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("probe step", "must be positive"));
    }
    let mut x = phi.to_vec();
    let mut norm = 0.0_f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = pullback.value(&x)?;
        x[i] = orig - h;
        let down = pullback.value(&x)?;
        x[i] = orig;
        norm = norm.max(libm::fabs(up - down) / (2.0 * h));
    }
    Ok(norm)
}

/// Boxed evaluator for callers that pick one at runtime.
pub type DynEvaluator = Box<dyn CandidateEvaluator + Send + Sync>;
