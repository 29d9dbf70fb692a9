//! Sparse correlation and covariance estimation from a data matrix.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::corrspace::{validate_corr, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::metrics::Support;
use crate::objective::{LossSpec, ObjectiveSpec};
use crate::penalty::{PenaltyFamily, PenaltyMask, PenaltySpec};
use crate::rmps::{optimize_with, CandidateEvaluator, OptimizerConfig, RunResult};

pub const DEFAULT_ZERO_TOL: f64 = 1e-3;

/// Observations in rows, variables in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("data", "needs at least one row and one column"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DataMatrix { values, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// `n - 1`
    #[default]
    Unbiased,
    /// `n`
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMoments {
    pub covariance: DMatrix<f64>,
    /// Sample correlation with an exact unit diagonal. Not necessarily
    /// positive definite.
    pub correlation: DMatrix<f64>,
    /// Column standard deviations, `sqrt(diag(S))`.
    pub scale: Vec<f64>,
}

pub fn sample_moments(x: &DataMatrix, denominator: Denominator) -> Result<SampleMoments> {
    let (n, d) = (x.n(), x.d());
    if n < 2 {
        return Err(Error::invalid("data", "needs at least two observations"));
    }
    let mut centered = x.values().clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let denom = match denominator {
        Denominator::Unbiased => (n - 1) as f64,
        Denominator::Sample => n as f64,
    };
    let mut covariance = centered.transpose() * &centered / denom;
    // exact symmetry regardless of GEMM rounding
    for i in 0..d {
        for j in 0..i {
            covariance[(j, i)] = covariance[(i, j)];
        }
    }
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let v = covariance[(j, j)];
        if !(v > 0.0) {
            return Err(Error::ZeroVariance { column: j });
        }
        scale.push(libm::sqrt(v));
    }
    let correlation = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (covariance[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
        }
    });
    Ok(SampleMoments {
        covariance,
        correlation,
        scale,
    })
}

/// `sigma_ij = w_i gamma_ij w_j`.
pub fn recover_sigma(gamma: &CorrelationMatrix, scale: &[f64]) -> Result<DMatrix<f64>> {
    let d = gamma.dim();
    if scale.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: scale.len(),
        });
    }
    if let Some(bad) = scale.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid("scale", alloc::format!("entries must be positive, got {bad}")));
    }
    // computed on the lower triangle so the result is exactly symmetric
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if i == j {
            scale[i] * scale[i]
        } else {
            scale[hi] * gamma.get(hi, lo) * scale[lo]
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Gaussian,
    Frobenius,
}

/// Starting point of the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// The sample correlation when it is positive definite, the identity
    /// otherwise.
    #[default]
    SampleCorrelation,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub loss: LossKind,
    pub family: PenaltyFamily,
    /// One value, or a grid scanned with the information criterion.
    pub lambdas: Vec<f64>,
    pub mask: Option<PenaltyMask>,
    pub optimizer: OptimizerConfig,
    pub zero_tol: f64,
    pub denominator: Denominator,
    pub init: Initialization,
}

impl EstimateConfig {
    pub fn new(loss: LossKind, family: PenaltyFamily, lambdas: Vec<f64>) -> Self {
        EstimateConfig {
            loss,
            family,
            lambdas,
            mask: None,
            optimizer: OptimizerConfig::default(),
            zero_tol: DEFAULT_ZERO_TOL,
            denominator: Denominator::Unbiased,
            init: Initialization::SampleCorrelation,
        }
    }
}

/// Fit at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    pub loss: f64,
    pub objective: f64,
    pub support_size: usize,
    /// `n * loss + ln(n) * support_size`
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub gamma_hat: CorrelationMatrix,
    pub sigma_hat: DMatrix<f64>,
    pub support: Support,
    pub lambda_used: f64,
    pub scale: Vec<f64>,
    pub zero_tol: f64,
    pub optimizer: RunResult,
    pub path: Vec<LambdaFit>,
}

impl EstimateResult {
    /// Fit record for the selected lambda.
    pub fn selected(&self) -> &LambdaFit {
        self.path
            .iter()
            .find(|f| f.lambda == self.lambda_used)
            .unwrap_or(&self.path[0])
    }
}

pub fn estimate(x: &DataMatrix, config: &EstimateConfig, evaluator: &dyn CandidateEvaluator) -> Result<EstimateResult> {
    if config.lambdas.is_empty() {
        return Err(Error::invalid("lambda", "at least one value is required"));
    }
    if !(config.zero_tol >= 0.0) {
        return Err(Error::invalid("zero_tol", "must be nonnegative"));
    }
    let moments = sample_moments(x, config.denominator)?;
    let d = x.d();
    let sample_corr = validate_corr(&moments.correlation, 0.0).ok();
    let loss = match config.loss {
        LossKind::Gaussian => {
            let target = sample_corr.clone().ok_or_else(|| {
                Error::invalid(
                    "loss",
                    "the sample correlation is singular, so the Gaussian likelihood is undefined; use the Frobenius loss",
                )
            })?;
            LossSpec::gaussian(target)?
        }
        LossKind::Frobenius => LossSpec::frobenius(moments.correlation.clone())?,
    };
    let init = match config.init {
        Initialization::SampleCorrelation => sample_corr.unwrap_or_else(|| CorrelationMatrix::identity(d)),
        Initialization::Identity => CorrelationMatrix::identity(d),
    };
    let log_n = libm::log(x.n() as f64);
    let n = x.n() as f64;

    let mut best: Option<(RunResult, Support, f64, f64)> = None;
    let mut path = Vec::with_capacity(config.lambdas.len());
    for &lambda in &config.lambdas {
        let mut penalty = PenaltySpec::new(config.family, lambda)?;
        if let Some(mask) = &config.mask {
            penalty = penalty.with_mask(mask.clone());
        }
        let spec = ObjectiveSpec::new(loss.clone(), penalty)?;
        let run = optimize_with(&spec, &init, &config.optimizer, evaluator).map_err(|e| e.source)?;
        let support = Support::from_threshold(run.best_corr.as_matrix(), config.zero_tol)?;
        let loss_value = spec.loss().value(&run.best_corr)?;
        let support_size = support.edge_count();
        let score = n * loss_value + log_n * support_size as f64;
        path.push(LambdaFit {
            lambda,
            loss: loss_value,
            objective: run.best_value,
            support_size,
            score,
        });
        let better = best.as_ref().map_or(true, |(_, _, _, s)| score < *s);
        if better {
            best = Some((run, support, lambda, score));
        }
    }
    let (run, support, lambda_used, _) = best.ok_or_else(|| Error::invalid("lambda", "empty grid"))?;
    let gamma_hat = run.best_corr.clone();
    let sigma_hat = recover_sigma(&gamma_hat, &moments.scale)?;
    Ok(EstimateResult {
        gamma_hat,
        sigma_hat,
        support,
        lambda_used,
        scale: moments.scale,
        zero_tol: config.zero_tol,
        optimizer: run,
        path,
    })
}
