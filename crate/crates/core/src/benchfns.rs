//! Classical nonconvex test functions evaluated on the scaled off-diagonal
//! entries of a correlation matrix.
//!
//! The identity plays the role of the origin. Every ordered off-diagonal
//! entry `c_pq` (`p != q`, row-major) is multiplied by the function's scale
//! and the resulting vector of length `d(d-1)` is fed to the usual formula.

use alloc::vec::Vec;
use core::f64::consts::{E, PI};

use crate::corrspace::{CorrelationMatrix, UnconstrainedVector};
use crate::error::{Error, Result};
use crate::objective::Pullback;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchFunction {
    Ackley,
    Griewank,
    Rosenbrock,
    Rastrigin,
}

impl BenchFunction {
    pub const ALL: [BenchFunction; 4] = [
        BenchFunction::Ackley,
        BenchFunction::Griewank,
        BenchFunction::Rosenbrock,
        BenchFunction::Rastrigin,
    ];

    pub fn default_scale(self) -> f64 {
        match self {
            BenchFunction::Ackley | BenchFunction::Rastrigin => 10.0,
            BenchFunction::Griewank | BenchFunction::Rosenbrock => 100.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchFunction::Ackley => "ackley",
            BenchFunction::Griewank => "griewank",
            BenchFunction::Rosenbrock => "rosenbrock",
            BenchFunction::Rastrigin => "rastrigin",
        }
    }

    /// The unscaled formula on a plain vector.
    pub fn classical(self, x: &[f64]) -> f64 {
        match self {
            BenchFunction::Ackley => ackley(x),
            BenchFunction::Griewank => griewank(x),
            BenchFunction::Rosenbrock => rosenbrock(x),
            BenchFunction::Rastrigin => rastrigin(x),
        }
    }
}

impl core::str::FromStr for BenchFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchFunction::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("benchmark function", alloc::format!("unknown name {s:?}")))
    }
}

fn ackley(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| libm::cos(2.0 * PI * v)).sum::<f64>() / n;
    -20.0 * libm::exp(-0.2 * libm::sqrt(sq)) - libm::exp(cs) + 20.0 + E
}

fn griewank(x: &[f64]) -> f64 {
    let sum = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod = x
        .iter()
        .enumerate()
        .map(|(i, v)| libm::cos(v / libm::sqrt((i + 1) as f64)))
        .product::<f64>();
    sum - prod + 1.0
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * libm::cos(2.0 * PI * v)).sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let a = w[1] - w[0] * w[0];
            let b = 1.0 - w[0];
            100.0 * a * a + b * b
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub function: BenchFunction,
    pub dim: usize,
    pub scale: f64,
}

impl BenchmarkSpec {
    pub fn new(function: BenchFunction, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dimension", "benchmarks need d >= 2"));
        }
        Ok(BenchmarkSpec {
            function,
            dim,
            scale: function.default_scale(),
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Scaled ordered off-diagonal entries, row-major.
    pub fn vectorize(&self, c: &CorrelationMatrix) -> Vec<f64> {
        let d = c.dim();
        let mut x = Vec::with_capacity(d * d.saturating_sub(1));
        for p in 0..d {
            for q in 0..d {
                if p != q {
                    x.push(self.scale * c.get(p, q));
                }
            }
        }
        x
    }

    pub fn value(&self, c: &CorrelationMatrix) -> Result<f64> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        Ok(self.function.classical(&self.vectorize(c)))
    }
}

impl Pullback for BenchmarkSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, phi: &[f64]) -> Result<f64> {
        let v = UnconstrainedVector::new(self.dim, phi.to_vec())?;
        BenchmarkSpec::value(self, &crate::corrspace::phi_to_corr(&crate::corrspace::wrap(&v)))
    }
}
