//! Support recovery and estimation-error metrics.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Symmetric 0/1 edge indicator with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    dim: usize,
    edges: Vec<bool>,
}

impl Support {
    pub fn empty(dim: usize) -> Self {
        Support {
            dim,
            edges: alloc::vec![false; dim * dim],
        }
    }

    /// Edge `(i, j)` present iff `|m_ij| >= tol` and `m_ij != 0`.
    pub fn from_threshold(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let d = linalg::ensure_square(m)?;
        let mut s = Support::empty(d);
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v != 0.0 && libm::fabs(v) >= tol {
                    s.set(i, j, true);
                }
            }
        }
        Ok(s)
    }

    pub fn from_edges(dim: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut s = Support::empty(dim);
        for &(i, j) in pairs {
            if i >= dim || j >= dim || i == j {
                return Err(Error::invalid("support edge", alloc::format!("({i},{j}) in dimension {dim}")));
            }
            s.set(i, j, true);
        }
        Ok(s)
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        self.edges[i * self.dim + j] = on;
        self.edges[j * self.dim + i] = on;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.dim + j]
    }

    /// Number of unordered edges.
    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count() / 2
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| f64::from(u8::from(self.contains(i, j))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    pub rmse: f64,
    pub mad: f64,
    pub frob: f64,
    pub spec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn between(estimated: &Support, truth: &Support) -> Result<Self> {
        if estimated.dim() != truth.dim() {
            return Err(Error::DimensionMismatch {
                expected: truth.dim(),
                found: estimated.dim(),
            });
        }
        let mut c = Confusion::default();
        for i in 1..truth.dim() {
            for j in 0..i {
                match (estimated.contains(i, j), truth.contains(i, j)) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, false) => c.tn += 1,
                    (false, true) => c.r#fn += 1,
                }
            }
        }
        Ok(c)
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn tpr(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.r#fn)
    }

    pub fn fpr(&self) -> f64 {
        Self::ratio(self.fp, self.fp + self.tn)
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fneg) = (self.tp as f64, self.fp as f64, self.tn as f64, self.r#fn as f64);
        let den = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fneg) / libm::sqrt(den)
        }
    }
}

/// Compares an estimated correlation matrix and its support with the truth.
///
/// `rmse` and `mad` run over the unordered off-diagonal pairs; `frob` is the
/// Frobenius norm of the full difference and `spec` its spectral norm.
pub fn compute_metrics(
    estimate: &DMatrix<f64>,
    estimated_support: &Support,
    truth: &DMatrix<f64>,
    true_support: &Support,
) -> Result<Metrics> {
    let d = linalg::ensure_square(truth)?;
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: estimate.nrows(),
        });
    }
    let confusion = Confusion::between(estimated_support, true_support)?;
    let diff = estimate - truth;
    let pairs = d * d.saturating_sub(1) / 2;
    let (mut sq, mut abs) = (0.0, 0.0);
    for i in 1..d {
        for j in 0..i {
            let e = diff[(i, j)];
            sq += e * e;
            abs += libm::fabs(e);
        }
    }
    let (rmse, mad) = if pairs == 0 {
        (0.0, 0.0)
    } else {
        (libm::sqrt(sq / pairs as f64), abs / pairs as f64)
    };
    Ok(Metrics {
        tpr: confusion.tpr(),
        fpr: confusion.fpr(),
        mcc: confusion.mcc(),
        rmse,
        mad,
        frob: libm::sqrt(diff.iter().map(|e| e * e).sum::<f64>()),
        spec: linalg::spectral_norm_symmetric(&diff),
    })
}
