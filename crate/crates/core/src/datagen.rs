//! Synthetic truths and Gaussian samples for simulation studies.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corrspace::{phi_to_corr, AngularVector};
use crate::error::{Error, Result};
use crate::estimate::DataMatrix;
use crate::linalg;
use crate::metrics::Support;

const MAX_SPARSE_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthDesign {
    /// Independent random 5x5 correlation blocks on the diagonal.
    BlockRandom5,
    /// Random sparse pattern with off-diagonal values from U[0.3, 0.6].
    UniformSparse,
    /// `K = d / 10` equal blocks with 0.8 inside each block.
    BlockFixed,
    /// `0.75^|i-j|`.
    Toeplitz,
    /// `(1 - |i-j|/10)` for `|i-j| <= 10`, zero beyond.
    Banded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub design: TruthDesign,
    pub dim: usize,
    /// Target fraction of zero off-diagonal pairs; only used by
    /// [`TruthDesign::UniformSparse`].
    pub sparsity: f64,
    pub seed: u64,
}

impl TruthSpec {
    pub fn new(design: TruthDesign, dim: usize) -> Self {
        TruthSpec {
            design,
            dim,
            sparsity: 0.95,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sparsity(mut self, sparsity: f64) -> Self {
        self.sparsity = sparsity;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        match self.design {
            TruthDesign::BlockRandom5 if self.dim % 5 != 0 => {
                Err(Error::invalid("dimension", "must be divisible by 5 for 5x5 blocks"))
            }
            TruthDesign::BlockFixed if self.dim % 10 != 0 => {
                Err(Error::invalid("dimension", "must be divisible by 10 for fixed blocks"))
            }
            TruthDesign::UniformSparse if !(0.0..=1.0).contains(&self.sparsity) => {
                Err(Error::invalid("sparsity", "must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// Truth matrix (unit diagonal for every design) and its off-diagonal support.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub matrix: DMatrix<f64>,
    pub support: Support,
}

pub fn gen_truth(spec: &TruthSpec) -> Result<Truth> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let matrix = match spec.design {
        TruthDesign::BlockRandom5 => {
            let mut m = DMatrix::identity(d, d);
            for b in 0..d / 5 {
                let block = phi_to_corr(&AngularVector::random(5, &mut rng));
                m.view_mut((5 * b, 5 * b), (5, 5)).copy_from(block.as_matrix());
            }
            m
        }
        TruthDesign::UniformSparse => uniform_sparse(d, spec.sparsity, &mut rng)?,
        TruthDesign::BlockFixed => {
            let size = 10;
            DMatrix::from_fn(d, d, |i, j| {
                let same = i / size == j / size;
                0.2 * f64::from(u8::from(i == j)) + 0.8 * f64::from(u8::from(same))
            })
        }
        TruthDesign::Toeplitz => DMatrix::from_fn(d, d, |i, j| libm::pow(0.75, i.abs_diff(j) as f64)),
        TruthDesign::Banded => DMatrix::from_fn(d, d, |i, j| {
            let k = i.abs_diff(j);
            if k <= 10 {
                1.0 - k as f64 / 10.0
            } else {
                0.0
            }
        }),
    };
    let support = Support::from_threshold(&matrix, 0.0)?;
    Ok(Truth { matrix, support })
}

fn uniform_sparse(d: usize, sparsity: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let pairs: Vec<(usize, usize)> = (1..d).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let count = libm::round((1.0 - sparsity) * pairs.len() as f64) as usize;
    for _ in 0..MAX_SPARSE_ATTEMPTS {
        let mut m = DMatrix::identity(d, d);
        for k in index::sample(rng, pairs.len(), count) {
            let (i, j) = pairs[k];
            let v = rng.random_range(0.3..=0.6);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        if linalg::is_positive_definite(&m) {
            return Ok(m);
        }
    }
    Err(Error::invalid(
        "sparsity",
        alloc::format!("no positive definite draw in {MAX_SPARSE_ATTEMPTS} attempts"),
    ))
}

/// `n` rows of `N(0, sigma)`: `X = Z L^T` with `L` the Cholesky factor.
pub fn sample_mvn(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    let d = linalg::ensure_square(sigma)?;
    let chol = linalg::cholesky(sigma).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: linalg::min_eigenvalue(sigma),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row-major fill so the stream order does not depend on storage layout.
    let mut z = DMatrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            z[(r, c)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let x = z * chol.l().transpose();
    DataMatrix::new(x)
}
