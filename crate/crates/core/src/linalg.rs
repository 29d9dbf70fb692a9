//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

pub fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> alloc::vec::Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut values: alloc::vec::Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest absolute eigenvalue; the spectral norm for symmetric input.
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)))
}

pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    m.clone().cholesky()
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    cholesky(m).is_some()
}

/// `||L^-1 B||_F^2` for lower-triangular `L` (entries above the diagonal
/// are ignored) and lower-triangular `B`. With `C = L L^T` and `T = B B^T`
/// this is `tr(C^-1 T)`.
pub fn lower_solve_frobenius_sq(l: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = l.nrows();
    let mut x = alloc::vec![0.0; d];
    let mut total = 0.0;
    for j in 0..d {
        // column j of L^-1 B is zero above row j
        for i in j..d {
            let mut acc = b[(i, j)];
            for k in j..i {
                acc -= l[(i, k)] * x[k];
            }
            let v = acc / l[(i, i)];
            x[i] = v;
            total += v * v;
        }
    }
    total
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max(libm::fabs(x - y)))
}
