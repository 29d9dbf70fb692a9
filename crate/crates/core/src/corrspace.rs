//! The chart `R^N -> angles -> correlation matrices`.
//!
//! A `d x d` correlation matrix `C` has a unique lower-triangular Cholesky
//! factor `L` with positive diagonal, and the unit diagonal of `C` forces every
//! row of `L` onto the unit sphere. Row 2 is `(sin w, cos w)`; row `m >= 3` is
//! written in hyperspherical coordinates `w_1..w_{m-1}`:
//!
//! ```text
//! l_mm        = cos w_1
//! l_m,m-1     = sin w_1 cos w_2
//! ...
//! l_m2        = sin w_1 ... sin w_{m-2} cos w_{m-1}
//! l_m1        = sin w_1 ... sin w_{m-2} sin w_{m-1}
//! ```
//!
//! Angles are stored flat, row-major: `(2,1), (3,1), (3,2), (4,1), ...`.
//! [`wrap`] folds an arbitrary real vector back into the angle domain, so
//! `phi_to_corr(wrap(x))` is a correlation matrix for every finite `x`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result, ValidationReport, Violation};
use crate::linalg;

/// Number of free angles for dimension `d`.
pub const fn n_angles(d: usize) -> usize {
    if d < 2 {
        0
    } else {
        d * (d - 1) / 2
    }
}

/// Position of an angle in the hyperspherical chart: row `m` (2..=d) and
/// within-row index `k` (1..m), both 1-based as in the formulas above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AngleIndex {
    pub row: usize,
    pub col: usize,
}

impl AngleIndex {
    /// Maps a 0-based position in the flat angle vector to its `(m, k)` label.
    pub fn from_flat(flat: usize, d: usize) -> Result<Self> {
        let len = n_angles(d);
        if flat >= len {
            return Err(Error::IndexOutOfRange {
                index: flat,
                dim: d,
                len,
            });
        }
        let mut m = 2;
        while n_angles(m) <= flat {
            m += 1;
        }
        Ok(AngleIndex {
            row: m,
            col: flat - n_angles(m - 1) + 1,
        })
    }

    pub fn to_flat(self, d: usize) -> Result<usize> {
        if self.row < 2 || self.row > d || self.col == 0 || self.col >= self.row {
            return Err(Error::IndexOutOfRange {
                index: self.row * d + self.col,
                dim: d,
                len: n_angles(d),
            });
        }
        Ok(n_angles(self.row - 1) + self.col - 1)
    }

    pub fn wrap_case(self) -> WrapCase {
        if self.row == 2 {
            WrapCase::Leading
        } else if self.col == 1 {
            WrapCase::Polar
        } else if self.col == self.row - 1 {
            WrapCase::Azimuth
        } else {
            WrapCase::Inner
        }
    }
}

/// The four folding rules of the wrapping map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WrapCase {
    /// The single angle of row 2, domain `[-pi/2, pi/2]`.
    Leading,
    /// First angle of a row `m >= 3`, domain `[0, pi/2]`.
    Polar,
    /// Angles `2..=m-2` of a row, domain `[0, pi]`.
    Inner,
    /// Last angle of a row `m >= 3`, domain `[0, 2pi)`.
    Azimuth,
}

impl WrapCase {
    pub fn period(self) -> f64 {
        match self {
            WrapCase::Leading | WrapCase::Polar => PI,
            WrapCase::Inner | WrapCase::Azimuth => TAU,
        }
    }

    /// Closed bounds of the angle domain (the azimuth upper bound is excluded).
    pub fn bounds(self) -> (f64, f64) {
        match self {
            WrapCase::Leading => (-FRAC_PI_2, FRAC_PI_2),
            WrapCase::Polar => (0.0, FRAC_PI_2),
            WrapCase::Inner => (0.0, PI),
            WrapCase::Azimuth => (0.0, TAU),
        }
    }

    /// One full period `[lo, lo + period)` of the unconstrained coordinate.
    pub fn period_window(self) -> (f64, f64) {
        match self {
            WrapCase::Leading => (-FRAC_PI_2, FRAC_PI_2),
            WrapCase::Polar => (0.0, PI),
            WrapCase::Inner | WrapCase::Azimuth => (0.0, TAU),
        }
    }

    pub fn wrap(self, theta: f64) -> f64 {
        match self {
            WrapCase::Leading => modulo(theta + FRAC_PI_2, PI) - FRAC_PI_2,
            WrapCase::Polar => FRAC_PI_2 - libm::fabs(modulo(theta, PI) - FRAC_PI_2),
            WrapCase::Inner => PI - libm::fabs(modulo(theta, TAU) - PI),
            WrapCase::Azimuth => modulo(theta, TAU),
        }
    }

    fn contains(self, angle: f64) -> bool {
        let (lo, hi) = self.bounds();
        match self {
            WrapCase::Azimuth => angle >= lo && angle < hi,
            _ => angle >= lo && angle <= hi,
        }
    }
}

/// `x mod p` in `[0, p)`.
fn modulo(x: f64, p: f64) -> f64 {
    let mut r = x % p;
    if r < 0.0 {
        r += p;
    }
    if r >= p {
        r = 0.0;
    }
    r
}

/// Wrap cases for every flat position of dimension `d`.
pub fn wrap_cases(d: usize) -> Vec<WrapCase> {
    (2..=d)
        .flat_map(|m| (1..m).map(move |k| AngleIndex { row: m, col: k }.wrap_case()))
        .collect()
}

/// Unconstrained parameter vector, the pre-image of [`wrap`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedVector {
    dim: usize,
    values: Vec<f64>,
}

impl UnconstrainedVector {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        check_len(dim, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(UnconstrainedVector { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl From<AngularVector> for UnconstrainedVector {
    fn from(a: AngularVector) -> Self {
        UnconstrainedVector {
            dim: a.dim,
            values: a.angles,
        }
    }
}

/// Hyperspherical angles of the unit-row Cholesky factor, flat row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularVector {
    dim: usize,
    angles: Vec<f64>,
}

impl AngularVector {
    pub fn new(dim: usize, angles: Vec<f64>) -> Result<Self> {
        check_len(dim, angles.len())?;
        for (i, (&a, case)) in angles.iter().zip(wrap_cases(dim)).enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if !case.contains(a) {
                let (lo, hi) = case.bounds();
                return Err(Error::invalid(
                    "angle",
                    alloc::format!("angle {i} = {a} outside [{lo}, {hi}]"),
                ));
            }
        }
        Ok(AngularVector { dim, angles })
    }

    /// Output of the wrapping map, already inside the domain.
    pub(crate) fn from_wrapped(dim: usize, angles: Vec<f64>) -> Self {
        debug_assert_eq!(angles.len(), n_angles(dim));
        AngularVector { dim, angles }
    }

    /// Angles of the identity matrix.
    pub fn zeros(dim: usize) -> Self {
        AngularVector {
            dim,
            angles: vec![0.0; n_angles(dim)],
        }
    }

    /// Independent uniform draws over each coordinate's domain.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let angles = wrap_cases(dim)
            .into_iter()
            .map(|case| {
                let (lo, hi) = case.bounds();
                lo + (hi - lo) * rng.random::<f64>()
            })
            .collect();
        AngularVector { dim, angles }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn get(&self, index: AngleIndex) -> Result<f64> {
        Ok(self.angles[index.to_flat(self.dim)?])
    }
}

fn check_len(dim: usize, len: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("dimension", "must be positive"));
    }
    let expected = n_angles(dim);
    if len != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: len,
        });
    }
    Ok(())
}

/// Applies the wrapping map component-wise.
pub fn wrap(phi: &UnconstrainedVector) -> AngularVector {
    AngularVector {
        dim: phi.dim,
        angles: wrap_values(phi.dim, &phi.values),
    }
}

pub(crate) fn wrap_values(d: usize, values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(wrap_cases(d))
        .map(|(&v, case)| case.wrap(v))
        .collect()
}

/// Lower-triangular factor with unit-norm rows and nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn from_angles(omega: &AngularVector) -> Self {
        let d = omega.dim;
        let rows = factor_rows(d, &omega.angles);
        CholeskyFactor {
            l: DMatrix::from_row_slice(d, d, &rows),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn row_norm(&self, row: usize) -> f64 {
        libm::sqrt((0..=row).map(|j| self.l[(row, j)] * self.l[(row, j)]).sum())
    }

    /// `L L^T` with the diagonal pinned to exactly one.
    pub fn gram(&self) -> CorrelationMatrix {
        let d = self.dim();
        let rows: Vec<f64> = self.l.transpose().iter().copied().collect();
        CorrelationMatrix {
            m: gram_rows(d, &rows),
        }
    }
}

/// Row-major `d x d` factor, zero above the diagonal.
fn factor_rows(d: usize, angles: &[f64]) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    if d == 0 {
        return l;
    }
    l[0] = 1.0;
    for m in 2..=d {
        fill_factor_row(m, &angles[n_angles(m - 1)..n_angles(m)], &mut l[(m - 1) * d..m * d]);
    }
    l
}

/// Row `m >= 2` (1-based) of the factor from that row's `m - 1` angles.
pub(crate) fn fill_factor_row(m: usize, w: &[f64], row: &mut [f64]) {
    let mut prod = 1.0;
    // column m-k+1 (1-based) carries cos w_k scaled by the preceding sines
    for (k, &wk) in w[..m - 2].iter().enumerate() {
        let (s, c) = libm::sincos(wk);
        row[m - 1 - k] = prod * c;
        prod *= s;
    }
    let (s, c) = libm::sincos(w[m - 2]);
    row[1] = prod * c;
    row[0] = prod * s;
}

/// Row-major factor for already-wrapped angles.
pub(crate) fn factor_from_wrapped(d: usize, angles: &[f64]) -> Vec<f64> {
    factor_rows(d, angles)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Entry `(i, j)`, `j < i`, of `L L^T` from row-major factor rows.
pub(crate) fn gram_entry(row_i: &[f64], row_j: &[f64], j: usize) -> f64 {
    dot(&row_j[..=j], &row_i[..=j])
}

fn gram_rows(d: usize, l: &[f64]) -> DMatrix<f64> {
    let mut c = DMatrix::identity(d, d);
    for i in 1..d {
        for j in 0..i {
            let v = gram_entry(&l[i * d..(i + 1) * d], &l[j * d..(j + 1) * d], j);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// `phi_to_corr` on already-wrapped angles without building the factor as
/// a matrix.
pub(crate) fn corr_from_wrapped(d: usize, angles: &[f64]) -> CorrelationMatrix {
    CorrelationMatrix {
        m: gram_rows(d, &factor_rows(d, angles)),
    }
}

/// Angles to correlation matrix.
pub fn phi_to_corr(omega: &AngularVector) -> CorrelationMatrix {
    CholeskyFactor::from_angles(omega).gram()
}

/// Correlation matrix to angles, through its Cholesky factor.
///
/// Angles are recovered with two-argument arctangents of partial row norms,
/// which is the arccos recursion without the division by a vanishing sine
/// product. Once the remaining part of a row is exactly zero every later
/// angle in that row is set to zero.
pub fn corr_to_phi(c: &CorrelationMatrix) -> Result<AngularVector> {
    let d = c.dim();
    let chol = linalg::cholesky(&c.m).ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: linalg::min_eigenvalue(&c.m),
    })?;
    let l = chol.l();
    let mut angles = Vec::with_capacity(n_angles(d));
    if d >= 2 {
        angles.push(libm::atan2(l[(1, 0)], l[(1, 1)]));
    }
    let mut tail = vec![0.0; d + 1];
    for m in 3..=d {
        let row = m - 1;
        // tail[j] = norm of (l_m1, ..., l_mj), 1-based j
        let mut acc = 0.0;
        for j in 1..=m {
            let v = l[(row, j - 1)];
            acc += v * v;
            tail[j] = libm::sqrt(acc);
        }
        for k in 1..=m - 2 {
            let col = m - k + 1;
            let w = if tail[col] == 0.0 {
                0.0
            } else {
                libm::atan2(tail[col - 1], l[(row, col - 1)])
            };
            angles.push(w);
        }
        let w = if tail[2] == 0.0 {
            0.0
        } else {
            modulo(libm::atan2(l[(row, 0)], l[(row, 1)]), TAU)
        };
        angles.push(w);
    }
    Ok(AngularVector { dim: d, angles })
}

/// Symmetric, unit-diagonal matrix. Matrices validated from raw data are
/// positive definite; images of [`phi_to_corr`] are positive semidefinite and
/// definite away from the boundary of the angle domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    m: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(d: usize) -> Self {
        CorrelationMatrix {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.m)
    }

    #[cfg(test)]
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        CorrelationMatrix { m }
    }
}

/// Checks and normalizes a raw matrix. Symmetry, unit diagonal and a minimum
/// eigenvalue above `tol` are required; within-tolerance asymmetry and
/// diagonal drift are repaired. Every violated check is reported.
pub fn validate_corr(raw: &DMatrix<f64>, tol: f64) -> Result<CorrelationMatrix> {
    let d = linalg::ensure_square(raw)?;
    if d == 0 {
        return Err(Error::invalid("dimension", "must be positive"));
    }
    let mut report = ValidationReport::default();
    for i in 0..d {
        for j in 0..d {
            if !raw[(i, j)].is_finite() {
                report.violations.push(Violation::NonFinite { row: i, col: j });
            }
        }
    }
    if !report.violations.is_empty() {
        return Err(Error::InvalidCorrelation(report));
    }
    for i in 0..d {
        let v = raw[(i, i)];
        if libm::fabs(v - 1.0) > tol {
            report
                .violations
                .push(Violation::DiagonalNotUnit { index: i, value: v });
        }
        for j in (i + 1)..d {
            let diff = libm::fabs(raw[(i, j)] - raw[(j, i)]);
            if diff > tol {
                report.violations.push(Violation::Asymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
            let v = raw[(i, j)];
            if libm::fabs(v) > 1.0 + tol {
                report.violations.push(Violation::OutOfRange {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let mut m = (raw + raw.transpose()) * 0.5;
    for i in 0..d {
        m[(i, i)] = 1.0;
    }
    let min_eigenvalue = linalg::min_eigenvalue(&m);
    if min_eigenvalue <= tol {
        report
            .violations
            .push(Violation::NotPositiveDefinite { min_eigenvalue });
    }
    if report.violations.is_empty() {
        Ok(CorrelationMatrix { m })
    } else {
        Err(Error::InvalidCorrelation(report))
    }
}
