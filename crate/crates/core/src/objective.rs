//! Losses, the penalized objective `g = h + penalty`, and its pullback
//! `f(x) = g(phi_to_corr(wrap(x)))` to the unconstrained space.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::corrspace::{self, dot, gram_entry, n_angles, CorrelationMatrix, WrapCase};
use crate::error::{Error, Result};
use crate::linalg;
use crate::penalty::PenaltySpec;

/// Value substituted when a candidate cannot be scored (singular matrix
/// under the Gaussian loss, non-finite callback output). It compares
/// greater than every finite objective value.
pub const INFEASIBLE: f64 = f64::MAX;

/// A real-valued function of `R^N`, the thing the pattern search minimizes.
pub trait Pullback: Sync {
    /// Matrix dimension `d`; the parameter length is `d(d-1)/2`.
    fn dim(&self) -> usize;

    fn n_params(&self) -> usize {
        n_angles(self.dim())
    }

    fn value(&self, phi: &[f64]) -> Result<f64>;

    /// Whether [`Pullback::value`] may run on several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }

    /// Cheap evaluation of single-coordinate moves away from `base`, if the
    /// function supports it. Must agree exactly with [`Pullback::value`].
    fn neighborhood(&self, _base: &[f64]) -> Option<Box<dyn Neighborhood + Sync + '_>> {
        None
    }
}

/// Values at points that differ from a fixed base in one coordinate.
pub trait Neighborhood {
    /// Value at the base with coordinate `index` replaced by `value`.
    fn value_at(&self, index: usize, value: f64) -> Result<f64>;
}

/// Adapts a plain closure over the unconstrained vector.
pub struct FnPullback<F> {
    dim: usize,
    f: F,
}

impl<F> FnPullback<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnPullback { dim, f }
    }
}

impl<F> fmt::Debug for FnPullback<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPullback").field("dim", &self.dim).finish()
    }
}

impl<F> Pullback for FnPullback<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, phi: &[f64]) -> Result<f64> {
        Ok((self.f)(phi))
    }
}

pub type LossCallback = Arc<dyn Fn(&CorrelationMatrix) -> Result<f64> + Send + Sync>;

/// User-supplied loss. The callback must be deterministic; set
/// `concurrent` to false if it cannot be called from several threads.
#[derive(Clone)]
pub struct BlackBoxLoss {
    dim: usize,
    callback: LossCallback,
    concurrent: bool,
}

impl BlackBoxLoss {
    pub fn new(dim: usize, callback: LossCallback, concurrent: bool) -> Self {
        BlackBoxLoss {
            dim,
            callback,
            concurrent,
        }
    }
}

impl fmt::Debug for BlackBoxLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxLoss")
            .field("dim", &self.dim)
            .field("concurrent", &self.concurrent)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum LossSpec {
    /// `tr(C^-1 T) + log det C` against a positive definite target `T`;
    /// `factor` is the lower Cholesky factor of `T`.
    GaussianNll {
        target: CorrelationMatrix,
        factor: DMatrix<f64>,
    },
    /// `||C - T||_F^2` over all `d^2` entries.
    FrobeniusSq { target: DMatrix<f64> },
    BlackBox(BlackBoxLoss),
}

impl LossSpec {
    pub fn gaussian(target: CorrelationMatrix) -> Result<Self> {
        let chol = linalg::cholesky(target.as_matrix()).ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: target.min_eigenvalue(),
        })?;
        Ok(LossSpec::GaussianNll {
            factor: chol.l(),
            target,
        })
    }

    /// The target may be singular (e.g. a sample correlation with `d >= n`).
    pub fn frobenius(target: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_square(&target)?;
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(LossSpec::FrobeniusSq { target })
    }

    pub fn black_box<F>(dim: usize, f: F, concurrent: bool) -> Self
    where
        F: Fn(&CorrelationMatrix) -> Result<f64> + Send + Sync + 'static,
    {
        LossSpec::BlackBox(BlackBoxLoss::new(dim, Arc::new(f), concurrent))
    }

    pub fn dim(&self) -> usize {
        match self {
            LossSpec::GaussianNll { target, .. } => target.dim(),
            LossSpec::FrobeniusSq { target } => target.nrows(),
            LossSpec::BlackBox(b) => b.dim,
        }
    }

    pub fn concurrent_safe(&self) -> bool {
        match self {
            LossSpec::BlackBox(b) => b.concurrent,
            _ => true,
        }
    }

    pub fn value(&self, c: &CorrelationMatrix) -> Result<f64> {
        let d = self.dim();
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        if let LossSpec::BlackBox(b) = self {
            return (b.callback)(c);
        }
        let mut state = RowState::from_corr(c);
        state.refresh(0, self, None);
        state.loss_total().ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: c.min_eigenvalue(),
        })
    }
}

/// Row-by-row evaluation of the built-in losses and the penalty.
///
/// Row `i` of every intermediate (Cholesky factor of `C`, `L_C^-1 B`, the
/// loss and penalty terms) depends on rows `<= i` only, and the totals are
/// summed in row order. Moving one angle changes one row of the angle
/// factor, hence one row and column of `C`, so recomputing from that row on
/// gives the same bits as a full pass.
#[derive(Clone)]
struct RowState {
    d: usize,
    /// Angle factor, row-major. Empty when built from a matrix.
    factor: Vec<f64>,
    /// Lower triangle of `C`, row-major.
    c: Vec<f64>,
    chol: Vec<f64>,
    solve: Vec<f64>,
    loss: Vec<f64>,
    pen: Vec<f64>,
    /// First row where the Cholesky factorization broke down.
    failed: Option<usize>,
}

impl RowState {
    fn with_lower(d: usize, factor: Vec<f64>, c: Vec<f64>) -> Self {
        RowState {
            d,
            factor,
            c,
            chol: vec![0.0; d * d],
            solve: vec![0.0; d * d],
            loss: vec![0.0; d],
            pen: vec![0.0; d],
            failed: None,
        }
    }

    fn from_corr(c: &CorrelationMatrix) -> Self {
        let d = c.dim();
        let mut lower = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                lower[i * d + j] = c.get(i, j);
            }
        }
        RowState::with_lower(d, Vec::new(), lower)
    }

    fn from_angles(d: usize, angles: &[f64]) -> Self {
        let factor = corrspace::factor_from_wrapped(d, angles);
        let mut lower = vec![0.0; d * d];
        for i in 0..d {
            lower[i * d + i] = 1.0;
            for j in 0..i {
                lower[i * d + j] = gram_entry(&factor[i * d..(i + 1) * d], &factor[j * d..(j + 1) * d], j);
            }
        }
        RowState::with_lower(d, factor, lower)
    }

    /// Replaces factor row `r` and the matching row and column of `C`.
    fn set_factor_row(&mut self, r: usize, angles: &[f64]) {
        let d = self.d;
        corrspace::fill_factor_row(r + 1, angles, &mut self.factor[r * d..(r + 1) * d]);
        let f = &self.factor;
        let row_r = &f[r * d..(r + 1) * d];
        for j in 0..r {
            self.c[r * d + j] = gram_entry(row_r, &f[j * d..(j + 1) * d], j);
        }
        for i in r + 1..d {
            self.c[i * d + r] = gram_entry(&f[i * d..(i + 1) * d], row_r, r);
        }
    }

    fn refresh(&mut self, from: usize, loss: &LossSpec, penalty: Option<&PenaltySpec>) {
        if self.failed.is_some_and(|f| f < from) {
            return;
        }
        self.failed = None;
        for i in from..self.d {
            let ok = match loss {
                LossSpec::GaussianNll { factor, .. } => self.gaussian_row(i, factor),
                LossSpec::FrobeniusSq { target } => {
                    self.frobenius_row(i, target);
                    true
                }
                LossSpec::BlackBox(_) => unreachable!("black-box losses are not evaluated row-wise"),
            };
            if !ok {
                self.failed = Some(i);
                return;
            }
            if let Some(p) = penalty {
                let row = &self.c[i * self.d..];
                self.pen[i] = p.row_term(i, |j| row[j]);
            }
        }
    }

    fn gaussian_row(&mut self, i: usize, b: &DMatrix<f64>) -> bool {
        let d = self.d;
        let (done, rest) = self.chol.split_at_mut(i * d);
        let li = &mut rest[..d];
        for j in 0..i {
            let lj = &done[j * d..j * d + j + 1];
            li[j] = (self.c[i * d + j] - dot(&li[..j], &lj[..j])) / lj[j];
        }
        let s = self.c[i * d + i] - dot(&li[..i], &li[..i]);
        if !(s > 0.0) {
            return false;
        }
        li[i] = libm::sqrt(s);
        // row i of L_C^-1 B, which is lower triangular
        for j in 0..=i {
            let mut acc = b[(i, j)];
            for k in j..i {
                acc -= li[k] * self.solve[k * d + j];
            }
            self.solve[i * d + j] = acc / li[i];
        }
        let xi = &self.solve[i * d..i * d + i + 1];
        self.loss[i] = dot(xi, xi) + 2.0 * libm::log(li[i]);
        true
    }

    fn frobenius_row(&mut self, i: usize, t: &DMatrix<f64>) {
        let row = &self.c[i * self.d..];
        let diag = row[i] - t[(i, i)];
        let mut total = diag * diag;
        for j in 0..i {
            let a = row[j] - t[(i, j)];
            let b = row[j] - t[(j, i)];
            total += a * a + b * b;
        }
        self.loss[i] = total;
    }

    fn loss_total(&self) -> Option<f64> {
        if self.failed.is_some() {
            return None;
        }
        let mut total = 0.0;
        for v in &self.loss {
            total += v;
        }
        Some(total)
    }

    fn penalty_total(&self) -> f64 {
        let mut total = 0.0;
        for v in self.pen.iter().skip(1) {
            total += v;
        }
        2.0 * total
    }
}

/// Loss plus penalty: the function minimized over correlation matrices.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    loss: LossSpec,
    penalty: PenaltySpec,
}

impl ObjectiveSpec {
    pub fn new(loss: LossSpec, penalty: PenaltySpec) -> Result<Self> {
        if let Some(mask) = penalty.mask() {
            if mask.dim() != loss.dim() {
                return Err(Error::DimensionMismatch {
                    expected: loss.dim(),
                    found: mask.dim(),
                });
            }
        }
        Ok(ObjectiveSpec { loss, penalty })
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn value(&self, c: &CorrelationMatrix) -> Result<f64> {
        Ok(self.loss.value(c)? + self.penalty.sum(c)?)
    }

    /// Objective at `phi_to_corr(wrap(phi))`. Singular matrices under the
    /// Gaussian loss and non-finite values score [`INFEASIBLE`]; other
    /// failures (e.g. a crashed black-box process) are returned as errors.
    pub fn pullback_value(&self, phi: &corrspace::UnconstrainedVector) -> Result<f64> {
        self.pullback_raw(phi.values())
    }

    fn pullback_raw(&self, phi: &[f64]) -> Result<f64> {
        let d = self.loss.dim();
        if phi.len() != n_angles(d) {
            return Err(Error::DimensionMismatch {
                expected: n_angles(d),
                found: phi.len(),
            });
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let angles = corrspace::wrap_values(d, phi);
        if matches!(self.loss, LossSpec::BlackBox(_)) {
            let c = corrspace::corr_from_wrapped(d, &angles);
            return match self.value(&c) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) | Err(Error::NotPositiveDefinite { .. }) => Ok(INFEASIBLE),
                Err(Error::Evaluation(msg)) => Err(Error::Evaluation(msg)),
                Err(other) => Err(Error::Evaluation(other.to_string())),
            };
        }
        let mut state = RowState::from_angles(d, &angles);
        state.refresh(0, &self.loss, self.active_penalty());
        Ok(self.finish(&state))
    }

    fn active_penalty(&self) -> Option<&PenaltySpec> {
        self.penalty.is_active().then_some(&self.penalty)
    }

    /// Same total as `loss.value(c) + penalty.sum(c)`.
    fn finish(&self, state: &RowState) -> f64 {
        let Some(loss) = state.loss_total() else {
            return INFEASIBLE;
        };
        let pen = if self.penalty.is_active() {
            state.penalty_total()
        } else {
            0.0
        };
        let v = loss + pen;
        if v.is_finite() {
            v
        } else {
            INFEASIBLE
        }
    }
}

struct RowNeighborhood<'a> {
    spec: &'a ObjectiveSpec,
    angles: Vec<f64>,
    cases: Vec<WrapCase>,
    base: RowState,
}

impl Neighborhood for RowNeighborhood<'_> {
    fn value_at(&self, index: usize, value: f64) -> Result<f64> {
        let Some(case) = self.cases.get(index) else {
            return Err(Error::invalid("index", "outside the parameter vector"));
        };
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        // 1-based row m holds flat positions n_angles(m-1)..n_angles(m)
        let mut m = 2;
        while n_angles(m) <= index {
            m += 1;
        }
        let start = n_angles(m - 1);
        let mut row = self.angles[start..n_angles(m)].to_vec();
        row[index - start] = case.wrap(value);
        let mut state = self.base.clone();
        state.set_factor_row(m - 1, &row);
        state.refresh(m - 1, &self.spec.loss, self.spec.active_penalty());
        Ok(self.spec.finish(&state))
    }
}

impl Pullback for ObjectiveSpec {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value(&self, phi: &[f64]) -> Result<f64> {
        self.pullback_raw(phi)
    }

    fn concurrent_safe(&self) -> bool {
        self.loss.concurrent_safe()
    }

    fn neighborhood(&self, base: &[f64]) -> Option<Box<dyn Neighborhood + Sync + '_>> {
        let d = self.loss.dim();
        if matches!(self.loss, LossSpec::BlackBox(_))
            || base.len() != n_angles(d)
            || base.iter().any(|v| !v.is_finite())
        {
            return None;
        }
        let angles = corrspace::wrap_values(d, base);
        let mut state = RowState::from_angles(d, &angles);
        state.refresh(0, &self.loss, self.active_penalty());
        Some(Box::new(RowNeighborhood {
            spec: self,
            cases: corrspace::wrap_cases(d),
            angles,
            base: state,
        }))
    }
}
