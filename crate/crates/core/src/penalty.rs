//! Coordinate-wise penalties on off-diagonal correlations.

use nalgebra::DMatrix;

use crate::corrspace::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyFamily {
    None,
    L1,
    /// Smoothly clipped absolute deviation with shape `a > 2`.
    Scad { a: f64 },
    /// Minimax concave penalty with shape `gamma > 1`.
    Mcp { gamma: f64 },
}

impl PenaltyFamily {
    pub fn scad() -> Self {
        PenaltyFamily::Scad { a: DEFAULT_SCAD_A }
    }

    pub fn mcp() -> Self {
        PenaltyFamily::Mcp {
            gamma: DEFAULT_MCP_GAMMA,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            PenaltyFamily::Scad { a } if !(a > 2.0) || !a.is_finite() => {
                Err(Error::invalid("SCAD shape", "a must exceed 2"))
            }
            PenaltyFamily::Mcp { gamma } if !(gamma > 1.0) || !gamma.is_finite() => {
                Err(Error::invalid("MCP shape", "gamma must exceed 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Symmetric nonnegative weights on off-diagonal pairs; zero diagonal.
/// A 0/1 mask restricts penalization to selected pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMask {
    weights: DMatrix<f64>,
}

impl PenaltyMask {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let d = linalg::ensure_square(&weights)?;
        for i in 0..d {
            if weights[(i, i)] != 0.0 {
                return Err(Error::invalid("penalty mask", "diagonal must be zero"));
            }
            for j in 0..d {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(
                        "penalty mask",
                        alloc::format!("entry ({i},{j}) = {w} is not a nonnegative weight"),
                    ));
                }
                if w != weights[(j, i)] {
                    return Err(Error::invalid("penalty mask", "must be symmetric"));
                }
            }
        }
        Ok(PenaltyMask { weights })
    }

    /// Cover that penalizes only pairs in different groups.
    pub fn cross_group(groups: &[usize]) -> Self {
        let d = groups.len();
        let weights = DMatrix::from_fn(d, d, |i, j| f64::from(u8::from(groups[i] != groups[j])));
        PenaltyMask { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    mask: Option<PenaltyMask>,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be a finite nonnegative number"));
        }
        family.validate()?;
        Ok(PenaltySpec {
            family,
            lambda,
            mask: None,
        })
    }

    pub fn none() -> Self {
        PenaltySpec {
            family: PenaltyFamily::None,
            lambda: 0.0,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: PenaltyMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mask(&self) -> Option<&PenaltyMask> {
        self.mask.as_ref()
    }

    /// `p_lambda(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::NegativeArgument(t));
        }
        Ok(self.value_unchecked(t))
    }

    fn value_unchecked(&self, t: f64) -> f64 {
        let lam = self.lambda;
        match self.family {
            PenaltyFamily::None => 0.0,
            PenaltyFamily::L1 => lam * t,
            PenaltyFamily::Scad { a } => {
                if t <= lam {
                    lam * t
                } else if t <= a * lam {
                    (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    lam * lam * (a + 1.0) / 2.0
                }
            }
            PenaltyFamily::Mcp { gamma } => {
                if t <= gamma * lam {
                    lam * t - t * t / (2.0 * gamma)
                } else {
                    gamma * lam * lam / 2.0
                }
            }
        }
    }

    /// `p'_lambda(t)` for `t > 0`. SCAD and MCP are continuously
    /// differentiable on `t > 0`, so no kink needs special handling here.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid("penalty derivative argument", "must be positive"));
        }
        let lam = self.lambda;
        Ok(match self.family {
            PenaltyFamily::None => 0.0,
            PenaltyFamily::L1 => lam,
            PenaltyFamily::Scad { a } => {
                if t <= lam {
                    lam
                } else if t <= a * lam {
                    (a * lam - t) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyFamily::Mcp { gamma } => {
                if t <= gamma * lam {
                    lam - t / gamma
                } else {
                    0.0
                }
            }
        })
    }

    /// `sum_{i != j} w_ij p_lambda(|c_ij|)` over ordered pairs, so each
    /// unordered pair contributes twice.
    pub fn sum(&self, c: &CorrelationMatrix) -> Result<f64> {
        self.sum_matrix(c.as_matrix())
    }

    pub(crate) fn sum_matrix(&self, c: &DMatrix<f64>) -> Result<f64> {
        let d = c.nrows();
        if let Some(mask) = &self.mask {
            if mask.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: mask.dim(),
                });
            }
        }
        if !self.is_active() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for i in 1..d {
            total += self.row_term(i, |j| c[(i, j)]);
        }
        Ok(2.0 * total)
    }

    pub(crate) fn is_active(&self) -> bool {
        !matches!(self.family, PenaltyFamily::None) && self.lambda != 0.0
    }

    /// `sum_{j<i} w_ij p(|c_ij|)`; the full sum is twice the sum of these.
    pub(crate) fn row_term(&self, i: usize, entry: impl Fn(usize) -> f64) -> f64 {
        let mut total = 0.0;
        for j in 0..i {
            let w = self.mask.as_ref().map_or(1.0, |m| m.weight(i, j));
            if w != 0.0 {
                total += w * self.value_unchecked(libm::fabs(entry(j)));
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrspace::validate_corr;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn value_examples() {
        let scad = PenaltySpec::new(PenaltyFamily::scad(), 0.1).unwrap();
        assert_eq!(scad.value(0.0).unwrap(), 0.0);
        assert!(close(scad.value(1.0).unwrap(), 0.0235));
        let mcp = PenaltySpec::new(PenaltyFamily::mcp(), 0.2).unwrap();
        assert!(close(mcp.value(1.0).unwrap(), 0.06));
        let l1 = PenaltySpec::new(PenaltyFamily::L1, 0.5).unwrap();
        assert!(close(l1.value(0.4).unwrap(), 0.2));
        assert_eq!(PenaltySpec::none().value(3.0).unwrap(), 0.0);
        assert!(matches!(scad.value(-0.1), Err(Error::NegativeArgument(_))));
    }

    #[test]
    fn derivative_examples() {
        let scad = PenaltySpec::new(PenaltyFamily::scad(), 0.1).unwrap();
        assert!(close(scad.derivative(0.05).unwrap(), 0.1));
        assert_eq!(scad.derivative(1.0).unwrap(), 0.0);
        let mcp = PenaltySpec::new(PenaltyFamily::mcp(), 0.2).unwrap();
        assert!(close(mcp.derivative(0.3).unwrap(), 0.1));
        assert!(scad.derivative(0.0).is_err());
        assert!(scad.derivative(-1.0).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(PenaltySpec::new(PenaltyFamily::Scad { a: 2.0 }, 0.1).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::Mcp { gamma: 1.0 }, 0.1).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::L1, -0.1).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::L1, f64::NAN).is_err());
    }

    fn corr3_all(v: f64) -> CorrelationMatrix {
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { v });
        validate_corr(&m, 1e-12).unwrap()
    }

    #[test]
    fn sum_examples() {
        let l1 = PenaltySpec::new(PenaltyFamily::L1, 0.5).unwrap();
        assert_eq!(l1.sum(&CorrelationMatrix::identity(4)).unwrap(), 0.0);

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let c = validate_corr(&m, 1e-12).unwrap();
        assert!(close(l1.sum(&c).unwrap(), 0.4));

        let mut w = DMatrix::from_element(3, 3, 1.0);
        w.fill_diagonal(0.0);
        w[(0, 1)] = 0.0;
        w[(1, 0)] = 0.0;
        let masked = l1.clone().with_mask(PenaltyMask::new(w).unwrap());
        assert!(close(masked.sum(&corr3_all(0.4)).unwrap(), 0.8));
    }

    #[test]
    fn mask_validation_and_dimension() {
        let mut w = DMatrix::from_element(3, 3, 1.0);
        assert!(PenaltyMask::new(w.clone()).is_err());
        w.fill_diagonal(0.0);
        w[(0, 1)] = 0.5;
        assert!(PenaltyMask::new(w.clone()).is_err());
        w[(0, 1)] = -1.0;
        w[(1, 0)] = -1.0;
        assert!(PenaltyMask::new(w).is_err());

        let l1 = PenaltySpec::new(PenaltyFamily::L1, 0.5)
            .unwrap()
            .with_mask(PenaltyMask::cross_group(&[0, 0]));
        assert!(matches!(
            l1.sum(&corr3_all(0.1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cross_group_cover() {
        let m = PenaltyMask::cross_group(&[0, 0, 1]);
        assert_eq!(m.weight(0, 1), 0.0);
        assert_eq!(m.weight(0, 2), 1.0);
        assert_eq!(m.weight(2, 2), 0.0);
    }
}
