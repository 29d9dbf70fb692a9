//! Black-box optimization over the manifold of correlation matrices.
//!
//! Correlation matrices are parameterized through the unit-row Cholesky factor
//! and its hyperspherical angles. A periodic wrapping map turns the bounded
//! angle domain into all of `R^N` (`N = d(d-1)/2`), so any real vector maps to a
//! valid correlation matrix. A recursive coordinate pattern search with
//! geometric step reduction and warm restarts then minimizes arbitrary
//! objectives over that space: penalized likelihoods with SCAD/MCP penalties,
//! Frobenius fits, benchmark functions or opaque user callbacks.
//!
//! The crate is `no_std` (with `alloc`). Threading, file formats and the
//! command line live in the companion `bloc` crate.
//!
//! ```
//! use bloc_core::corrspace::{phi_to_corr, AngularVector};
//!
//! let omega = AngularVector::new(2, vec![core::f64::consts::FRAC_PI_6]).unwrap();
//! let c = phi_to_corr(&omega);
//! assert!((c.get(0, 1) - 0.5).abs() < 1e-15);
//! ```
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod benchfns;
pub mod corrspace;
pub mod datagen;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod penalty;
pub mod rmps;

pub use error::{Error, Result};
