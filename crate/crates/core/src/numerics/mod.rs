//! Deterministic dense linear algebra, seeded random generation and the
//! special functions used by every other module.
//!
//! Everything here computes in `f64`. There is no global state: random
//! draws come from an explicit [`RandomSource`] and all operations are
//! pure functions of their inputs.

mod eig;
mod matrix;
mod rng;
mod special;

pub use eig::{power_iteration, sym_eig, SymEig};
pub use matrix::{set_matmul_workers, Matrix};
pub use rng::RandomSource;
pub use special::{erf, erfc, inv_norm_cdf, norm_cdf};

use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("matrix must be nonempty")]
    EmptyMatrix,
    #[error("matrix is not finite")]
    NonFinite,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max |S - S^T| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { deviation: f64, tolerance: f64 },
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// L-infinity norm.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Euclidean distance between two points.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// L-infinity distance between two points.
pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Scales `v` in place so that its Euclidean norm is 1. Zero vectors stay zero.
pub fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}
