//! Certified-robustness laboratory.
//!
//! A library plus experiment harness for studying how much data robust
//! classification needs:
//!
//! - [`hypercube`]: a synthetic family of distributions where accurate
//!   learning is trivial but robust learning needs exponentially many
//!   samples, together with the single-attack adversarial evaluation that
//!   exhibits the gap.
//! - [`cover`]: margin distributions on the unit cube and a 1-nearest-neighbor
//!   classifier with exact certified radii, matching the box-covering sample
//!   complexity upper bound.
//! - [`lipnet`]: 1-Lipschitz MLPs (AOL / CPL layers, MaxMin activation) with
//!   hand-written exact gradients, SGD + Nesterov and a one-cycle schedule,
//!   evaluated by certified robust accuracy.
//! - [`pca`]: principal-component analysis and subspace-projected dataset
//!   construction for robust/non-robust feature experiments.
//! - [`smoothing`]: Monte-Carlo randomized-smoothing prediction and certified
//!   radius estimation for any base classifier.
//! - [`experiments`]: data- and compute-scaling harnesses, nearest-neighbor
//!   distance profiles and intrinsic-dimension estimation.
//!
//! Everything is seeded through [`numerics::RandomSource`] sub-streams, so
//! every experiment is reproducible bit-for-bit on one platform.

pub mod cover;
pub mod datasets;
pub mod experiments;
pub mod hypercube;
pub mod lipnet;
pub mod numerics;
pub mod pca;
pub mod smoothing;

/// A classifier over flat feature vectors with a fixed number of classes.
///
/// Implemented by compiled Lipschitz networks and 1-NN models so the
/// smoothing estimator can wrap either.
pub trait Classifier {
    fn class_count(&self) -> usize;
    fn classify(&self, x: &[f64]) -> usize;
}
