//! Margin distributions on the unit cube, a 1-nearest-neighbor classifier
//! with exact certified radii, and the box-covering experiment matching the
//! sample-complexity upper bound.
//!
//! The margin distribution labels a point by the parity of its grid cell
//! (cell width `w`) and rejects anything within `delta` of a grid plane, so
//! differently-labeled points are at least `2*delta` apart in L-infinity
//! and the Bayes classifier is robust with margin `delta`.

use crate::datasets::LabeledDataset;
use crate::numerics::{dist2, dist_inf, Matrix, RandomSource};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("margin configuration infeasible: 2*delta = {two_delta} must be < cell width {w}")]
    MarginTooWide { two_delta: f64, w: f64 },
    #[error("estimated acceptance probability {0:.4} below 1%; delta too close to w/2")]
    AcceptanceTooLow(f64),
    #[error("delta must satisfy 0 < delta <= 1, got {0}")]
    BadDelta(f64),
    #[error("dimension must be >= 1")]
    BadDimension,
    #[error("model is empty")]
    EmptyModel,
    #[error("model stores {points} points but {labels} labels")]
    LabelMismatch { points: usize, labels: usize },
    #[error(transparent)]
    Data(#[from] crate::datasets::DataError),
}

/// Distance used by the nearest-neighbor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    LInf,
    L2,
}

impl Metric {
    #[inline]
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::LInf => dist_inf(a, b),
            Metric::L2 => dist2(a, b),
        }
    }
}

/// Distribution on `[0,1]^d` with an exact L-infinity margin `delta` around
/// the decision boundary of the grid-parity labeling.
#[derive(Debug, Clone)]
pub struct MarginDistribution {
    pub d: usize,
    pub delta: f64,
    pub cell_width: f64,
}

impl MarginDistribution {
    pub fn new(d: usize, delta: f64, cell_width: f64) -> Result<Self, CoverError> {
        if d == 0 {
            return Err(CoverError::BadDimension);
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CoverError::BadDelta(delta));
        }
        if 2.0 * delta >= cell_width {
            return Err(CoverError::MarginTooWide { two_delta: 2.0 * delta, w: cell_width });
        }
        let dist = Self { d, delta, cell_width };
        let p = dist.acceptance_probability();
        if p < 0.01 {
            return Err(CoverError::AcceptanceTooLow(p));
        }
        Ok(dist)
    }

    /// Parity of the grid cell: the ground-truth label in {0, 1}.
    pub fn label(&self, x: &[f64]) -> usize {
        let mut parity = 0usize;
        for &v in x {
            parity += (v / self.cell_width).floor() as usize;
        }
        parity % 2
    }

    /// L-infinity distance from `x` to the nearest grid plane (the decision
    /// boundary of [`Self::label`]).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let mut min = f64::INFINITY;
        for &v in x {
            let r = v.rem_euclid(self.cell_width);
            min = min.min(r.min(self.cell_width - r));
        }
        min
    }

    /// Estimated probability that a uniform draw survives the margin
    /// rejection, `(1 - 2*delta/w)^d`.
    pub fn acceptance_probability(&self) -> f64 {
        (1.0 - 2.0 * self.delta / self.cell_width).powi(self.d as i32)
    }
}

/// Rejection-samples `n` points uniform on `[0,1]^d` conditioned on lying at
/// least `delta` from the label boundary.
pub fn sample_margin(
    dist: &MarginDistribution,
    n: usize,
    rng: &mut RandomSource,
) -> Result<LabeledDataset, CoverError> {
    let mut features = Matrix::zeros(n, dist.d);
    let mut labels = Vec::with_capacity(n);
    let mut buf = vec![0.0; dist.d];
    for i in 0..n {
        loop {
            for v in buf.iter_mut() {
                *v = rng.uniform();
            }
            if dist.boundary_distance(&buf) >= dist.delta {
                break;
            }
        }
        features.row_mut(i).copy_from_slice(&buf);
        labels.push(dist.label(&buf));
    }
    Ok(LabeledDataset::new(features, labels, (1, 1, dist.d), 2)?)
}

/// Brute-force 1-nearest-neighbor model.
#[derive(Debug, Clone)]
pub struct OneNNModel {
    pub points: Matrix,
    pub labels: Vec<usize>,
    pub metric: Metric,
}

impl OneNNModel {
    pub fn new(points: Matrix, labels: Vec<usize>, metric: Metric) -> Result<Self, CoverError> {
        if points.rows() == 0 {
            return Err(CoverError::EmptyModel);
        }
        if points.rows() != labels.len() {
            return Err(CoverError::LabelMismatch { points: points.rows(), labels: labels.len() });
        }
        Ok(Self { points, labels, metric })
    }

    pub fn fit(ds: &LabeledDataset, metric: Metric) -> Result<Self, CoverError> {
        Self::new(ds.features.clone(), ds.labels.clone(), metric)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Label of the nearest stored point; distance ties go to the lowest index.
pub fn nn_predict(model: &OneNNModel, x: &[f64]) -> usize {
    let mut best = f64::INFINITY;
    let mut best_label = model.labels[0];
    for i in 0..model.len() {
        let d = model.metric.dist(model.points.row(i), x);
        if d < best {
            best = d;
            best_label = model.labels[i];
        }
    }
    best_label
}

/// Triangle-inequality certified radius `(d2 - d1) / 2`, where `d1` is the
/// distance to the nearest point and `d2` the distance to the nearest point
/// of any other class.
///
/// Every perturbation strictly inside the radius keeps the prediction. A
/// single-class model certifies everything (infinite radius).
pub fn nn_certified_radius(model: &OneNNModel, x: &[f64]) -> f64 {
    let mut d1 = f64::INFINITY;
    let mut nearest_label = model.labels[0];
    for i in 0..model.len() {
        let d = model.metric.dist(model.points.row(i), x);
        if d < d1 {
            d1 = d;
            nearest_label = model.labels[i];
        }
    }
    let mut d2 = f64::INFINITY;
    for i in 0..model.len() {
        if model.labels[i] != nearest_label {
            let d = model.metric.dist(model.points.row(i), x);
            if d < d2 {
                d2 = d;
            }
        }
    }
    if d2.is_infinite() {
        return f64::INFINITY;
    }
    ((d2 - d1) / 2.0).max(0.0)
}

/// Training points sufficient for 99% robust accuracy at margin `delta/2`:
/// `37 * ceil(1/delta)^d`.
pub fn required_samples(delta: f64, d: usize) -> Result<u64, CoverError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CoverError::BadDelta(delta));
    }
    if d == 0 {
        return Err(CoverError::BadDimension);
    }
    Ok(37 * ceil_inverse(delta).pow(d as u32))
}

/// `ceil(1/delta)` with a guard against floating-point values a hair above
/// an exact integer.
pub fn ceil_inverse(delta: f64) -> u64 {
    let q = 1.0 / delta;
    let r = q.round();
    if (q - r).abs() < 1e-9 {
        r as u64
    } else {
        q.ceil() as u64
    }
}

/// Occupancy statistics of the covering boxes (L-infinity cells of radius
/// `delta/2` around centers `(2k-1) * delta/2`).
#[derive(Debug, Clone)]
pub struct BoxCoverage {
    /// Boxes per axis, `ceil(1/delta)`.
    pub boxes_per_axis: u64,
    /// Total box count `boxes_per_axis^d` (as f64; it grows fast).
    pub total_boxes: f64,
    pub occupied: usize,
    pub occupancy: f64,
    /// Point counts per occupied box, keyed by the flattened box index.
    pub counts: HashMap<u128, u64>,
}

/// Assigns every training point to exactly one box (boundary points to the
/// lower-index box) and reports occupancy.
pub fn box_coverage(train: &LabeledDataset, delta: f64, d: usize) -> Result<BoxCoverage, CoverError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CoverError::BadDelta(delta));
    }
    if d == 0 || train.dim() != d {
        return Err(CoverError::BadDimension);
    }
    let per_axis = ceil_inverse(delta);
    let mut counts: HashMap<u128, u64> = HashMap::new();
    for i in 0..train.len() {
        let mut index: u128 = 0;
        for &v in train.features.row(i) {
            // box k (1-based) covers ((k-1)*delta, k*delta]; exact multiples
            // of delta go to the lower box, and 0 goes to box 1
            let k = (v / delta).ceil().max(1.0).min(per_axis as f64) as u128;
            index = index * per_axis as u128 + (k - 1);
        }
        *counts.entry(index).or_insert(0) += 1;
    }
    let total = (per_axis as f64).powi(d as i32);
    let occupied = counts.len();
    Ok(BoxCoverage {
        boxes_per_axis: per_axis,
        total_boxes: total,
        occupied,
        occupancy: occupied as f64 / total,
        counts,
    })
}

/// One trial of the covering experiment.
#[derive(Debug, Clone)]
pub struct CoverTrialRow {
    pub trial: usize,
    pub robust_acc: f64,
    pub occupancy: f64,
}

/// Monte-Carlo instantiation of the upper bound.
#[derive(Debug, Clone)]
pub struct CoverOutcome {
    pub d: usize,
    pub delta: f64,
    pub cell_width: f64,
    pub n: usize,
    pub rows: Vec<CoverTrialRow>,
    pub mean_robust_acc: f64,
    /// The proof's lower bound `1 - |B| / (n e)` on the coverage probability.
    pub coverage_bound: f64,
}

/// Runs the 1-NN robust-accuracy experiment: per trial a fresh training
/// draw and fresh test draws; a test point counts as robustly correct iff
/// the prediction matches its label and the certified radius reaches
/// `delta/2` in L-infinity.
pub fn run_cover_experiment(
    dist: &MarginDistribution,
    n: usize,
    trials: usize,
    test_per_trial: usize,
    rng: &RandomSource,
) -> Result<CoverOutcome, CoverError> {
    let root = rng.split("cover");
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_rng = root.split_index(trial as u64);
        let train = sample_margin(dist, n, &mut trial_rng.split("train"))?;
        let model = OneNNModel::fit(&train, Metric::LInf)?;
        let coverage = box_coverage(&train, dist.delta, dist.d)?;
        let test = sample_margin(dist, test_per_trial, &mut trial_rng.split("test"))?;
        let mut robust = 0usize;
        for i in 0..test.len() {
            let x = test.features.row(i);
            let correct = nn_predict(&model, x) == test.labels[i];
            if correct && nn_certified_radius(&model, x) >= dist.delta / 2.0 {
                robust += 1;
            }
        }
        rows.push(CoverTrialRow {
            trial,
            robust_acc: robust as f64 / test.len() as f64,
            occupancy: coverage.occupancy,
        });
    }
    let mean = rows.iter().map(|r| r.robust_acc).sum::<f64>() / rows.len().max(1) as f64;
    let total_boxes = (ceil_inverse(dist.delta) as f64).powi(dist.d as i32);
    Ok(CoverOutcome {
        d: dist.d,
        delta: dist.delta,
        cell_width: dist.cell_width,
        n,
        rows,
        mean_robust_acc: mean,
        coverage_bound: 1.0 - total_boxes / (n as f64 * std::f64::consts::E),
    })
}
