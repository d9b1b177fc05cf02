//! A synthetic family of binary classification problems where accuracy is
//! easy but robustness needs exponentially many samples.
//!
//! Each distribution draws the first `d-1` coordinates uniformly from
//! {+1, -1} (robust, high-magnitude features), sets the last coordinate to
//! `delta * phi(x_1..x_{d-1})` for a boolean labeling `phi` of the
//! hypercube, and labels `y = sign(x_d)`. A learner that reads the tiny
//! last feature is perfectly accurate and trivially attacked; a robust
//! learner has to learn `phi`, which is hopeless unless it has seen most of
//! the `2^(d-1)` vertices.

use crate::datasets::LabeledDataset;
use crate::numerics::{Matrix, RandomSource};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HypercubeError {
    #[error("dimension {0} outside supported range 2..=26")]
    DimensionOutOfRange(usize),
    #[error("delta {0} must lie in (0, 1)")]
    BadDelta(f64),
    #[error("labeling covers {got} vertices, distribution dimension needs {expected}")]
    LabelingMismatch { expected: usize, got: usize },
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("exhaustive enumeration too large: {0} cases")]
    EnumerationTooLarge(u128),
    #[error(transparent)]
    Data(#[from] crate::datasets::DataError),
}

/// Sign with the global convention `sign(0) = +1`.
#[inline]
pub fn sign_of(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Explicit truth table over the vertices of the `(d-1)`-dimensional
/// hypercube.
///
/// Vertex indexing: bit `i` of the index is 1 exactly when coordinate
/// `x_{i+1} = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanLabeling {
    d_minus_1: usize,
    bits: Vec<u64>,
}

pub const MAX_DIMENSION: usize = 26;

impl BooleanLabeling {
    /// Number of hypercube coordinates the labeling reads.
    pub fn arity(&self) -> usize {
        self.d_minus_1
    }

    pub fn vertex_count(&self) -> usize {
        1usize << self.d_minus_1
    }

    /// Builds a labeling from the low `2^(d-1)` bits of `table` (LSB =
    /// vertex 0, bit value 1 = label +1). Only for small enumerable cases.
    pub fn from_table_bits(d_minus_1: usize, table: u64) -> Result<Self, HypercubeError> {
        if d_minus_1 + 1 < 2 || d_minus_1 > 6 {
            return Err(HypercubeError::DimensionOutOfRange(d_minus_1 + 1));
        }
        Ok(Self { d_minus_1, bits: vec![table] })
    }

    /// Label of the vertex with the given index, as +1 / -1.
    #[inline]
    pub fn eval_index(&self, vertex: usize) -> i8 {
        debug_assert!(vertex < self.vertex_count());
        if (self.bits[vertex / 64] >> (vertex % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Label of the vertex nearest to the first `d-1` coordinates of `x`.
    pub fn eval_signs(&self, robust_features: &[f64]) -> i8 {
        self.eval_index(vertex_index(&robust_features[..self.d_minus_1]))
    }
}

/// Index of the hypercube vertex given by the signs of the coordinates.
pub fn vertex_index(coords: &[f64]) -> usize {
    let mut idx = 0usize;
    for (i, &c) in coords.iter().enumerate() {
        if sign_of(c) > 0 {
            idx |= 1 << i;
        }
    }
    idx
}

/// Draws a labeling uniformly from the `2^(2^(d-1))` possibilities.
pub fn sample_labeling(d: usize, rng: &mut RandomSource) -> Result<BooleanLabeling, HypercubeError> {
    if !(2..=MAX_DIMENSION).contains(&d) {
        return Err(HypercubeError::DimensionOutOfRange(d));
    }
    let d_minus_1 = d - 1;
    let nbits = 1usize << d_minus_1;
    let words = nbits.div_ceil(64);
    let mut bits = Vec::with_capacity(words);
    for _ in 0..words {
        bits.push(rng.next_u64());
    }
    // mask unused high bits so equality comparisons are meaningful
    let used_in_last = nbits - (words - 1) * 64;
    if used_in_last < 64 {
        let mask = (1u64 << used_in_last) - 1;
        *bits.last_mut().unwrap() &= mask;
    }
    Ok(BooleanLabeling { d_minus_1, bits })
}

/// One member of the distribution family: dimension, small-feature
/// magnitude, and the labeling that drives the last coordinate.
#[derive(Debug, Clone)]
pub struct HypercubeDistribution {
    pub d: usize,
    pub delta: f64,
    pub phi: BooleanLabeling,
}

impl HypercubeDistribution {
    pub fn new(d: usize, delta: f64, phi: BooleanLabeling) -> Result<Self, HypercubeError> {
        if phi.arity() != d - 1 {
            return Err(HypercubeError::LabelingMismatch { expected: d - 1, got: phi.arity() });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(HypercubeError::BadDelta(delta));
        }
        Ok(Self { d, delta, phi })
    }
}

/// Data dimension used by the hardness construction: `ceil(log2 n) + 7`.
pub fn hardness_dimension(n: usize) -> usize {
    assert!(n >= 1, "dataset size must be at least 1");
    let ceil_log2 = if n <= 1 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize };
    ceil_log2 + 7
}

/// Samples `n` points. Labels are stored as classes {0, 1} for -1 / +1.
pub fn sample_points(
    dist: &HypercubeDistribution,
    n: usize,
    rng: &mut RandomSource,
) -> LabeledDataset {
    let d = dist.d;
    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row = features.row_mut(i);
        for v in row[..d - 1].iter_mut() {
            *v = rng.sign();
        }
        let phi_val = dist.phi.eval_signs(&row[..d - 1]);
        row[d - 1] = dist.delta * f64::from(phi_val);
        let y = sign_of(row[d - 1]);
        labels.push(if y > 0 { 1 } else { 0 });
    }
    LabeledDataset::new(features, labels, (1, 1, d), 2).expect("construction is valid")
}

/// Converts stored class labels {0, 1} back to signs {-1, +1}.
pub fn signed_labels(ds: &LabeledDataset) -> Vec<i8> {
    ds.labels.iter().map(|&l| if l == 1 { 1 } else { -1 }).collect()
}

/// Binary decision function over feature vectors.
pub trait BinaryClassifier {
    fn predict(&self, x: &[f64]) -> i8;
}

/// Fits a binary classifier from (features, signed labels). An empty
/// training set (zero rows) is allowed.
pub trait Learner {
    fn fit(&self, features: &Matrix, labels: &[i8]) -> Box<dyn BinaryClassifier>;
}

/// The robust classifier that exists for every family member:
/// `phi(sign(x_1), ..., sign(x_{d-1}))`. Ignores the attackable feature.
pub struct OracleClassifier {
    phi: BooleanLabeling,
}

impl BinaryClassifier for OracleClassifier {
    fn predict(&self, x: &[f64]) -> i8 {
        self.phi.eval_signs(x)
    }
}

/// Classifier with perfect accuracy and robustness radius 1 on its own
/// distribution: perturbations smaller than 1 never flip a sign.
pub fn oracle_robust_classifier(phi: &BooleanLabeling) -> OracleClassifier {
    OracleClassifier { phi: phi.clone() }
}

/// Predicts `sign(x_d)`; the accurate-but-fragile shortcut.
pub struct SignFeatureClassifier {
    feature: usize,
}

impl BinaryClassifier for SignFeatureClassifier {
    fn predict(&self, x: &[f64]) -> i8 {
        sign_of(x[self.feature])
    }
}

/// Learner that ignores its training data and always returns the
/// last-feature sign classifier. Perfect clean accuracy on every family
/// member.
pub struct NonRobustLearner;

impl Learner for NonRobustLearner {
    fn fit(&self, features: &Matrix, _labels: &[i8]) -> Box<dyn BinaryClassifier> {
        Box::new(SignFeatureClassifier { feature: features.cols().saturating_sub(1) })
    }
}

/// Looks up seen robust-feature vertices, falls back to the majority
/// training label (ties to +1) on unseen ones. Never reads `x_d`.
pub struct MemorizingClassifier {
    d_minus_1: usize,
    seen: HashMap<usize, i8>,
    majority: i8,
}

impl BinaryClassifier for MemorizingClassifier {
    fn predict(&self, x: &[f64]) -> i8 {
        let v = vertex_index(&x[..self.d_minus_1]);
        *self.seen.get(&v).unwrap_or(&self.majority)
    }
}

/// The "any reasonable learner" of the hardness proof.
pub struct MemorizingLearner;

impl Learner for MemorizingLearner {
    fn fit(&self, features: &Matrix, labels: &[i8]) -> Box<dyn BinaryClassifier> {
        let d_minus_1 = features.cols().saturating_sub(1);
        let mut seen = HashMap::new();
        let mut balance: i64 = 0;
        for i in 0..features.rows() {
            let v = vertex_index(&features.row(i)[..d_minus_1]);
            seen.insert(v, labels[i]);
            balance += i64::from(labels[i]);
        }
        let majority = if balance >= 0 { 1 } else { -1 };
        Box::new(MemorizingClassifier { d_minus_1, seen, majority })
    }
}

/// The proof's single adversary: zero out the non-robust feature. Costs
/// exactly `delta` in Euclidean norm on distribution samples.
pub fn zero_feature_attack(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    if let Some(last) = out.last_mut() {
        *last = 0.0;
    }
    out
}

/// Which learner the adversarial evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    /// Vertex memorizer with majority fallback.
    Memorizing,
    /// Always returns `sign(x_d)`.
    SignFeature,
    /// The distribution's own robust classifier (reads `phi`, not the data).
    Oracle,
}

impl LearnerKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "memorizing" => Some(Self::Memorizing),
            "sign" => Some(Self::SignFeature),
            "oracle" => Some(Self::Oracle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Memorizing => "memorizing",
            Self::SignFeature => "sign",
            Self::Oracle => "oracle",
        }
    }
}

/// One trial of the averaged adversarial evaluation.
#[derive(Debug, Clone)]
pub struct NfrTrialRow {
    pub trial: usize,
    pub clean_acc: f64,
    pub adv_acc: f64,
}

/// Averaged adversarial evaluation across fresh labelings and samples.
#[derive(Debug, Clone)]
pub struct NfrOutcome {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub learner: &'static str,
    pub rows: Vec<NfrTrialRow>,
    pub mean_clean: f64,
    pub mean_adv: f64,
    /// Normal-approximation 95% half-width over trials.
    pub ci_half_width: f64,
    /// `1/2 + n / 2^d`: the accuracy ceiling implied by the proof's error
    /// bound `1/2 - n / 2^d`.
    pub analytic_ceiling: f64,
}

pub const DEFAULT_DELTA: f64 = 0.1;

/// Runs the hardness evaluation at the construction's own dimension
/// `d = ceil(log2 n) + 7`.
pub fn run_no_free_robustness(
    n: usize,
    trials: usize,
    test_per_trial: usize,
    learner: LearnerKind,
    rng: &RandomSource,
) -> Result<NfrOutcome, HypercubeError> {
    run_no_free_robustness_forced_dim(hardness_dimension(n), n, trials, test_per_trial, learner, rng)
}

/// Same evaluation with an explicit dimension, used by the tiny-dimension
/// brute-force checks.
pub fn run_no_free_robustness_forced_dim(
    d: usize,
    n: usize,
    trials: usize,
    test_per_trial: usize,
    learner: LearnerKind,
    rng: &RandomSource,
) -> Result<NfrOutcome, HypercubeError> {
    if trials == 0 {
        return Err(HypercubeError::NoTrials);
    }
    if !(2..=MAX_DIMENSION).contains(&d) {
        return Err(HypercubeError::DimensionOutOfRange(d));
    }
    let root = rng.split("nfr");
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_rng = root.split_index(trial as u64);
        let phi = sample_labeling(d, &mut trial_rng.split("phi"))?;
        let dist = HypercubeDistribution::new(d, DEFAULT_DELTA, phi)?;
        let train = sample_points(&dist, n, &mut trial_rng.split("train"));
        let classifier: Box<dyn BinaryClassifier> = match learner {
            LearnerKind::Memorizing => {
                MemorizingLearner.fit(&train.features, &signed_labels(&train))
            }
            LearnerKind::SignFeature => {
                NonRobustLearner.fit(&train.features, &signed_labels(&train))
            }
            LearnerKind::Oracle => Box::new(oracle_robust_classifier(&dist.phi)),
        };
        let test = sample_points(&dist, test_per_trial, &mut trial_rng.split("test"));
        let signed = signed_labels(&test);
        let mut clean = 0usize;
        let mut adv = 0usize;
        for i in 0..test.len() {
            let x = test.features.row(i);
            if classifier.predict(x) == signed[i] {
                clean += 1;
            }
            if classifier.predict(&zero_feature_attack(x)) == signed[i] {
                adv += 1;
            }
        }
        rows.push(NfrTrialRow {
            trial,
            clean_acc: clean as f64 / test.len() as f64,
            adv_acc: adv as f64 / test.len() as f64,
        });
    }

    let mean =
        |f: fn(&NfrTrialRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let mean_adv = mean(|r| r.adv_acc);
    let mean_clean = mean(|r| r.clean_acc);
    let ci_half_width = if trials > 1 {
        let var = rows.iter().map(|r| (r.adv_acc - mean_adv).powi(2)).sum::<f64>()
            / (trials as f64 - 1.0);
        1.959963984540054 * (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(NfrOutcome {
        n,
        d,
        delta: DEFAULT_DELTA,
        learner: learner.name(),
        rows,
        mean_clean,
        mean_adv,
        ci_half_width,
        analytic_ceiling: 0.5 + n as f64 / 2f64.powi(d as i32),
    })
}

/// Exact enumeration outcome, as a count of correct cases over all equally
/// likely (labeling, training tuple, test vertex) triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveOutcome {
    pub correct: u64,
    pub total: u64,
    /// Cases whose test vertex appeared in the training tuple.
    pub seen_cases: u64,
}

/// Brute-force average adversarial accuracy of the memorizing learner over
/// *all* labelings, *all* ordered training tuples (iid sampling with
/// replacement) and *all* test vertices, in exact integer arithmetic.
pub fn exhaustive_tiny_phi(d: usize, train_size: u32) -> Result<ExhaustiveOutcome, HypercubeError> {
    if !(2..=4).contains(&d) {
        return Err(HypercubeError::DimensionOutOfRange(d));
    }
    let vertices = 1u64 << (d - 1);
    let labelings = 1u64 << vertices;
    let tuples = vertices.pow(train_size);
    let total = labelings as u128 * tuples as u128 * vertices as u128;
    if total > 1u128 << 32 {
        return Err(HypercubeError::EnumerationTooLarge(total));
    }

    let delta = 0.5;
    let mut correct = 0u64;
    let mut seen_cases = 0u64;
    for table in 0..labelings {
        let phi = BooleanLabeling::from_table_bits(d - 1, table)?;
        for tuple in 0..tuples {
            // decode the ordered training tuple in base `vertices`
            let mut features = Matrix::zeros(train_size as usize, d);
            let mut labels = Vec::with_capacity(train_size as usize);
            let mut code = tuple;
            let mut tuple_vertices = Vec::with_capacity(train_size as usize);
            for t in 0..train_size as usize {
                let v = (code % vertices) as usize;
                code /= vertices;
                tuple_vertices.push(v);
                let row = features.row_mut(t);
                for (bit, coord) in row[..d - 1].iter_mut().enumerate() {
                    *coord = if (v >> bit) & 1 == 1 { 1.0 } else { -1.0 };
                }
                let y = phi.eval_index(v);
                row[d - 1] = delta * f64::from(y);
                labels.push(y);
            }
            let classifier = MemorizingLearner.fit(&features, &labels);
            for test_v in 0..vertices as usize {
                let mut x = vec![0.0; d];
                for (bit, coord) in x[..d - 1].iter_mut().enumerate() {
                    *coord = if (test_v >> bit) & 1 == 1 { 1.0 } else { -1.0 };
                }
                let y = phi.eval_index(test_v);
                x[d - 1] = delta * f64::from(y);
                let attacked = zero_feature_attack(&x);
                if classifier.predict(&attacked) == y {
                    correct += 1;
                }
                if tuple_vertices.contains(&test_v) {
                    seen_cases += 1;
                }
            }
        }
    }
    Ok(ExhaustiveOutcome { correct, total: total as u64, seen_cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardness_dimension_examples() {
        assert_eq!(hardness_dimension(16), 11);
        assert_eq!(hardness_dimension(1), 7);
        assert_eq!(hardness_dimension(1000), 17);
        assert_eq!(hardness_dimension(1024), 17);
        assert_eq!(hardness_dimension(1025), 18);
    }

    #[test]
    fn labeling_rejects_out_of_range_dimension() {
        let mut rng = RandomSource::new(0);
        assert!(sample_labeling(30, &mut rng).is_err());
        assert!(sample_labeling(1, &mut rng).is_err());
        assert!(sample_labeling(26, &mut rng).is_ok());
    }

    #[test]
    fn labeling_deterministic_given_seed() {
        let a = sample_labeling(5, &mut RandomSource::new(3)).unwrap();
        let b = sample_labeling(5, &mut RandomSource::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labelings_uniform_at_d2() {
        // 4 possible tables; chi-square sanity over 100k draws
        let mut counts = [0u64; 4];
        let root = RandomSource::new(11);
        for i in 0..100_000u64 {
            let phi = sample_labeling(2, &mut root.split_index(i)).unwrap();
            counts[phi.bits[0] as usize] += 1;
        }
        for &c in &counts {
            // expected 25000, sigma ~ 137
            assert!((c as i64 - 25_000).abs() < 800, "counts {counts:?}");
        }
    }

    #[test]
    fn sample_points_obey_construction() {
        let mut rng = RandomSource::new(7);
        let phi = sample_labeling(3, &mut rng).unwrap();
        let dist = HypercubeDistribution::new(3, 0.1, phi).unwrap();
        let ds = sample_points(&dist, 1000, &mut rng);
        let signed = signed_labels(&ds);
        for i in 0..ds.len() {
            let x = ds.features.row(i);
            assert_eq!(sign_of(x[2]), signed[i], "y = sign(x_d) must hold");
            assert!((x[2].abs() - 0.1).abs() < 1e-15, "x_d in {{+delta, -delta}}");
            assert!(x[0].abs() == 1.0 && x[1].abs() == 1.0);
        }
    }

    #[test]
    fn sample_points_vertex_example() {
        // phi(+1, -1) = -1 forces x = (+1, -1, -0.1) with y = -1
        let phi = BooleanLabeling::from_table_bits(2, 0b0000).unwrap();
        assert_eq!(phi.eval_signs(&[1.0, -1.0]), -1);
        let dist = HypercubeDistribution::new(3, 0.1, phi).unwrap();
        let mut rng = RandomSource::new(1);
        loop {
            let ds = sample_points(&dist, 1, &mut rng);
            let x = ds.features.row(0);
            if x[0] == 1.0 && x[1] == -1.0 {
                assert_eq!(x[2], -0.1);
                assert_eq!(signed_labels(&ds)[0], -1);
                break;
            }
        }
    }

    #[test]
    fn robust_feature_marginal_is_centered() {
        let mut rng = RandomSource::new(13);
        let phi = sample_labeling(4, &mut rng).unwrap();
        let dist = HypercubeDistribution::new(4, 0.2, phi).unwrap();
        let ds = sample_points(&dist, 10_000, &mut rng);
        let mean_x1: f64 =
            (0..ds.len()).map(|i| ds.features.get(i, 0)).sum::<f64>() / ds.len() as f64;
        assert!(mean_x1.abs() < 0.05, "{mean_x1}");
    }

    #[test]
    fn oracle_is_perfectly_accurate_and_robust() {
        let mut rng = RandomSource::new(19);
        let phi = sample_labeling(6, &mut rng).unwrap();
        let dist = HypercubeDistribution::new(6, 0.05, phi.clone()).unwrap();
        let oracle = oracle_robust_classifier(&phi);
        let ds = sample_points(&dist, 10_000, &mut rng);
        let signed = signed_labels(&ds);
        for i in 0..ds.len() {
            let x = ds.features.row(i);
            assert_eq!(oracle.predict(x), signed[i]);
            // perturb robust features by up to 0.9 and zero the last one
            let mut perturbed: Vec<f64> = x.to_vec();
            for v in perturbed[..5].iter_mut() {
                *v += 0.9 * rng.sign();
            }
            perturbed[5] = 0.0;
            assert_eq!(oracle.predict(&perturbed), signed[i]);
        }
    }

    #[test]
    fn nonrobust_learner_is_accurate_and_fragile() {
        let mut rng = RandomSource::new(29);
        let phi = sample_labeling(5, &mut rng).unwrap();
        let dist = HypercubeDistribution::new(5, 0.01, phi).unwrap();
        // data-independent: fit on an empty training set
        let clf = NonRobustLearner.fit(&Matrix::zeros(0, 5), &[]);
        let ds = sample_points(&dist, 10_000, &mut rng);
        let signed = signed_labels(&ds);
        let mut clean = 0usize;
        let mut attacked_plus = 0usize;
        for i in 0..ds.len() {
            let x = ds.features.row(i);
            if clf.predict(x) == signed[i] {
                clean += 1;
            }
            if clf.predict(&zero_feature_attack(x)) == 1 {
                attacked_plus += 1;
            }
        }
        assert_eq!(clean, ds.len(), "clean accuracy must be exactly 1");
        assert_eq!(attacked_plus, ds.len(), "attack forces the sign(0) = +1 tie-break");
    }

    #[test]
    fn memorizer_recalls_and_majority_falls_back() {
        let features = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.1],
            vec![-1.0, 1.0, 0.1],
            vec![1.0, -1.0, 0.1],
            vec![-1.0, -1.0, -0.1],
        ])
        .unwrap();
        let labels = vec![1, 1, 1, -1];
        let clf = MemorizingLearner.fit(&features, &labels);
        // seen vertex keeps its stored label even with x_d zeroed
        assert_eq!(clf.predict(&[-1.0, -1.0, 0.0]), -1);
        // majority is +1 (3 vs 1); applies to any unseen vertex in higher dims
        let clf2 = MemorizingLearner.fit(
            &Matrix::from_rows(&[vec![1.0, 1.0, 1.0, 0.1]]).unwrap(),
            &[1],
        );
        assert_eq!(clf2.predict(&[-1.0, -1.0, -1.0, 0.0]), 1);
    }

    #[test]
    fn memorizer_with_full_coverage_is_robust() {
        // d = 2: both vertices seen -> adversarial accuracy 1 for all 4 phi
        for table in 0..4u64 {
            let phi = BooleanLabeling::from_table_bits(1, table).unwrap();
            let features = Matrix::from_rows(&[
                vec![1.0, 0.5 * f64::from(phi.eval_index(1))],
                vec![-1.0, 0.5 * f64::from(phi.eval_index(0))],
            ])
            .unwrap();
            let labels = vec![phi.eval_index(1), phi.eval_index(0)];
            let clf = MemorizingLearner.fit(&features, &labels);
            for (v, x1) in [(1usize, 1.0), (0usize, -1.0)] {
                let attacked = [x1, 0.0];
                assert_eq!(clf.predict(&attacked), phi.eval_index(v));
            }
        }
    }

    #[test]
    fn attack_examples() {
        assert_eq!(zero_feature_attack(&[1.0, -1.0, 0.1]), vec![1.0, -1.0, 0.0]);
        assert_eq!(zero_feature_attack(&[1.0, -1.0, 0.0]), vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn attack_norm_equals_delta_on_samples() {
        let mut rng = RandomSource::new(37);
        let phi = sample_labeling(4, &mut rng).unwrap();
        let dist = HypercubeDistribution::new(4, 0.07, phi).unwrap();
        let ds = sample_points(&dist, 100, &mut rng);
        for i in 0..ds.len() {
            let x = ds.features.row(i);
            let attacked = zero_feature_attack(x);
            let norm = crate::numerics::dist2(x, &attacked);
            assert!((norm - 0.07).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_outcome_is_exactly_one() {
        let out = run_no_free_robustness(8, 5, 200, LearnerKind::Oracle, &RandomSource::new(2))
            .unwrap();
        assert_eq!(out.mean_adv, 1.0);
        assert_eq!(out.mean_clean, 1.0);
    }

    #[test]
    fn sign_learner_clean_is_exactly_one() {
        let out =
            run_no_free_robustness(8, 5, 200, LearnerKind::SignFeature, &RandomSource::new(2))
                .unwrap();
        assert_eq!(out.mean_clean, 1.0);
    }

    #[test]
    fn memorizer_obeys_analytic_ceiling() {
        let out =
            run_no_free_robustness(16, 50, 400, LearnerKind::Memorizing, &RandomSource::new(5))
                .unwrap();
        assert_eq!(out.d, 11);
        assert!((out.analytic_ceiling - 0.5078125).abs() < 1e-12);
        assert!(
            out.mean_adv <= 0.51 + 3.0 * out.ci_half_width,
            "mean {} ci {}",
            out.mean_adv,
            out.ci_half_width
        );
    }

    #[test]
    fn forced_small_dimension_with_full_coverage() {
        // d = 2, n large enough that both vertices are almost surely seen;
        // then the memorizer is perfectly robust
        let out = run_no_free_robustness_forced_dim(
            2,
            64,
            20,
            100,
            LearnerKind::Memorizing,
            &RandomSource::new(9),
        )
        .unwrap();
        assert!(out.mean_adv > 0.999, "{}", out.mean_adv);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = run_no_free_robustness(8, 10, 100, LearnerKind::Memorizing, &RandomSource::new(4))
            .unwrap();
        let b = run_no_free_robustness(8, 10, 100, LearnerKind::Memorizing, &RandomSource::new(4))
            .unwrap();
        assert_eq!(a.mean_adv.to_bits(), b.mean_adv.to_bits());
        assert_eq!(a.mean_clean.to_bits(), b.mean_clean.to_bits());
    }

    #[test]
    fn exhaustive_d2_single_training_point() {
        let out = exhaustive_tiny_phi(2, 1).unwrap();
        // 4 labelings x 2 tuples x 2 test vertices = 16 cases; seen half the
        // time; accuracy = 1/2 + 1/2 * P(seen) = 3/4 exactly
        assert_eq!(out.total, 16);
        assert_eq!(out.seen_cases * 2, out.total);
        assert_eq!(out.correct * 4, out.total * 3);
    }

    #[test]
    fn exhaustive_matches_half_plus_half_seen_generally() {
        for (d, ts) in [(2usize, 2u32), (3, 1), (3, 2)] {
            let out = exhaustive_tiny_phi(d, ts).unwrap();
            let labelings = 1u64 << (1u64 << (d - 1));
            let pairs = out.total / labelings;
            let seen_pairs = out.seen_cases / labelings;
            // correct = L * seen_pairs + (L/2) * (pairs - seen_pairs), exactly
            let expect = labelings * seen_pairs + labelings / 2 * (pairs - seen_pairs);
            assert_eq!(out.correct, expect, "d={d} ts={ts}");
        }
    }
}
