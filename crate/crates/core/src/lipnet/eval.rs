//! Certified robust accuracy and the empirical random-ball attack.
//!
//! For a 1-Lipschitz score map, a sample is certified at radius `epsilon`
//! when its true-class score beats every other score by more than
//! `sqrt(2) * epsilon`; the certified fraction lower-bounds the true robust
//! accuracy. The attack gives the complementary empirical upper bound.

use super::network::{backward_from_scores, forward_batch, CompiledNet, Network, StepContext};
use super::LipnetError;
use crate::datasets::LabeledDataset;
use crate::numerics::{norm2, Matrix, RandomSource};

/// Index of the maximal score; ties go to the lowest index.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Score margin `s_y - max_{c != y} s_c`.
pub fn margin(scores: &[f64], y: usize) -> f64 {
    let mut other = f64::NEG_INFINITY;
    for (c, &v) in scores.iter().enumerate() {
        if c != y && v > other {
            other = v;
        }
    }
    scores[y] - other
}

/// Fraction of rows whose argmax (lowest-index ties) equals the label.
pub fn accuracy_of(scores: &Matrix, labels: &[usize]) -> f64 {
    let correct = (0..scores.rows())
        .filter(|&r| argmax_lowest(scores.row(r)) == labels[r])
        .count();
    correct as f64 / scores.rows().max(1) as f64
}

/// Certified robust accuracy from precomputed scores: counts samples with
/// `margin > sqrt(2) * epsilon` (strict).
pub fn cra(scores: &Matrix, labels: &[usize], epsilon: f64) -> f64 {
    let needed = std::f64::consts::SQRT_2 * epsilon;
    let certified = (0..scores.rows())
        .filter(|&r| margin(scores.row(r), labels[r]) > needed)
        .count();
    certified as f64 / scores.rows().max(1) as f64
}

#[derive(Debug, Clone, Copy)]
pub struct EvalStats {
    pub accuracy: f64,
    pub cra: f64,
}

/// Clean accuracy and certified robust accuracy over a dataset.
pub fn evaluate(
    net: &CompiledNet,
    ds: &LabeledDataset,
    epsilon: f64,
) -> Result<EvalStats, LipnetError> {
    let scores = net.forward_matrix(&ds.features)?;
    Ok(EvalStats {
        accuracy: accuracy_of(&scores, &ds.labels),
        cra: cra(&scores, &ds.labels, epsilon),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AttackOutcome {
    /// Worst margin found over all tried perturbations.
    pub min_margin: f64,
    /// Whether any tried perturbation was misclassified.
    pub misclassified: bool,
}

/// Evaluates the network on `tries` random perturbations of Euclidean norm
/// exactly `epsilon`, plus the gradient-descent direction on the margin.
/// Returns the worst margin found; with `epsilon = 0` this is the clean
/// margin.
pub fn random_ball_attack(
    net: &Network,
    ctx: &StepContext,
    x: &[f64],
    y: usize,
    epsilon: f64,
    tries: usize,
    rng: &mut RandomSource,
) -> Result<AttackOutcome, LipnetError> {
    if y >= net.output_dim {
        return Err(LipnetError::BadConfig(format!("label {y} out of range")));
    }
    let x_mat = Matrix::from_vec(1, x.len(), x.to_vec())
        .map_err(|e| LipnetError::BadConfig(e.to_string()))?;
    let padded = net.pad_batch(&x_mat)?;
    let (cache, scores) = forward_batch(net, ctx, &padded);
    let clean_scores = scores.row(0);
    let mut outcome = AttackOutcome {
        min_margin: margin(clean_scores, y),
        misclassified: argmax_lowest(clean_scores) != y,
    };
    if epsilon == 0.0 {
        return Ok(outcome);
    }

    let mut probe = |candidate: &[f64]| -> Result<(), LipnetError> {
        let c_mat = Matrix::from_vec(1, candidate.len(), candidate.to_vec())
            .map_err(|e| LipnetError::BadConfig(e.to_string()))?;
        let c_padded = net.pad_batch(&c_mat)?;
        let (_, s) = forward_batch(net, ctx, &c_padded);
        let m = margin(s.row(0), y);
        if m < outcome.min_margin {
            outcome.min_margin = m;
        }
        if argmax_lowest(s.row(0)) != y {
            outcome.misclassified = true;
        }
        Ok(())
    };

    // gradient direction: seed d(margin)/d(scores) = e_y - e_runnerup and
    // walk against the input gradient
    let mut runner_up = usize::from(y == 0);
    for (c, &v) in clean_scores.iter().enumerate() {
        if c != y && v > clean_scores[runner_up] {
            runner_up = c;
        }
    }
    let mut seed = Matrix::zeros(1, net.output_dim);
    seed.set(0, y, 1.0);
    seed.set(0, runner_up, -1.0);
    let (_, g_input) = backward_from_scores(net, ctx, &cache, &seed);
    let mut grad: Vec<f64> = g_input.row(0)[..x.len()].to_vec();
    let gnorm = norm2(&grad);
    if gnorm > 0.0 {
        for g in &mut grad {
            *g /= gnorm;
        }
        let candidate: Vec<f64> =
            x.iter().zip(&grad).map(|(&xi, &gi)| xi - epsilon * gi).collect();
        probe(&candidate)?;
    }

    for _ in 0..tries {
        let mut dir = rng.normal_vec(x.len());
        let n = norm2(&dir);
        if n == 0.0 {
            continue;
        }
        for d in &mut dir {
            *d *= epsilon / n;
        }
        let candidate: Vec<f64> = x.iter().zip(&dir).map(|(&xi, &di)| xi + di).collect();
        probe(&candidate)?;
    }
    Ok(outcome)
}

/// Maximum observed ratio `||s(x) - s(y)|| / ||x - y||` over random input
/// pairs drawn uniformly from `[-range, range]^dim`.
pub fn sampled_lipschitz_max_ratio(
    net: &CompiledNet,
    range: f64,
    pairs: usize,
    rng: &mut RandomSource,
) -> Result<f64, LipnetError> {
    let dim = net.input_dim();
    let mut max_ratio: f64 = 0.0;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-range, range)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-range, range)).collect();
        let denom = crate::numerics::dist2(&x, &y);
        if denom < 1e-12 {
            continue;
        }
        let sx = net.forward(&x)?;
        let sy = net.forward(&y)?;
        max_ratio = max_ratio.max(crate::numerics::dist2(&sx, &sy) / denom);
    }
    Ok(max_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lipnet::loss::LossSpec;
    use crate::lipnet::network::{build_mlp, InitKind, MlpConfig};
    use crate::lipnet::train::{tests::toy_blobs, train, TrainConfig};

    const EPS: f64 = 36.0 / 255.0;

    #[test]
    fn cra_hand_arithmetic() {
        // sqrt(2) * 36/255 ~ 0.19965
        let scores = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.6, 0.5]]).unwrap();
        assert_eq!(cra(&scores, &[0, 0], EPS), 0.5);
        // margin 0.5 > 0.19965 certified; margin 0.1 not
        let only_first = Matrix::from_rows(&[vec![1.0, 0.5]]).unwrap();
        assert_eq!(cra(&only_first, &[0], EPS), 1.0);
    }

    #[test]
    fn cra_tie_not_certified_at_zero() {
        let scores = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(cra(&scores, &[0], 0.0), 0.0);
    }

    #[test]
    fn cra_never_exceeds_accuracy_and_decreases_in_epsilon() {
        let mut rng = RandomSource::new(3);
        let mut scores = Matrix::zeros(64, 5);
        for r in 0..64 {
            for v in scores.row_mut(r).iter_mut() {
                *v = rng.uniform_in(-1.0, 1.0);
            }
        }
        let labels: Vec<usize> = (0..64).map(|i| i % 5).collect();
        let acc = accuracy_of(&scores, &labels);
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let eps = k as f64 * 0.05;
            let c = cra(&scores, &labels, eps);
            assert!(c <= acc + 1e-12);
            assert!(c <= prev + 1e-12, "cra must be nonincreasing in epsilon");
            prev = c;
        }
        assert!(cra(&scores, &labels, 0.0) <= acc);
    }

    fn trained_toy_net() -> (Network, LabeledDataset) {
        let mut rng = RandomSource::new(8);
        let mut net = build_mlp(4, 2, &MlpConfig::aol(8, 3), &mut rng).unwrap();
        let ds = toy_blobs(64, 4, 2.0, 5);
        let mut cfg = TrainConfig::new(0.1, 40, LossSpec::offset_ce(0.25, 0.25).unwrap());
        cfg.batch_size = 16;
        train(&mut net, &ds, &cfg).unwrap();
        (net, ds)
    }

    #[test]
    fn attack_at_zero_epsilon_returns_clean_margin() {
        let (net, ds) = trained_toy_net();
        let ctx = net.eval_context();
        let compiled = net.compile();
        let (x, y) = ds.sample(0);
        let clean = compiled.forward(x).unwrap();
        let out =
            random_ball_attack(&net, &ctx, x, y, 0.0, 50, &mut RandomSource::new(1)).unwrap();
        assert!((out.min_margin - margin(&clean, y)).abs() < 1e-12);
    }

    #[test]
    fn certified_points_survive_the_attack() {
        let (net, ds) = trained_toy_net();
        let ctx = net.eval_context();
        let compiled = net.compile();
        let mut rng = RandomSource::new(5);
        let mut tested = 0;
        for i in 0..ds.len() {
            let (x, y) = ds.sample(i);
            let scores = compiled.forward(x).unwrap();
            if margin(&scores, y) > std::f64::consts::SQRT_2 * EPS {
                let out = random_ball_attack(&net, &ctx, x, y, EPS, 200, &mut rng).unwrap();
                assert!(out.min_margin > 0.0, "certified point misclassified");
                assert!(!out.misclassified);
                tested += 1;
            }
        }
        assert!(tested > 0, "test needs at least one certified point");
    }

    #[test]
    fn attack_margin_decreases_with_epsilon_on_average() {
        let (net, ds) = trained_toy_net();
        let ctx = net.eval_context();
        let mut rng = RandomSource::new(9);
        let mut mean_at = |eps: f64| -> f64 {
            let mut sum = 0.0;
            for i in 0..16 {
                let (x, y) = ds.sample(i);
                sum += random_ball_attack(&net, &ctx, x, y, eps, 60, &mut rng)
                    .unwrap()
                    .min_margin;
            }
            sum / 16.0
        };
        let m0 = mean_at(0.0);
        let m1 = mean_at(0.15);
        let m2 = mean_at(0.3);
        assert!(m1 < m0, "{m1} !< {m0}");
        assert!(m2 < m1, "{m2} !< {m1}");
    }

    #[test]
    fn trained_networks_stay_lipschitz() {
        let mut rng = RandomSource::new(12);
        for kind in [MlpConfig::aol(8, 4), MlpConfig::cpl(8, 4)] {
            let cfg_net = MlpConfig { init: InitKind::Orthogonal, ..kind };
            let mut net = build_mlp(6, 2, &cfg_net, &mut rng).unwrap();
            let ds = toy_blobs(48, 6, 1.5, 21);
            let mut cfg = TrainConfig::new(0.05, 12, LossSpec::offset_ce(0.25, 0.25).unwrap());
            cfg.batch_size = 16;
            train(&mut net, &ds, &cfg).unwrap();
            let ratio =
                sampled_lipschitz_max_ratio(&net.compile(), 2.0, 2000, &mut rng).unwrap();
            assert!(ratio <= 1.0 + 1e-6, "{:?}: ratio {ratio}", cfg_net.layer_kind);
        }
    }
}
