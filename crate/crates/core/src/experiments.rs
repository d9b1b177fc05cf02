//! Scaling-law harness, nearest-neighbor distance profiles and
//! intrinsic-dimension estimation.
//!
//! Data scaling trains one model per (size, seed) on nested subsamples,
//! multiplying epochs by the subsampling factor so total optimizer steps
//! stay constant across sizes. Distance profiles measure the median 1-NN
//! distance from test points to growing training prefixes; the
//! intrinsic dimension is the negated inverse slope of log median distance
//! against log n.

use crate::datasets::{subsample_indices, AugmentConfig, LabeledDataset};
use crate::lipnet::{
    build_mlp, evaluate, train, LipnetError, LossSpec, MlpConfig, TrainConfig,
};
use crate::numerics::{dist2, dist_inf, dot, norm2, RandomSource};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("plan invalid: {0}")]
    BadPlan(String),
    #[error("profile needs at least 3 points with positive distances")]
    ProfileTooSmall,
    #[error("nonnegative log-log slope {0}: intrinsic dimension undefined")]
    NonNegativeSlope(f64),
    #[error(transparent)]
    Data(#[from] crate::datasets::DataError),
    #[error(transparent)]
    Net(#[from] LipnetError),
}

/// Everything needed to reproduce a data-scaling run.
#[derive(Debug, Clone)]
pub struct ScalingPlan {
    /// Identifier echoed into the record rows (e.g. the dataset id).
    pub experiment: String,
    /// Ascending subsample sizes; the largest uses `base_epochs`.
    pub sizes: Vec<usize>,
    pub base_epochs: usize,
    /// Subsample by k => multiply epochs by k (constant total compute).
    pub epoch_scaling: bool,
    pub model: MlpConfig,
    pub loss: LossSpec,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub augment: AugmentConfig,
    pub threads: usize,
}

impl ScalingPlan {
    fn validate(&self, train_len: usize) -> Result<(), ExperimentError> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(ExperimentError::BadPlan("sizes and seeds must be nonempty".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::BadPlan("sizes must be strictly ascending".into()));
        }
        if *self.sizes.last().unwrap() > train_len {
            return Err(ExperimentError::BadPlan(format!(
                "largest size {} exceeds training pool {train_len}",
                self.sizes.last().unwrap()
            )));
        }
        if self.base_epochs == 0 {
            return Err(ExperimentError::BadPlan("base_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// One harness row; the unit of the CSV and JSON outputs.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub n: usize,
    pub seed: u64,
    pub clean_acc: f64,
    pub cra: f64,
    pub train_acc: f64,
    pub train_cra: f64,
    pub wall_seconds: f64,
    /// Set when this run aborted on non-finite loss; metrics are zeros.
    pub diverged: bool,
}

/// Epochs for a subsample of size `n` when the largest size gets
/// `base_epochs`: total optimizer steps stay constant to within one batch.
pub fn scaled_epochs(base_epochs: usize, largest: usize, n: usize) -> usize {
    ((base_epochs as f64 * largest as f64 / n as f64).round() as usize).max(1)
}

fn run_single(
    plan: &ScalingPlan,
    train_pool: &LabeledDataset,
    test: &LabeledDataset,
    n: usize,
    epochs: usize,
    seed: u64,
    experiment: &str,
) -> Result<ExperimentRecord, ExperimentError> {
    let start = Instant::now();
    let sub = crate::datasets::subsample(train_pool, n, seed)?;
    let mut init_rng = RandomSource::new(seed).split("init");
    let mut net = build_mlp(sub.dim(), sub.class_count, &plan.model, &mut init_rng)?;
    let cfg = TrainConfig {
        peak_lr: plan.peak_lr,
        epochs,
        batch_size: plan.batch_size,
        momentum: 0.9,
        loss: plan.loss,
        augment: plan.augment.clone(),
        noise_sigma: None,
        epsilon: plan.epsilon,
        seed: RandomSource::new(seed).split("train").split_index(n as u64).seed(),
        threads: plan.threads,
    };
    match train(&mut net, &sub, &cfg) {
        Ok(_) => {
            let compiled = net.compile();
            let test_stats = evaluate(&compiled, test, plan.epsilon)?;
            let train_stats = evaluate(&compiled, &sub, plan.epsilon)?;
            Ok(ExperimentRecord {
                experiment: experiment.to_string(),
                n,
                seed,
                clean_acc: test_stats.accuracy,
                cra: test_stats.cra,
                train_acc: train_stats.accuracy,
                train_cra: train_stats.cra,
                wall_seconds: start.elapsed().as_secs_f64(),
                diverged: false,
            })
        }
        Err(LipnetError::Diverged { .. }) => Ok(ExperimentRecord {
            experiment: experiment.to_string(),
            n,
            seed,
            clean_acc: 0.0,
            cra: 0.0,
            train_acc: 0.0,
            train_cra: 0.0,
            wall_seconds: start.elapsed().as_secs_f64(),
            diverged: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Data-scaling harness: one trained model per (size, seed) on nested
/// subsamples, evaluated on the held-out test set. Rows are ordered by
/// (n, seed). Divergent runs are recorded and the sweep continues.
pub fn run_scaling(
    plan: &ScalingPlan,
    train_pool: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    plan.validate(train_pool.len())?;
    let largest = *plan.sizes.last().unwrap();
    let mut records = Vec::new();
    for &n in &plan.sizes {
        let epochs =
            if plan.epoch_scaling { scaled_epochs(plan.base_epochs, largest, n) } else { plan.base_epochs };
        for &seed in &plan.seeds {
            records.push(run_single(plan, train_pool, test, n, epochs, seed, &plan.experiment)?);
        }
    }
    Ok(records)
}

/// Compute-scaling harness: fixed subsample size, varying epoch counts.
/// The epoch count is appended to the experiment id so rows stay
/// distinguishable in the shared schema.
pub fn run_compute_scaling(
    plan: &ScalingPlan,
    epoch_list: &[usize],
    n: usize,
    train_pool: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    if epoch_list.is_empty() {
        return Err(ExperimentError::BadPlan("epoch list must be nonempty".into()));
    }
    if n == 0 || n > train_pool.len() {
        return Err(ExperimentError::BadPlan(format!("n {n} out of range")));
    }
    let mut records = Vec::new();
    for &epochs in epoch_list {
        if epochs == 0 {
            return Err(ExperimentError::BadPlan("epochs must be >= 1".into()));
        }
        let tag = format!("{}_e{epochs}", plan.experiment);
        for &seed in &plan.seeds {
            records.push(run_single(plan, train_pool, test, n, epochs, seed, &tag)?);
        }
    }
    Ok(records)
}

/// Exact header of the harness CSV schema.
pub const CSV_HEADER: &str = "experiment,n,seed,clean_acc,cra,train_acc,train_cra,wall_seconds";

/// Formats records with 6-decimal floats. `deterministic` zeroes the
/// wall-seconds column so reruns are byte-identical; measured timings
/// belong in the JSON summary.
pub fn records_to_csv(records: &[ExperimentRecord], deterministic: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if deterministic { 0.0 } else { r.wall_seconds };
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.experiment, r.n, r.seed, r.clean_acc, r.cra, r.train_acc, r.train_cra, wall
        ));
    }
    out
}

/// Generic small-CSV writer used by the other commands (distance profiles,
/// smoothing rows, hypercube and covering trials): 6-decimal floats.
pub fn simple_csv(header: &str, rows: &[Vec<CsvValue>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            match v {
                CsvValue::Int(i) => out.push_str(&i.to_string()),
                CsvValue::Float(f) => out.push_str(&format!("{f:.6}")),
                CsvValue::Str(s) => out.push_str(s),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub enum CsvValue {
    Int(i64),
    Float(f64),
    Str(String),
}

/// Metric for nearest-neighbor distance profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMetric {
    L2,
    LInf,
    /// Angle between the vectors, `arccos` of the cosine similarity.
    Angular,
}

impl ProfileMetric {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "l2" => Some(Self::L2),
            "linf" => Some(Self::LInf),
            "angular" => Some(Self::Angular),
            _ => None,
        }
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::L2 => dist2(a, b),
            Self::LInf => dist_inf(a, b),
            Self::Angular => {
                let na = norm2(a);
                let nb = norm2(b);
                if na == 0.0 || nb == 0.0 {
                    return std::f64::consts::FRAC_PI_2;
                }
                (dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos()
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub n: usize,
    pub median_distance: f64,
}

/// Median 1-NN distance from each test point to the first `n` points of a
/// fixed training permutation, for each requested `n`. Nested prefixes make
/// the medians nonincreasing in `n`.
pub fn nn_distance_profile(
    train: &LabeledDataset,
    test: &LabeledDataset,
    sizes: &[usize],
    metric: ProfileMetric,
    seed: u64,
) -> Result<Vec<ProfilePoint>, ExperimentError> {
    if sizes.is_empty() {
        return Err(ExperimentError::BadPlan("sizes must be nonempty".into()));
    }
    let mut sorted_sizes = sizes.to_vec();
    sorted_sizes.sort_unstable();
    sorted_sizes.dedup();
    let largest = *sorted_sizes.last().unwrap();
    if largest > train.len() || sorted_sizes[0] == 0 {
        return Err(ExperimentError::BadPlan(format!(
            "profile sizes must lie in 1..={}",
            train.len()
        )));
    }
    let order = subsample_indices(train.len(), largest, seed);

    // running prefix minima per test point, sampled at each cut
    let mut prefix_min = vec![f64::INFINITY; test.len()];
    let mut per_cut: Vec<Vec<f64>> = Vec::with_capacity(sorted_sizes.len());
    let mut cut_iter = sorted_sizes.iter().peekable();
    for (rank, &train_idx) in order.iter().enumerate() {
        let trow = train.features.row(train_idx);
        for (t, pm) in prefix_min.iter_mut().enumerate() {
            let d = metric.dist(trow, test.features.row(t));
            if d < *pm {
                *pm = d;
            }
        }
        while let Some(&&cut) = cut_iter.peek() {
            if cut == rank + 1 {
                per_cut.push(prefix_min.clone());
                cut_iter.next();
            } else {
                break;
            }
        }
    }

    Ok(sorted_sizes
        .iter()
        .zip(per_cut)
        .map(|(&n, dists)| ProfilePoint { n, median_distance: median(dists) })
        .collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Intrinsic dimension from a distance profile: least-squares slope `beta`
/// of `log r*` against `log n` gives `d* = -1/beta`.
pub fn estimate_intrinsic_dim(profile: &[ProfilePoint]) -> Result<f64, ExperimentError> {
    if profile.len() < 3 || profile.iter().any(|p| p.median_distance <= 0.0) {
        return Err(ExperimentError::ProfileTooSmall);
    }
    let xs: Vec<f64> = profile.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = profile.iter().map(|p| p.median_distance.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    let beta = cov / var;
    if beta >= 0.0 {
        return Err(ExperimentError::NonNegativeSlope(beta));
    }
    Ok(-1.0 / beta)
}

/// Minimal SVG line chart of (log10 n, value) pairs.
pub fn svg_line_chart(title: &str, points: &[(f64, f64)], y_label: &str) -> String {
    let width = 640.0;
    let height = 420.0;
    let margin = 60.0;
    if points.is_empty() {
        return format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\"/>"
        );
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let xspan = (xmax - xmin).max(1e-9);
    let yspan = (ymax - ymin).max(1e-9);
    let to_px = |x: f64, y: f64| {
        (
            margin + (x - xmin) / xspan * (width - 2.0 * margin),
            height - margin - (y - ymin) / yspan * (height - 2.0 * margin),
        )
    };
    let mut path = String::new();
    for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        let (px, py) = to_px(x, y);
        path.push_str(if i == 0 { "M" } else { " L" });
        path.push_str(&format!("{px:.2},{py:.2}"));
    }
    let mut circles = String::new();
    for (&x, &y) in xs.iter().zip(&ys) {
        let (px, py) = to_px(x, y);
        circles.push_str(&format!("<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\"/>"));
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "font-family=\"monospace\" font-size=\"12\">",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>",
            "<text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
            "<line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"black\"/>",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>",
            "<text x=\"{tx}\" y=\"{xlab}\" text-anchor=\"middle\">log10 n</text>",
            "<text x=\"16\" y=\"{ty}\" transform=\"rotate(-90 16 {ty})\" ",
            "text-anchor=\"middle\">{ylabel}</text>",
            "<path d=\"{path}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
            "{circles}",
            "<text x=\"{m}\" y=\"{ylo}\">{ymin:.4}</text>",
            "<text x=\"{m}\" y=\"{yhi}\">{ymax:.4}</text>",
            "</svg>"
        ),
        w = width,
        h = height,
        m = margin,
        tx = width / 2.0,
        ty = height / 2.0,
        ybase = height - margin,
        xend = width - margin,
        xlab = height - margin / 3.0,
        title = title,
        ylabel = y_label,
        path = path,
        circles = circles,
        ymin = ymin,
        ymax = ymax,
        ylo = height - margin + 14.0,
        yhi = margin - 6.0,
    )
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo, hi)
}
