//! Training loop: SGD with Nesterov momentum, one-cycle learning rate,
//! per-sample augmentation streams and optional Gaussian input noise.
//!
//! Everything is reproducible from the config seed: shuffling, augmentation
//! and noise each own a labeled sub-stream, and per-sample draws are keyed
//! by (epoch, dataset index) so batching and thread count cannot change
//! them. Within-batch gradients are reduced over a fixed number of chunks
//! in a fixed order, so results are bit-identical for any worker count.

use super::loss::{loss_and_grad, LossSpec};
use super::network::{backward_from_scores, forward_batch, Gradients, Network, StepContext};
use super::LipnetError;
use crate::datasets::{augment, AugmentConfig, LabeledDataset};
use crate::numerics::{Matrix, RandomSource};

/// Optimizer, schedule, loss and augmentation switches for one run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Nesterov momentum coefficient.
    pub momentum: f64,
    pub loss: LossSpec,
    pub augment: AugmentConfig,
    /// Standard deviation of Gaussian noise added to training inputs
    /// (used when training base classifiers for randomized smoothing).
    pub noise_sigma: Option<f64>,
    /// Perturbation radius for the certified-accuracy history column.
    pub epsilon: f64,
    pub seed: u64,
    /// Worker cap for within-batch parallelism. Any value produces
    /// bit-identical results.
    pub threads: usize,
}

impl TrainConfig {
    pub fn new(peak_lr: f64, epochs: usize, loss: LossSpec) -> Self {
        Self {
            peak_lr,
            epochs,
            batch_size: 256,
            momentum: 0.9,
            loss,
            augment: AugmentConfig::none(),
            noise_sigma: None,
            epsilon: 36.0 / 255.0,
            seed: 0,
            threads: 1,
        }
    }
}

/// One-cycle schedule: linear warm-up from `peak/25` to `peak` over the
/// first 10% of steps, then linear decay to `peak/10^4` by the last step.
pub fn one_cycle_lr(step: usize, total_steps: usize, peak: f64) -> f64 {
    let start = peak / 25.0;
    let end = peak / 1e4;
    if total_steps <= 1 {
        return if step == 0 { start } else { end };
    }
    let warm = (total_steps / 10).max(1);
    if step <= warm {
        start + (peak - start) * step as f64 / warm as f64
    } else if step >= total_steps {
        end
    } else {
        let rest = (total_steps - 1 - warm).max(1);
        peak + (end - peak) * (step - warm) as f64 / rest as f64
    }
}

/// Online metrics for one epoch, accumulated over its training batches.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub cra: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub history: Vec<EpochStats>,
    pub total_steps: usize,
}

struct Velocity {
    w: Vec<Matrix>,
    b: Vec<Vec<f64>>,
}

impl Velocity {
    fn zeros_like(net: &Network) -> Self {
        let g = Gradients::zeros_like(net);
        Self { w: g.w, b: g.b }
    }
}

/// Nesterov SGD update: `v = m*v + g; p -= lr * (g + m*v)`.
fn sgd_step(net: &mut Network, grads: &Gradients, vel: &mut Velocity, lr: f64, momentum: f64) {
    for l in 0..net.layers.len() {
        let vw = vel.w[l].data_mut();
        let gw = grads.w[l].data();
        let pw = net.layers[l].w.data_mut();
        for i in 0..pw.len() {
            vw[i] = momentum * vw[i] + gw[i];
            pw[i] -= lr * (gw[i] + momentum * vw[i]);
        }
        let vb = &mut vel.b[l];
        let gb = &grads.b[l];
        let pb = &mut net.layers[l].b;
        for i in 0..pb.len() {
            vb[i] = momentum * vb[i] + gb[i];
            pb[i] -= lr * (gb[i] + momentum * vb[i]);
        }
    }
}

/// Forward + backward over one padded batch, summed (not averaged) over
/// samples. Returns (loss sum, gradient sums, scores).
///
/// Parallelism lives inside the matrix products, which split output rows
/// across workers; each row is accumulated serially in a fixed order, so
/// results are bit-identical for any worker count.
pub(crate) fn batch_loss_and_grads(
    net: &Network,
    ctx: &StepContext,
    x_padded: &Matrix,
    y: &[usize],
    loss: &LossSpec,
) -> Result<(f64, Gradients, Matrix), LipnetError> {
    let (cache, scores) = forward_batch(net, ctx, x_padded);
    let mut loss_sum = 0.0;
    let mut g_scores = Matrix::zeros(scores.rows(), scores.cols());
    for r in 0..scores.rows() {
        let (lv, lg) = loss_and_grad(loss, scores.row(r), y[r])?;
        loss_sum += lv;
        g_scores.row_mut(r).copy_from_slice(&lg);
    }
    let (grads, _) = backward_from_scores(net, ctx, &cache, &g_scores);
    Ok((loss_sum, grads, scores))
}

/// Trains the network in place. Deterministic given `cfg.seed`.
pub fn train(
    net: &mut Network,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainResult, LipnetError> {
    if cfg.epochs == 0 {
        return Err(LipnetError::BadConfig("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(LipnetError::BadConfig("batch size must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(LipnetError::BadConfig("training data is empty".into()));
    }
    if data.dim() != net.input_dim {
        return Err(LipnetError::DimensionMismatch {
            expected: net.input_dim,
            got: data.dim(),
            context: "training data width",
        });
    }
    cfg.augment
        .validate_for(data.image_shape)
        .map_err(|e| LipnetError::BadConfig(e.to_string()))?;
    crate::numerics::set_matmul_workers(cfg.threads.max(1));

    let root = RandomSource::new(cfg.seed);
    let shuffle_root = root.split("shuffle");
    let augment_root = root.split("augment");
    let noise_root = root.split("noise");

    let n = data.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let margin_needed = std::f64::consts::SQRT_2 * cfg.epsilon;

    let mut vel = Velocity::zeros_like(net);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut global_step = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = shuffle_root.split_index(epoch as u64);
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut certified = 0usize;

        for batch_indices in order.chunks(cfg.batch_size) {
            let bs = batch_indices.len();
            // assemble the batch: augment and noise operate on raw images,
            // zero padding happens afterwards
            let mut x = Matrix::zeros(bs, data.dim());
            let mut y = Vec::with_capacity(bs);
            for (row, &idx) in batch_indices.iter().enumerate() {
                let (base, label) = data.sample(idx);
                let mut img = if cfg.augment.is_identity() {
                    base.to_vec()
                } else {
                    let mut arng =
                        augment_root.split_index(epoch as u64).split_index(idx as u64);
                    augment(base, data.image_shape, &cfg.augment, &mut arng)
                };
                if let Some(sigma) = cfg.noise_sigma {
                    let mut nrng = noise_root.split_index(epoch as u64).split_index(idx as u64);
                    for v in &mut img {
                        *v += sigma * nrng.normal();
                    }
                }
                x.row_mut(row).copy_from_slice(&img);
                y.push(label);
            }
            let x_padded = net.pad_batch(&x)?;
            let ctx = net.step_context(true);
            let (batch_loss, mut grads, scores) =
                batch_loss_and_grads(net, &ctx, &x_padded, &y, &cfg.loss)?;
            let mean_loss = batch_loss / bs as f64;
            if !mean_loss.is_finite() {
                return Err(LipnetError::Diverged { epoch, step: global_step });
            }
            grads.scale(1.0 / bs as f64);
            let lr = one_cycle_lr(global_step, total_steps, cfg.peak_lr);
            sgd_step(net, &grads, &mut vel, lr, cfg.momentum);
            global_step += 1;

            loss_sum += batch_loss;
            for (r, &label) in y.iter().enumerate() {
                let row = scores.row(r);
                let m = super::eval::margin(row, label);
                if m > 0.0 {
                    correct += 1;
                }
                if m > margin_needed {
                    certified += 1;
                }
            }
        }

        history.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            cra: certified as f64 / n as f64,
        });
    }

    Ok(TrainResult { history, total_steps })
}

/// Grid of peak learning rates spaced by sqrt(10), `1e-3 ..= 1`.
pub fn default_lr_grid() -> Vec<f64> {
    let mut grid = Vec::new();
    let mut lr = 1e-3;
    while lr < 1.001 {
        grid.push(lr);
        lr *= 10f64.sqrt();
    }
    grid
}

#[derive(Debug, Clone)]
pub struct LrGridPoint {
    pub peak_lr: f64,
    pub val_cra: f64,
    pub val_accuracy: f64,
}

/// Trains one fresh model per grid point and picks the peak learning rate
/// with the best validation certified accuracy.
pub fn tune_peak_lr(
    build: &dyn Fn() -> Network,
    train_ds: &LabeledDataset,
    val_ds: &LabeledDataset,
    base_cfg: &TrainConfig,
    grid: &[f64],
) -> Result<(f64, Vec<LrGridPoint>), LipnetError> {
    if grid.is_empty() {
        return Err(LipnetError::BadConfig("empty learning-rate grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &lr in grid {
        let mut net = build();
        let cfg = TrainConfig { peak_lr: lr, ..base_cfg.clone() };
        match train(&mut net, train_ds, &cfg) {
            Ok(_) => {
                let stats = super::eval::evaluate(&net.compile(), val_ds, base_cfg.epsilon)?;
                points.push(LrGridPoint { peak_lr: lr, val_cra: stats.cra, val_accuracy: stats.accuracy });
            }
            Err(LipnetError::Diverged { .. }) => {
                points.push(LrGridPoint { peak_lr: lr, val_cra: 0.0, val_accuracy: 0.0 });
            }
            Err(e) => return Err(e),
        }
    }
    let best = points
        .iter()
        .max_by(|a, b| a.val_cra.partial_cmp(&b.val_cra).unwrap())
        .expect("nonempty grid");
    Ok((best.peak_lr, points.clone()))
}
