//! 1-Lipschitz MLPs with exact gradients.
//!
//! Layers ([`layer`]), losses ([`loss`]), network assembly and the backward
//! pass ([`network`]), the SGD training loop ([`train`]) and certified
//! evaluation ([`eval`]).

mod eval;
mod layer;
mod loss;
mod network;
mod train;

pub use eval::{
    accuracy_of, argmax_lowest, cra, evaluate, margin, random_ball_attack,
    sampled_lipschitz_max_ratio, AttackOutcome, EvalStats,
};
pub use layer::{
    aol_effective_weight, cpl_converged_sigma, cpl_forward, cpl_refresh_sigma, maxmin, Activation,
    CplState, DenseLayer, LayerKind,
};
pub use loss::{loss_and_grad, loss_value, LossKind, LossSpec};
pub use network::{
    backward_from_scores, build_mlp, forward_batch, load_checkpoint, save_checkpoint, CompiledNet,
    ForwardCache, Gradients, InitKind, MlpConfig, Network, StepContext,
};
pub use train::{
    default_lr_grid, one_cycle_lr, train, tune_peak_lr, EpochStats, LrGridPoint, TrainConfig,
    TrainResult,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LipnetError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize, context: &'static str },
    #[error("MaxMin needs an even width, got {0}")]
    OddMaxMinWidth(usize),
    #[error("CPL layers must be square, got {rows}x{cols}")]
    CplNotSquare { rows: usize, cols: usize },
    #[error("network needs at least one layer")]
    EmptyNetwork,
    #[error("invalid loss: {0}")]
    BadLoss(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}

/// Mean batch loss and its exact parameter gradients under the given step
/// context. Pads the raw batch, runs the forward/backward pair once.
pub fn batch_gradients(
    net: &Network,
    ctx: &StepContext,
    x: &crate::numerics::Matrix,
    y: &[usize],
    loss: &LossSpec,
) -> Result<(f64, Gradients), LipnetError> {
    let padded = net.pad_batch(x)?;
    let (cache, scores) = network::forward_batch(net, ctx, &padded);
    let bs = scores.rows() as f64;
    let mut total = 0.0;
    let mut g_scores = crate::numerics::Matrix::zeros(scores.rows(), scores.cols());
    for r in 0..scores.rows() {
        let (lv, lg) = loss::loss_and_grad(loss, scores.row(r), y[r])?;
        total += lv;
        for (dst, g) in g_scores.row_mut(r).iter_mut().zip(lg) {
            *dst = g / bs;
        }
    }
    let (grads, _) = network::backward_from_scores(net, ctx, &cache, &g_scores);
    Ok((total / bs, grads))
}

/// The batch-mean loss as a pure function of the raw weights, holding the
/// CPL spectral norms fixed at the supplied values. This is the objective
/// the backward pass differentiates, so finite differences of this function
/// are the gradient oracle.
pub fn batch_loss_frozen(
    net: &Network,
    frozen_sigmas: &[Option<f64>],
    x: &crate::numerics::Matrix,
    y: &[usize],
    loss: &LossSpec,
) -> Result<f64, LipnetError> {
    let ctx = rebuild_context(net, frozen_sigmas);
    let padded = net.pad_batch(x)?;
    let (_, scores) = network::forward_batch(net, &ctx, &padded);
    let mut total = 0.0;
    for r in 0..scores.rows() {
        total += loss::loss_and_grad(loss, scores.row(r), y[r])?.0;
    }
    Ok(total / scores.rows() as f64)
}

/// Rebuilds a step context from current weights, with CPL sigmas pinned.
pub(crate) fn rebuild_context(net: &Network, frozen_sigmas: &[Option<f64>]) -> StepContext {
    use network::PlanLayer;
    let plans = net
        .layers
        .iter()
        .zip(frozen_sigmas)
        .map(|(l, sigma)| match l.kind {
            LayerKind::Standard => PlanLayer::affine(l.w.clone(), None),
            LayerKind::Aol => {
                let rescale = layer::aol_rescale(&l.w);
                let v = layer::scale_columns(&l.w, &rescale.d);
                PlanLayer::affine(v, Some(rescale))
            }
            LayerKind::Cpl => {
                PlanLayer::cpl_from_sigma(&l.w, sigma.expect("frozen sigma for CPL layer"))
            }
        })
        .collect();
    StepContext { plans }
}
