//! Networks of constrained dense layers, with batched forward passes and a
//! hand-written exact backward pass.
//!
//! The backward pass differentiates through the AOL rescaling (the factors
//! are treated as a function of the raw weights); the CPL spectral-norm
//! estimate is a stop-gradient constant per step, refreshed by one power
//! iteration per training forward and fully converged at evaluation.

use super::layer::{
    aol_rescale, cpl_converged_sigma, cpl_refresh_sigma, maxmin_rows, scale_columns, Activation,
    AolRescale, DenseLayer, LayerKind,
};
use super::LipnetError;
use crate::numerics::{Matrix, RandomSource};

/// Sequence of constrained layers mapping a (zero-padded) input to class
/// scores. Composition of 1-Lipschitz layers keeps the whole map
/// 1-Lipschitz.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    /// Declared data dimension before zero padding.
    pub input_dim: usize,
    /// Number of classes (output width of the last layer).
    pub output_dim: usize,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, input_dim: usize) -> Result<Self, LipnetError> {
        if layers.is_empty() {
            return Err(LipnetError::EmptyNetwork);
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(LipnetError::DimensionMismatch {
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                    context: "adjacent layer widths",
                });
            }
        }
        if input_dim > layers[0].in_dim() {
            return Err(LipnetError::DimensionMismatch {
                expected: layers[0].in_dim(),
                got: input_dim,
                context: "input wider than first layer",
            });
        }
        let output_dim = layers.last().unwrap().out_dim();
        Ok(Self { layers, input_dim, output_dim })
    }

    /// Width inputs are zero-padded to (the first layer's input width).
    pub fn input_pad_to(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data().len() + l.b.len()).sum()
    }

    /// Zero-pads a batch of raw inputs to the first layer's width.
    pub fn pad_batch(&self, x: &Matrix) -> Result<Matrix, LipnetError> {
        if x.cols() != self.input_dim {
            return Err(LipnetError::DimensionMismatch {
                expected: self.input_dim,
                got: x.cols(),
                context: "network input",
            });
        }
        let pad_to = self.input_pad_to();
        if pad_to == x.cols() {
            return Ok(x.clone());
        }
        let mut out = Matrix::zeros(x.rows(), pad_to);
        for r in 0..x.rows() {
            out.row_mut(r)[..x.cols()].copy_from_slice(x.row(r));
        }
        Ok(out)
    }

    /// Per-step effective-layer data. `training` advances each CPL power
    /// iteration by one step; otherwise the spectral norms are fully
    /// converged and nothing is mutated.
    pub fn step_context(&mut self, training: bool) -> StepContext {
        let plans = self
            .layers
            .iter_mut()
            .map(|layer| match layer.kind {
                LayerKind::Standard => PlanLayer::affine(layer.w.clone(), None),
                LayerKind::Aol => {
                    let rescale = aol_rescale(&layer.w);
                    let v = scale_columns(&layer.w, &rescale.d);
                    PlanLayer::affine(v, Some(rescale))
                }
                LayerKind::Cpl => {
                    let state = layer.cpl_state.as_mut().expect("CPL layers carry power state");
                    let sigma = if training {
                        cpl_refresh_sigma(&layer.w, state, 1)
                    } else {
                        cpl_converged_sigma(&layer.w)
                    };
                    PlanLayer::cpl_from_sigma(&layer.w, sigma)
                }
            })
            .collect();
        StepContext { plans }
    }

    /// Evaluation context: converged spectral norms, no mutation.
    pub fn eval_context(&self) -> StepContext {
        let plans = self
            .layers
            .iter()
            .map(|layer| match layer.kind {
                LayerKind::Standard => PlanLayer::affine(layer.w.clone(), None),
                LayerKind::Aol => {
                    let rescale = aol_rescale(&layer.w);
                    let v = scale_columns(&layer.w, &rescale.d);
                    PlanLayer::affine(v, Some(rescale))
                }
                LayerKind::Cpl => {
                    PlanLayer::cpl_from_sigma(&layer.w, cpl_converged_sigma(&layer.w))
                }
            })
            .collect();
        StepContext { plans }
    }

    /// Scores for a single input. Convenience path that converges CPL
    /// spectral norms on every call; use [`Network::compile`] inside loops.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LipnetError> {
        self.compile().forward(x)
    }

    /// Materializes effective weights (with converged CPL spectral norms)
    /// for fast repeated inference.
    pub fn compile(&self) -> CompiledNet {
        let ctx = self.eval_context();
        let layers = self
            .layers
            .iter()
            .zip(ctx.plans)
            .map(|(layer, plan)| match plan {
                PlanLayer::Affine { v, vt, .. } => CompiledLayer::Affine {
                    v,
                    vt,
                    b: layer.b.clone(),
                    activation: layer.activation,
                },
                PlanLayer::Cpl { alpha, wt, .. } => CompiledLayer::Cpl {
                    w: layer.w.clone(),
                    wt,
                    b: layer.b.clone(),
                    alpha,
                    activation: layer.activation,
                },
            })
            .collect();
        CompiledNet { input_dim: self.input_dim, pad_to: self.input_pad_to(), layers }
    }
}

/// Effective per-layer data for one optimizer step or evaluation.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub(crate) plans: Vec<PlanLayer>,
}

impl StepContext {
    /// CPL spectral-norm estimates, ordered by layer (None for non-CPL).
    pub fn cpl_sigmas(&self) -> Vec<Option<f64>> {
        self.plans
            .iter()
            .map(|p| match p {
                PlanLayer::Cpl { sigma, .. } => Some(*sigma),
                PlanLayer::Affine { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PlanLayer {
    /// Affine layer with the effective weight and its transpose; `aol`
    /// carries the rescaling data needed by the backward pass.
    Affine { v: Matrix, vt: Matrix, aol: Option<AolRescale> },
    /// CPL layer with the frozen spectral-norm data and transposed raw
    /// weights for the batched forward.
    Cpl { alpha: f64, sigma: f64, wt: Matrix },
}

impl PlanLayer {
    pub(crate) fn affine(v: Matrix, aol: Option<AolRescale>) -> Self {
        let vt = v.transpose();
        PlanLayer::Affine { v, vt, aol }
    }

    pub(crate) fn cpl_from_sigma(w: &Matrix, sigma: f64) -> Self {
        let alpha = if sigma < 1e-12 { 0.0 } else { 2.0 / (sigma * sigma) };
        PlanLayer::Cpl { alpha, sigma, wt: w.transpose() }
    }
}

impl std::fmt::Debug for AolRescale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AolRescale").field("cols", &self.d.len()).finish()
    }
}

impl Clone for AolRescale {
    fn clone(&self) -> Self {
        Self { d: self.d.clone(), m: self.m.clone(), sign_t: self.sign_t.clone() }
    }
}

/// Activations applied in place to a batch of pre-activations.
fn apply_activation(activation: Activation, z: &mut Matrix) {
    match activation {
        Activation::None => {}
        Activation::RectifiedLinear => {
            for v in z.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::MaxMin => maxmin_rows(z),
    }
}

/// Routes output gradients back through the activation, given the cached
/// pre-activation values.
fn activation_backward(activation: Activation, pre_act: &Matrix, g_out: &Matrix) -> Matrix {
    match activation {
        Activation::None => g_out.clone(),
        Activation::RectifiedLinear => {
            let mut g = g_out.clone();
            for (gv, &z) in g.data_mut().iter_mut().zip(pre_act.data()) {
                if z <= 0.0 {
                    *gv = 0.0;
                }
            }
            g
        }
        Activation::MaxMin => {
            // gradient follows the permutation chosen in the forward pass;
            // ties route as the identity
            let mut g = g_out.clone();
            for r in 0..g.rows() {
                let z = pre_act.row(r);
                let grow = g.row_mut(r);
                for (pair_idx, zpair) in z.chunks_exact(2).enumerate() {
                    if zpair[0] < zpair[1] {
                        grow.swap(2 * pair_idx, 2 * pair_idx + 1);
                    }
                }
            }
            g
        }
    }
}

fn add_bias_rows(z: &mut Matrix, b: &[f64]) {
    for r in 0..z.rows() {
        for (v, &bi) in z.row_mut(r).iter_mut().zip(b) {
            *v += bi;
        }
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

/// Cached intermediate values of one batched forward pass.
pub struct ForwardCache {
    /// Input to each layer (the first entry is the padded batch).
    inputs: Vec<Matrix>,
    /// Pre-activation output of each layer.
    pre_act: Vec<Matrix>,
    /// CPL pre-relu values `A W^T + b`.
    cpl_u: Vec<Option<Matrix>>,
}

/// Batched forward pass over an already-padded batch; returns the cache
/// needed by [`backward_from_scores`] and the final score matrix.
pub fn forward_batch(
    net: &Network,
    ctx: &StepContext,
    x_padded: &Matrix,
) -> (ForwardCache, Matrix) {
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre_act = Vec::with_capacity(net.layers.len());
    let mut cpl_u = Vec::with_capacity(net.layers.len());
    let mut a = x_padded.clone();
    for (layer, plan) in net.layers.iter().zip(&ctx.plans) {
        inputs.push(a.clone());
        let mut z;
        match plan {
            PlanLayer::Affine { vt, .. } => {
                z = a.matmul(vt);
                add_bias_rows(&mut z, &layer.b);
                cpl_u.push(None);
            }
            PlanLayer::Cpl { alpha, wt, .. } => {
                let mut u = a.matmul(wt);
                add_bias_rows(&mut u, &layer.b);
                let mut r = u.clone();
                for v in r.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let mut corr = r.matmul(&layer.w);
                corr.scale(-*alpha);
                z = a.clone();
                for (zv, &cv) in z.data_mut().iter_mut().zip(corr.data()) {
                    *zv += cv;
                }
                cpl_u.push(Some(u));
            }
        }
        pre_act.push(z.clone());
        apply_activation(layer.activation, &mut z);
        a = z;
    }
    (ForwardCache { inputs, pre_act, cpl_u }, a)
}

/// Gradient accumulator mirroring the network's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<Matrix>,
    pub b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            w: net.layers.iter().map(|l| Matrix::zeros(l.out_dim(), l.in_dim())).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in &mut self.w {
            m.scale(factor);
        }
        for v in &mut self.b {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mw = self
            .w
            .iter()
            .flat_map(|m| m.data())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let mb = self.b.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        mw.max(mb)
    }
}

/// Exact reverse pass from a score-gradient seed.
///
/// `g_scores` must already carry any averaging factors. Returns parameter
/// gradients and the gradient with respect to the padded input batch.
pub fn backward_from_scores(
    net: &Network,
    ctx: &StepContext,
    cache: &ForwardCache,
    g_scores: &Matrix,
) -> (Gradients, Matrix) {
    let mut grads = Gradients::zeros_like(net);
    let mut g = g_scores.clone();
    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let g_z = activation_backward(layer.activation, &cache.pre_act[l], &g);
        match &ctx.plans[l] {
            PlanLayer::Affine { v, aol, .. } => {
                grads.b[l] = column_sums(&g_z);
                let g_v = g_z.transa_matmul(&cache.inputs[l]);
                g = g_z.matmul(v);
                grads.w[l] = match aol {
                    None => g_v,
                    Some(rescale) => aol_backward(&layer.w, rescale, &g_v),
                };
            }
            PlanLayer::Cpl { alpha, wt, .. } => {
                let u = cache.cpl_u[l].as_ref().expect("CPL cache");
                // G_R = -alpha * G_Z W^T, masked by the relu
                let mut g_u = g_z.matmul(wt);
                g_u.scale(-*alpha);
                for (gv, &uv) in g_u.data_mut().iter_mut().zip(u.data()) {
                    if uv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                grads.b[l] = column_sums(&g_u);
                // W gradient: the linear path through U plus the explicit
                // factor in -alpha R W
                let mut g_w = g_u.transa_matmul(&cache.inputs[l]);
                let mut r = u.clone();
                for v in r.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let mut g_w_direct = r.transa_matmul(&g_z);
                g_w_direct.scale(-*alpha);
                for (a, bv) in g_w.data_mut().iter_mut().zip(g_w_direct.data()) {
                    *a += bv;
                }
                grads.w[l] = g_w;
                // input gradient: residual identity plus the U path
                let mut g_a = g_u.matmul(&layer.w);
                for (a, bv) in g_a.data_mut().iter_mut().zip(g_z.data()) {
                    *a += bv;
                }
                g = g_a;
            }
        }
    }
    (grads, g)
}

/// Chain rule through the AOL rescaling: with `V = W diag(d)`,
/// `d_j = m_j^{-1/2}`, `m_j = sum_i |(W^T W)_{ij}|`, the weight gradient is
/// `G_V diag(d) + W (diag(e) S + S diag(e))` where `S = sign(W^T W)` and
/// `e_j = -1/2 m_j^{-3/2} u_j`, `u_j = sum_a G_V[a][j] W[a][j]`.
fn aol_backward(w: &Matrix, rescale: &AolRescale, g_v: &Matrix) -> Matrix {
    let n_in = w.cols();
    let mut u = vec![0.0; n_in];
    for a in 0..w.rows() {
        let gv_row = g_v.row(a);
        let w_row = w.row(a);
        for j in 0..n_in {
            u[j] += gv_row[j] * w_row[j];
        }
    }
    let e: Vec<f64> = rescale
        .m
        .iter()
        .zip(&u)
        .map(|(&mj, &uj)| if mj > 0.0 { -0.5 * mj.powf(-1.5) * uj } else { 0.0 })
        .collect();
    // M2 = diag(e) S + S diag(e), entrywise s_ij (e_i + e_j)
    let mut m2 = Matrix::zeros(n_in, n_in);
    for i in 0..n_in {
        for j in 0..n_in {
            let s = rescale.sign_t.get(i, j);
            if s != 0.0 {
                m2.set(i, j, s * (e[i] + e[j]));
            }
        }
    }
    let mut g_w = scale_columns(g_v, &rescale.d);
    let correction = w.matmul(&m2);
    for (a, b) in g_w.data_mut().iter_mut().zip(correction.data()) {
        *a += b;
    }
    g_w
}

/// Inference-ready network with materialized effective weights.
#[derive(Debug, Clone)]
pub struct CompiledNet {
    input_dim: usize,
    pad_to: usize,
    layers: Vec<CompiledLayer>,
}

#[derive(Debug, Clone)]
enum CompiledLayer {
    Affine { v: Matrix, vt: Matrix, b: Vec<f64>, activation: Activation },
    Cpl { w: Matrix, wt: Matrix, b: Vec<f64>, alpha: f64, activation: Activation },
}

impl CompiledNet {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        match self.layers.last().expect("nonempty") {
            CompiledLayer::Affine { v, .. } => v.rows(),
            CompiledLayer::Cpl { w, .. } => w.rows(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LipnetError> {
        if x.len() != self.input_dim {
            return Err(LipnetError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
                context: "network input",
            });
        }
        let mut a = vec![0.0; self.pad_to];
        a[..x.len()].copy_from_slice(x);
        for layer in &self.layers {
            a = match layer {
                CompiledLayer::Affine { v, b, activation, .. } => {
                    let mut z = v.matvec(&a);
                    for (zv, &bv) in z.iter_mut().zip(b) {
                        *zv += bv;
                    }
                    apply_activation_vec(*activation, z)
                }
                CompiledLayer::Cpl { w, b, alpha, activation, .. } => {
                    let mut u = w.matvec(&a);
                    for (uv, &bv) in u.iter_mut().zip(b) {
                        *uv = (*uv + bv).max(0.0);
                    }
                    let corr = w.matvec_t(&u);
                    let z: Vec<f64> =
                        a.iter().zip(&corr).map(|(&av, &cv)| av - alpha * cv).collect();
                    apply_activation_vec(*activation, z)
                }
            };
        }
        Ok(a)
    }

    /// Scores for every row of `x` (raw, unpadded inputs), computed with
    /// batched products over row blocks.
    pub fn forward_matrix(&self, x: &Matrix) -> Result<Matrix, LipnetError> {
        if x.cols() != self.input_dim {
            return Err(LipnetError::DimensionMismatch {
                expected: self.input_dim,
                got: x.cols(),
                context: "network input",
            });
        }
        const BLOCK: usize = 512;
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        let mut row = 0usize;
        while row < x.rows() {
            let hi = (row + BLOCK).min(x.rows());
            let mut a = Matrix::zeros(hi - row, self.pad_to);
            for r in row..hi {
                a.row_mut(r - row)[..x.cols()].copy_from_slice(x.row(r));
            }
            for layer in &self.layers {
                a = match layer {
                    CompiledLayer::Affine { vt, b, activation, .. } => {
                        let mut z = a.matmul(vt);
                        add_bias_rows(&mut z, b);
                        apply_activation(*activation, &mut z);
                        z
                    }
                    CompiledLayer::Cpl { w, wt, b, alpha, activation } => {
                        let mut u = a.matmul(wt);
                        add_bias_rows(&mut u, b);
                        for v in u.data_mut() {
                            if *v < 0.0 {
                                *v = 0.0;
                            }
                        }
                        let mut corr = u.matmul(w);
                        corr.scale(-*alpha);
                        for (av, &cv) in a.data_mut().iter_mut().zip(corr.data()) {
                            *av += cv;
                        }
                        apply_activation(*activation, &mut a);
                        a
                    }
                };
            }
            for r in 0..a.rows() {
                out.row_mut(row + r).copy_from_slice(a.row(r));
            }
            row = hi;
        }
        Ok(out)
    }
}

fn apply_activation_vec(activation: Activation, mut z: Vec<f64>) -> Vec<f64> {
    match activation {
        Activation::None => z,
        Activation::RectifiedLinear => {
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            z
        }
        Activation::MaxMin => {
            for pair in z.chunks_exact_mut(2) {
                if pair[0] < pair[1] {
                    pair.swap(0, 1);
                }
            }
            z
        }
    }
}

/// How square constrained layers are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Identity map; rectangular layers fall back to orthogonal rows/columns.
    Identity,
    ScaledUniform,
    Orthogonal,
}

/// Shape and flavor of an MLP.
#[derive(Debug, Clone)]
pub struct MlpConfig {
    pub layer_kind: LayerKind,
    pub width: usize,
    pub depth: usize,
    pub init: InitKind,
}

impl MlpConfig {
    pub fn aol(width: usize, depth: usize) -> Self {
        Self { layer_kind: LayerKind::Aol, width, depth, init: InitKind::Identity }
    }

    pub fn cpl(width: usize, depth: usize) -> Self {
        Self { layer_kind: LayerKind::Cpl, width, depth, init: InitKind::Identity }
    }

    pub fn standard(width: usize, depth: usize) -> Self {
        Self { layer_kind: LayerKind::Standard, width, depth, init: InitKind::ScaledUniform }
    }
}

fn init_weight(
    kind: LayerKind,
    init: InitKind,
    out: usize,
    inp: usize,
    rng: &mut RandomSource,
) -> Matrix {
    match (kind, init) {
        (LayerKind::Standard, InitKind::Identity) | (LayerKind::Standard, InitKind::ScaledUniform) => {
            let bound = (1.0 / inp as f64).sqrt();
            let data: Vec<f64> = (0..out * inp).map(|_| rng.uniform_in(-bound, bound)).collect();
            Matrix::from_vec(out, inp, data).expect("sized correctly")
        }
        (_, InitKind::Identity) if out == inp => Matrix::identity(out),
        (_, InitKind::ScaledUniform) => {
            let bound = (1.0 / inp as f64).sqrt();
            let data: Vec<f64> = (0..out * inp).map(|_| rng.uniform_in(-bound, bound)).collect();
            Matrix::from_vec(out, inp, data).expect("sized correctly")
        }
        _ => orthogonal_init(out, inp, rng),
    }
}

/// Random matrix with orthonormal rows (out <= in) or columns (out > in).
fn orthogonal_init(out: usize, inp: usize, rng: &mut RandomSource) -> Matrix {
    let transpose = out > inp;
    let (rows, cols) = if transpose { (inp, out) } else { (out, inp) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows);
    while basis.len() < rows {
        let mut v = rng.normal_vec(cols);
        for u in &basis {
            let proj = crate::numerics::dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let n = crate::numerics::norm2(&v);
        if n < 1e-8 {
            continue;
        }
        for vi in &mut v {
            *vi /= n;
        }
        basis.push(v);
    }
    let m = Matrix::from_rows(&basis).expect("rows are equal length");
    if transpose {
        m.transpose()
    } else {
        m
    }
}

/// Builds an MLP: input zero-padded to `width` when narrower (the zero
/// channel concatenation adapted to flat features), `depth` dense layers,
/// MaxMin between layers for AOL / Standard stacks, and a plain head.
///
/// CPL stacks put their nonlinearity inside the residual layer, so they use
/// no separate activation; their rectangular first/last layers are AOL so
/// the whole composition stays 1-Lipschitz.
pub fn build_mlp(
    input_dim: usize,
    classes: usize,
    cfg: &MlpConfig,
    rng: &mut RandomSource,
) -> Result<Network, LipnetError> {
    if cfg.depth < 2 {
        return Err(LipnetError::BadConfig("mlp depth must be at least 2".into()));
    }
    if cfg.width % 2 != 0 {
        return Err(LipnetError::BadConfig("mlp width must be even for MaxMin".into()));
    }
    let in0 = input_dim.max(cfg.width);
    let mut layers = Vec::with_capacity(cfg.depth);
    let hidden_activation = match cfg.layer_kind {
        LayerKind::Cpl => Activation::None,
        LayerKind::Standard => Activation::RectifiedLinear,
        LayerKind::Aol => Activation::MaxMin,
    };
    for i in 0..cfg.depth {
        let (inp, out) = if i == 0 {
            (in0, cfg.width)
        } else if i + 1 == cfg.depth {
            (cfg.width, classes)
        } else {
            (cfg.width, cfg.width)
        };
        let rectangular = inp != out;
        let mut kind = cfg.layer_kind;
        if kind == LayerKind::Cpl && rectangular {
            kind = LayerKind::Aol;
        }
        let activation = if i + 1 == cfg.depth { Activation::None } else { hidden_activation };
        let w = init_weight(kind, cfg.init, out, inp, rng);
        layers.push(DenseLayer::new(kind, w, vec![0.0; out], activation)?);
    }
    Network::new(layers, input_dim)
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"LNET1";

/// Serializes a network: magic "LNET1", input dim, layer count, then per
/// layer kind/activation tags, shape, and little-endian f64 parameter
/// blocks (plus the CPL power vector when present).
pub fn save_checkpoint(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(net.input_dim as u64).to_le_bytes());
    out.extend_from_slice(&(net.layers.len() as u64).to_le_bytes());
    for layer in &net.layers {
        out.push(match layer.kind {
            LayerKind::Aol => 0,
            LayerKind::Cpl => 1,
            LayerKind::Standard => 2,
        });
        out.push(match layer.activation {
            Activation::MaxMin => 0,
            Activation::RectifiedLinear => 1,
            Activation::None => 2,
        });
        out.extend_from_slice(&(layer.out_dim() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u64).to_le_bytes());
        for &v in layer.w.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &layer.b {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &layer.cpl_state {
            Some(state) => {
                out.push(1);
                for &v in &state.v {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.push(0),
        }
    }
    out
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Network, LipnetError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], LipnetError> {
        if bytes.len() < *pos + n {
            return Err(LipnetError::Checkpoint("truncated".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 5)? != CHECKPOINT_MAGIC {
        return Err(LipnetError::Checkpoint("bad magic".into()));
    }
    let read_u64 = |pos: &mut usize| -> Result<u64, LipnetError> {
        if bytes.len() < *pos + 8 {
            return Err(LipnetError::Checkpoint("truncated".into()));
        }
        let v = u64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        Ok(v)
    };
    let read_f64s = |pos: &mut usize, n: usize| -> Result<Vec<f64>, LipnetError> {
        if bytes.len() < *pos + 8 * n {
            return Err(LipnetError::Checkpoint("truncated".into()));
        }
        let out = bytes[*pos..*pos + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *pos += 8 * n;
        Ok(out)
    };

    let input_dim = read_u64(&mut pos)? as usize;
    let layer_count = read_u64(&mut pos)? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let kind = match take(&mut pos, 1)?[0] {
            0 => LayerKind::Aol,
            1 => LayerKind::Cpl,
            2 => LayerKind::Standard,
            k => return Err(LipnetError::Checkpoint(format!("unknown layer kind {k}"))),
        };
        let activation = match take(&mut pos, 1)?[0] {
            0 => Activation::MaxMin,
            1 => Activation::RectifiedLinear,
            2 => Activation::None,
            a => return Err(LipnetError::Checkpoint(format!("unknown activation {a}"))),
        };
        let out = read_u64(&mut pos)? as usize;
        let inp = read_u64(&mut pos)? as usize;
        let w = Matrix::from_vec(out, inp, read_f64s(&mut pos, out * inp)?)
            .map_err(|e| LipnetError::Checkpoint(e.to_string()))?;
        let b = read_f64s(&mut pos, out)?;
        let mut layer = DenseLayer::new(kind, w, b, activation)?;
        if take(&mut pos, 1)?[0] == 1 {
            layer.cpl_state = Some(super::layer::CplState { v: read_f64s(&mut pos, inp)? });
        }
        layers.push(layer);
    }
    Network::new(layers, input_dim)
}
