//! Constrained dense layers and activations.
//!
//! AOL rescales the raw weights by per-column factors derived from the
//! absolute Gram matrix so the effective map has spectral norm at most 1.
//! CPL is the residual layer `x - (2/sigma^2) W^T relu(Wx + b)`, 1-Lipschitz
//! whenever `sigma >= ||W||_2`. MaxMin permutes each coordinate pair into
//! (max, min) order, which preserves the Euclidean norm exactly.

use super::LipnetError;
use crate::numerics::{norm2, power_iteration, Matrix, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Aol,
    Cpl,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    MaxMin,
    RectifiedLinear,
    None,
}

/// Per-column AOL rescaling factors `d_j = (sum_i |W^T W|_{ji})^{-1/2}`
/// (zero where the row sum vanishes) together with the absolute row sums
/// and the sign pattern of `W^T W` needed by the backward pass.
pub(crate) struct AolRescale {
    pub d: Vec<f64>,
    pub m: Vec<f64>,
    pub sign_t: Matrix,
}

pub(crate) fn aol_rescale(w: &Matrix) -> AolRescale {
    let t = w.gram();
    let n = t.rows();
    let mut m = vec![0.0; n];
    let mut sign_t = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let v = t.get(j, i);
            m[j] += v.abs();
            sign_t.set(j, i, if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            });
        }
    }
    let d = m.iter().map(|&mj| if mj > 0.0 { 1.0 / mj.sqrt() } else { 0.0 }).collect();
    AolRescale { d, m, sign_t }
}

/// Effective AOL weight `W' = W diag(d)`; `sigma_max(W') <= 1`.
pub fn aol_effective_weight(w: &Matrix) -> Matrix {
    let rescale = aol_rescale(w);
    scale_columns(w, &rescale.d)
}

pub(crate) fn scale_columns(w: &Matrix, d: &[f64]) -> Matrix {
    let mut out = w.clone();
    for r in 0..out.rows() {
        for (v, &dj) in out.row_mut(r).iter_mut().zip(d) {
            *v *= dj;
        }
    }
    out
}

/// Persistent power-iteration state for a CPL layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CplState {
    pub v: Vec<f64>,
}

impl CplState {
    pub fn new(in_dim: usize) -> Self {
        let mut rng = RandomSource::new(0x4350_4C21);
        let mut v: Vec<f64> = (0..in_dim).map(|_| rng.uniform() + 0.5).collect();
        crate::numerics::normalize(&mut v);
        Self { v }
    }
}

/// Advances the persistent power iteration by `steps` and returns the
/// current spectral norm estimate of `w`.
pub fn cpl_refresh_sigma(w: &Matrix, state: &mut CplState, steps: usize) -> f64 {
    let mut sigma = 0.0;
    for _ in 0..steps {
        let mv = w.matvec(&state.v);
        let mut next = w.matvec_t(&mv);
        let n = norm2(&next);
        if n == 0.0 {
            return 0.0;
        }
        for x in &mut next {
            *x /= n;
        }
        state.v = next;
        sigma = norm2(&w.matvec(&state.v));
    }
    sigma
}

/// Fully converged spectral norm for evaluation-time CPL forwards.
pub fn cpl_converged_sigma(w: &Matrix) -> f64 {
    power_iteration(w, 5000, 1e-13).map(|(s, _)| s).unwrap_or(0.0)
}

/// CPL forward map `z = x - (2/sigma^2) W^T max(Wx + b, 0)`.
///
/// Requires a square `W` (the residual needs in-dim = out-dim). A zero (or
/// numerically zero-sigma) weight matrix degenerates to the identity.
pub fn cpl_forward(x: &[f64], w: &Matrix, b: &[f64], sigma: f64) -> Result<Vec<f64>, LipnetError> {
    if w.rows() != w.cols() {
        return Err(LipnetError::CplNotSquare { rows: w.rows(), cols: w.cols() });
    }
    if x.len() != w.cols() || b.len() != w.rows() {
        return Err(LipnetError::DimensionMismatch {
            expected: w.cols(),
            got: x.len(),
            context: "cpl_forward input",
        });
    }
    if sigma < 1e-12 {
        return Ok(x.to_vec());
    }
    let alpha = 2.0 / (sigma * sigma);
    let mut u = w.matvec(x);
    for (ui, &bi) in u.iter_mut().zip(b) {
        *ui = (*ui + bi).max(0.0);
    }
    let correction = w.matvec_t(&u);
    Ok(x.iter().zip(&correction).map(|(&xi, &ci)| xi - alpha * ci).collect())
}

/// MaxMin activation: each coordinate pair is emitted as (max, min).
pub fn maxmin(v: &[f64]) -> Result<Vec<f64>, LipnetError> {
    if v.len() % 2 != 0 {
        return Err(LipnetError::OddMaxMinWidth(v.len()));
    }
    let mut out = Vec::with_capacity(v.len());
    for pair in v.chunks_exact(2) {
        if pair[0] >= pair[1] {
            out.push(pair[0]);
            out.push(pair[1]);
        } else {
            out.push(pair[1]);
            out.push(pair[0]);
        }
    }
    Ok(out)
}

/// In-place MaxMin over each row of a batch.
pub(crate) fn maxmin_rows(z: &mut Matrix) {
    for r in 0..z.rows() {
        for pair in z.row_mut(r).chunks_exact_mut(2) {
            if pair[0] < pair[1] {
                pair.swap(0, 1);
            }
        }
    }
}

/// One dense layer: raw weights, bias, activation tag, and (for CPL) the
/// persistent power-iteration vector.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub kind: LayerKind,
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
    pub cpl_state: Option<CplState>,
}

impl DenseLayer {
    pub fn new(
        kind: LayerKind,
        w: Matrix,
        b: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, LipnetError> {
        if b.len() != w.rows() {
            return Err(LipnetError::DimensionMismatch {
                expected: w.rows(),
                got: b.len(),
                context: "bias length",
            });
        }
        if kind == LayerKind::Cpl && w.rows() != w.cols() {
            return Err(LipnetError::CplNotSquare { rows: w.rows(), cols: w.cols() });
        }
        if activation == Activation::MaxMin && w.rows() % 2 != 0 {
            return Err(LipnetError::OddMaxMinWidth(w.rows()));
        }
        let cpl_state = (kind == LayerKind::Cpl).then(|| CplState::new(w.cols()));
        Ok(Self { kind, w, b, activation, cpl_state })
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }
}
