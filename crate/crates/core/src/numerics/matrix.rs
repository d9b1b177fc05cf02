//! Dense row-major `f64` matrix.
//!
//! The multiply kernels use outer-product loop orders (elementwise
//! accumulation over contiguous rows) so they vectorize under strict
//! floating-point semantics, and large products split their output rows
//! across a few threads. Row-parallelism writes disjoint rows, so results
//! are bit-identical for any worker count.

use super::NumericsError;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

static MAX_WORKERS: AtomicUsize = AtomicUsize::new(0);

/// Whether fused-multiply-add vector kernels are available; detected once.
/// Kernel choice is fixed per process, so results stay deterministic on a
/// given machine.
fn use_fma() -> bool {
    static FMA: OnceLock<bool> = OnceLock::new();
    *FMA.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            false
        }
    })
}

/// `out += a * b`, elementwise over equal-length slices.
#[inline(always)]
fn axpy_scalar(out: &mut [f64], a: f64, b: &[f64]) {
    for (o, &bv) in out.iter_mut().zip(b) {
        *o += a * bv;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_fma(out: &mut [f64], a: f64, b: &[f64]) {
    // explicit mul_add lowers to vfmadd under the enabled feature
    for (o, &bv) in out.iter_mut().zip(b) {
        *o = bv.mul_add(a, *o);
    }
}

#[inline(always)]
fn axpy(fma: bool, out: &mut [f64], a: f64, b: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if fma {
        unsafe { axpy_fma(out, a, b) };
        return;
    }
    let _ = fma;
    axpy_scalar(out, a, b);
}

/// `out += a0*b0 + a1*b1 + a2*b2 + a3*b3`, the four contributions fused in
/// ascending order; one pass over `out` quarters the load/store traffic.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy4_fma(out: &mut [f64], a: [f64; 4], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) {
    for i in 0..out.len() {
        let mut o = out[i];
        o = b0[i].mul_add(a[0], o);
        o = b1[i].mul_add(a[1], o);
        o = b2[i].mul_add(a[2], o);
        o = b3[i].mul_add(a[3], o);
        out[i] = o;
    }
}

#[inline(always)]
fn axpy4_scalar(out: &mut [f64], a: [f64; 4], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) {
    for i in 0..out.len() {
        out[i] += a[0] * b0[i] + a[1] * b1[i] + a[2] * b2[i] + a[3] * b3[i];
    }
}

#[inline(always)]
fn axpy4(fma: bool, out: &mut [f64], a: [f64; 4], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if fma {
        unsafe { axpy4_fma(out, a, b0, b1, b2, b3) };
        return;
    }
    let _ = fma;
    axpy4_scalar(out, a, b0, b1, b2, b3);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_fma(a: &[f64], b: &[f64]) -> f64 {
    // four independent lanes so the loop vectorizes without reassociating
    // a single serial reduction
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            acc[l] = a[i].mul_add(b[i], acc[l]);
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dot product dispatched to the FMA kernel when available.
pub(crate) fn fast_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    if use_fma() {
        return unsafe { dot_fma(a, b) };
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Caps the worker threads used by large matrix products (0 = number of
/// available CPUs). Never changes results, only speed.
pub fn set_matmul_workers(n: usize) {
    MAX_WORKERS.store(n, Ordering::Relaxed);
}

fn matmul_workers(madds: usize) -> usize {
    // threading pays off only for multi-megaflop products
    if madds < 4_000_000 {
        return 1;
    }
    let cap = match MAX_WORKERS.load(Ordering::Relaxed) {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    };
    cap.clamp(1, 8)
}

/// Dense matrix with row-major storage.
///
/// Invariant: `data.len() == rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Rectangular identity pattern: ones on the main diagonal, zeros elsewhere.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::ShapeMismatch { rows, cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        if rows.is_empty() {
            return Err(NumericsError::EmptyMatrix);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::ShapeMismatch {
                    rows: rows.len(),
                    cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `self * other`, cache-friendly ikj loop order; large products are
    /// split across output-row chunks.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        if self.rows == 0 || self.cols == 0 || other.cols == 0 {
            return out;
        }
        let cols_out = other.cols;
        let workers = matmul_workers(self.rows * self.cols * cols_out);
        let fma = use_fma();
        let k_quads = self.cols & !3;
        // block output rows so the streamed rows of `other` are reused
        // across the whole block while the block stays cache-resident
        const ROW_BLOCK: usize = 32;
        let kernel = |row_lo: usize, out_rows: &mut [f64]| {
            for (block_idx, block) in out_rows.chunks_mut(ROW_BLOCK * cols_out).enumerate() {
                let first = row_lo + block_idx * ROW_BLOCK;
                let mut k = 0;
                while k < k_quads {
                    let b0 = other.row(k);
                    let b1 = other.row(k + 1);
                    let b2 = other.row(k + 2);
                    let b3 = other.row(k + 3);
                    for (local, out_row) in block.chunks_mut(cols_out).enumerate() {
                        let r = self.row(first + local);
                        let a = [r[k], r[k + 1], r[k + 2], r[k + 3]];
                        if a != [0.0; 4] {
                            axpy4(fma, out_row, a, b0, b1, b2, b3);
                        }
                    }
                    k += 4;
                }
                for k in k_quads..self.cols {
                    let b_row = other.row(k);
                    for (local, out_row) in block.chunks_mut(cols_out).enumerate() {
                        let aik = self.get(first + local, k);
                        if aik != 0.0 {
                            axpy(fma, out_row, aik, b_row);
                        }
                    }
                }
            }
        };
        run_row_chunks(out.data_mut(), self.rows, cols_out, workers, &kernel);
        out
    }

    /// `self * other^T`, computed by materializing the transpose once so
    /// the inner loops stay contiguous.
    pub fn matmul_transb(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transb dimension mismatch");
        self.matmul(&other.transpose())
    }

    /// `self^T * other` without materializing the transpose.
    pub fn transa_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "transa_matmul dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        if self.rows == 0 || self.cols == 0 || other.cols == 0 {
            return out;
        }
        let cols_out = other.cols;
        let workers = matmul_workers(self.rows * self.cols * cols_out);
        let fma = use_fma();
        let k_quads = self.rows & !3;
        let kernel = |row_lo: usize, out_rows: &mut [f64]| {
            let mut k = 0;
            while k < k_quads {
                let (a0, a1, a2, a3) =
                    (self.row(k), self.row(k + 1), self.row(k + 2), self.row(k + 3));
                let (b0, b1, b2, b3) =
                    (other.row(k), other.row(k + 1), other.row(k + 2), other.row(k + 3));
                for (local, out_row) in out_rows.chunks_mut(cols_out).enumerate() {
                    let i = row_lo + local;
                    let a = [a0[i], a1[i], a2[i], a3[i]];
                    if a != [0.0; 4] {
                        axpy4(fma, out_row, a, b0, b1, b2, b3);
                    }
                }
                k += 4;
            }
            for k in k_quads..self.rows {
                let a_row = self.row(k);
                let b_row = other.row(k);
                for (local, out_row) in out_rows.chunks_mut(cols_out).enumerate() {
                    let a = a_row[row_lo + local];
                    if a != 0.0 {
                        axpy(fma, out_row, a, b_row);
                    }
                }
            }
        };
        run_row_chunks(out.data_mut(), self.cols, cols_out, workers, &kernel);
        out
    }

    /// Gram matrix `self^T * self`, using symmetry: only the upper triangle
    /// is accumulated, then mirrored.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut out = Matrix::zeros(n, n);
        if n == 0 || self.rows == 0 {
            return out;
        }
        let workers = matmul_workers(self.rows * n * n / 2);
        let fma = use_fma();
        let k_quads = self.rows & !3;
        // row blocks keep the output slice hot while rows of self stream
        const ROW_BLOCK: usize = 32;
        let kernel = |row_lo: usize, out_rows: &mut [f64]| {
            for (block_idx, block) in out_rows.chunks_mut(ROW_BLOCK * n).enumerate() {
                let first = row_lo + block_idx * ROW_BLOCK;
                let mut k = 0;
                while k < k_quads {
                    let (r0, r1, r2, r3) =
                        (self.row(k), self.row(k + 1), self.row(k + 2), self.row(k + 3));
                    for (local, out_row) in block.chunks_mut(n).enumerate() {
                        let i = first + local;
                        let a = [r0[i], r1[i], r2[i], r3[i]];
                        if a != [0.0; 4] {
                            axpy4(fma, &mut out_row[i..], a, &r0[i..], &r1[i..], &r2[i..], &r3[i..]);
                        }
                    }
                    k += 4;
                }
                for k in k_quads..self.rows {
                    let a_row = self.row(k);
                    for (local, out_row) in block.chunks_mut(n).enumerate() {
                        let i = first + local;
                        let aki = a_row[i];
                        if aki != 0.0 {
                            axpy(fma, &mut out_row[i..], aki, &a_row[i..]);
                        }
                    }
                }
            }
        };
        run_row_chunks(out.data_mut(), n, n, workers, &kernel);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = out.get(i, j);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|r| fast_dot(self.row(r), v)).collect()
    }

    /// `self^T * v`.
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }
}

/// Runs `kernel(first_row, rows_slice)` over fixed row chunks of `out`,
/// either inline or on scoped threads. Chunk boundaries depend only on the
/// worker count passed in, and every output row is written by exactly one
/// kernel invocation running serially, so results are bit-identical.
fn run_row_chunks(
    out: &mut [f64],
    rows: usize,
    cols: usize,
    workers: usize,
    kernel: &(dyn Fn(usize, &mut [f64]) + Sync),
) {
    if workers <= 1 || rows < 2 {
        kernel(0, out);
        return;
    }
    let chunk_rows = rows.div_ceil(workers);
    std::thread::scope(|scope| {
        for (idx, chunk) in out.chunks_mut(chunk_rows * cols).enumerate() {
            scope.spawn(move || kernel(idx * chunk_rows, chunk));
        }
    });
}
