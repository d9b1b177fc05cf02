//! Symmetric eigendecomposition (cyclic Jacobi) and power iteration.

use super::{Matrix, NumericsError, RandomSource};

/// Symmetry check tolerance for `sym_eig` inputs.
const SYMMETRY_TOL: f64 = 1e-9;
/// Off-diagonal Frobenius norm threshold, relative to the input scale.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Result of a symmetric eigendecomposition `S = Q diag(lambda) Q^T`.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered to match `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl SymEig {
    /// Reconstructs `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for r in 0..n {
            for c in 0..n {
                scaled.set(r, c, q.get(r, c) * self.eigenvalues[c]);
            }
        }
        scaled.matmul_transb(q)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = a.get(i, j);
                s += v * v;
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Input must be symmetric to 1e-9; the returned eigenvalues are sorted
/// descending and the eigenvector columns are orthonormal.
pub fn sym_eig(s: &Matrix) -> Result<SymEig, NumericsError> {
    if s.is_empty() {
        return Err(NumericsError::EmptyMatrix);
    }
    if s.rows() != s.cols() {
        return Err(NumericsError::NotSquare { rows: s.rows(), cols: s.cols() });
    }
    if !s.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = s.rows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if dev > SYMMETRY_TOL {
        return Err(NumericsError::NotSymmetric { deviation: dev, tolerance: SYMMETRY_TOL });
    }

    let mut a = s.clone();
    // Force exact symmetry so rotations keep both triangles consistent.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let mut q = Matrix::identity(n);
    let threshold = JACOBI_TOL * a.frobenius_norm().max(1.0);

    for _sweep in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..n - 1 {
            for r in p + 1..n {
                let apr = a.get(p, r);
                if apr.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a.get(r, r) - a.get(p, p)) / (2.0 * apr);
                // tan of the rotation angle; the smaller root for stability
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sgn = t * c;
                let tau = sgn / (1.0 + c);

                let app = a.get(p, p);
                let arr = a.get(r, r);
                a.set(p, p, app - t * apr);
                a.set(r, r, arr + t * apr);
                a.set(p, r, 0.0);
                a.set(r, p, 0.0);
                for i in 0..n {
                    if i != p && i != r {
                        let aip = a.get(i, p);
                        let air = a.get(i, r);
                        let new_p = aip - sgn * (air + tau * aip);
                        let new_r = air + sgn * (aip - tau * air);
                        a.set(i, p, new_p);
                        a.set(p, i, new_p);
                        a.set(i, r, new_r);
                        a.set(r, i, new_r);
                    }
                }
                for i in 0..n {
                    let qip = q.get(i, p);
                    let qir = q.get(i, r);
                    q.set(i, p, qip - sgn * (qir + tau * qip));
                    q.set(i, r, qir + sgn * (qip - tau * qir));
                }
            }
        }
    }

    // Sort eigenpairs descending.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for rix in 0..n {
            eigenvectors.set(rix, new_c, q.get(rix, old_c));
        }
    }
    Ok(SymEig { eigenvalues, eigenvectors })
}

/// Largest singular value of `m` with its right singular vector, by power
/// iteration on `m^T m`.
///
/// The returned estimate never exceeds the true value and is nondecreasing
/// in the iteration count. A zero matrix yields `(0, zero vector)`.
pub fn power_iteration(
    m: &Matrix,
    iters: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>), NumericsError> {
    if m.is_empty() {
        return Err(NumericsError::EmptyMatrix);
    }
    if iters == 0 {
        return Err(NumericsError::ZeroIterations);
    }
    if m.data().iter().all(|&x| x == 0.0) {
        return Ok((0.0, vec![0.0; m.cols()]));
    }

    // Fixed-seed start vector: reproducible, and almost surely not orthogonal
    // to the leading singular direction.
    let mut rng = RandomSource::new(0x7064_7A39_BD3C_55F1);
    let mut v = power_start(m.cols(), &mut rng);
    let mut sigma_prev = -1.0;
    let mut sigma = 0.0;
    for _ in 0..iters {
        let mv = m.matvec(&v);
        let mut w = m.matvec_t(&mv);
        let nw = super::norm2(&w);
        if nw == 0.0 {
            // v is in the null space; restart from a fresh direction
            v = power_start(m.cols(), &mut rng);
            continue;
        }
        for x in &mut w {
            *x /= nw;
        }
        v = w;
        sigma = super::norm2(&m.matvec(&v));
        if sigma_prev >= 0.0 && (sigma - sigma_prev).abs() <= tol * sigma.max(1.0) {
            break;
        }
        sigma_prev = sigma;
    }
    Ok((sigma, v))
}

fn power_start(len: usize, rng: &mut RandomSource) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.uniform() + 0.1).collect();
    super::normalize(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_sigma_is_one() {
        let (s, _) = power_iteration(&Matrix::identity(3), 100, 1e-12).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_sigma_is_max_entry() {
        let m = Matrix::diag(&[3.0, 1.0]);
        let (s, v) = power_iteration(&m, 500, 1e-14).unwrap();
        assert!((s - 3.0).abs() < 1e-10);
        assert!(v[0].abs() > 0.999);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let (s, v) = power_iteration(&Matrix::zeros(4, 3), 10, 1e-12).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn power_iteration_matches_eigensolver() {
        let mut rng = RandomSource::new(17);
        let data: Vec<f64> = (0..25).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let m = Matrix::from_vec(5, 5, data).unwrap();
        let (sigma, _) = power_iteration(&m, 1000, 0.0).unwrap();
        let gram = m.gram();
        let eig = sym_eig(&gram).unwrap();
        let sigma_true = eig.eigenvalues[0].max(0.0).sqrt();
        assert!((sigma - sigma_true).abs() < 1e-8, "{sigma} vs {sigma_true}");
        assert!(sigma <= sigma_true + 1e-10);
    }

    #[test]
    fn sym_eig_diagonal() {
        let eig = sym_eig(&Matrix::diag(&[5.0, 2.0, 1.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![5.0, 2.0, 1.0]);
        for c in 0..3 {
            let col = eig.eigenvectors.column(c);
            assert!((col[c].abs() - 1.0).abs() < 1e-12);
        }
    }

    // Characteristic polynomial of [[2,1],[1,2]] is (l-3)(l-1).
    #[test]
    fn sym_eig_two_by_two() {
        let m = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let eig = sym_eig(&m).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_reconstruction_and_orthonormality() {
        let mut rng = RandomSource::new(23);
        let n = 8;
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform_in(-2.0, 2.0);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let eig = sym_eig(&s).unwrap();
        assert!(eig.reconstruct().max_abs_diff(&s) <= 1e-8);
        let q = &eig.eigenvectors;
        let qtq = q.gram();
        assert!(qtq.max_abs_diff(&Matrix::identity(n)) <= 1e-9);
        let trace: f64 = (0..n).map(|i| s.get(i, i)).sum();
        let lam_sum: f64 = eig.eigenvalues.iter().sum();
        assert!((trace - lam_sum).abs() <= 1e-8);
    }

    #[test]
    fn sym_eig_handles_larger_matrices() {
        let mut rng = RandomSource::new(29);
        let n = 64;
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform_in(-1.0, 1.0);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let eig = sym_eig(&s).unwrap();
        assert!(eig.reconstruct().max_abs_diff(&s) <= 1e-8);
        for pair in eig.eigenvalues.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn sym_eig_rejects_asymmetry() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.2, 1.0]).unwrap();
        assert!(matches!(sym_eig(&m), Err(NumericsError::NotSymmetric { .. })));
    }
}
