//! Principal-component analysis of flattened image datasets and
//! construction of subspace-projected datasets.
//!
//! The decomposition runs on the sample covariance (divisor n-1) through
//! the symmetric eigensolver; component indices are 1-based throughout to
//! match the usual "PCs 1-16" convention, and the training mean is always
//! added back after projection so projected images stay in image space.

use crate::datasets::LabeledDataset;
use crate::numerics::{sym_eig, Matrix};
use thiserror::Error;

/// Desk-scale bound on the feature dimension for the dense eigensolver.
pub const MAX_PCA_DIM: usize = 4096;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature dimension {0} exceeds the supported bound {MAX_PCA_DIM}")]
    TooWide(usize),
    #[error("component index {index} invalid for {dim} components (1-based)")]
    BadIndex { index: usize, dim: usize },
    #[error("data has {got} columns, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("bad component range: {0}")]
    BadRange(String),
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error(transparent)]
    Data(#[from] crate::datasets::DataError),
}

/// Fitted principal components: column means, orthonormal component columns
/// in descending eigenvalue order, and the eigenvalues themselves.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
}

/// Fits PCA on the rows of `x` via the covariance eigendecomposition.
///
/// Sign convention: the largest-magnitude entry of every component is
/// positive, so the decomposition is deterministic.
pub fn fit_pca(x: &Matrix) -> Result<PcaModel, PcaError> {
    let n = x.rows();
    let d = x.cols();
    if n < 2 {
        return Err(PcaError::TooFewSamples(n));
    }
    if d > MAX_PCA_DIM {
        return Err(PcaError::TooWide(d));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = x.clone();
    for r in 0..n {
        for (v, &m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = centered.gram();
    cov.scale(1.0 / (n as f64 - 1.0));
    let eig = sym_eig(&cov)?;
    let mut components = eig.eigenvectors;
    for c in 0..d {
        let mut max_abs = 0.0;
        let mut max_val = 0.0;
        for r in 0..d {
            let v = components.get(r, c);
            if v.abs() > max_abs {
                max_abs = v.abs();
                max_val = v;
            }
        }
        if max_val < 0.0 {
            for r in 0..d {
                components.set(r, c, -components.get(r, c));
            }
        }
    }
    // clamp tiny negative eigenvalues produced by rounding
    let eigenvalues = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    Ok(PcaModel { mean, components, eigenvalues })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_indices(&self, index_set: &[usize]) -> Result<(), PcaError> {
        for &i in index_set {
            if i == 0 || i > self.dim() {
                return Err(PcaError::BadIndex { index: i, dim: self.dim() });
            }
        }
        Ok(())
    }
}

/// Fraction of total variance carried by the 1-based component set.
/// An empty set yields 0.
pub fn variance_fraction(model: &PcaModel, index_set: &[usize]) -> Result<f64, PcaError> {
    model.check_indices(index_set)?;
    let total: f64 = model.eigenvalues.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mut seen = vec![false; model.dim()];
    let mut sum = 0.0;
    for &i in index_set {
        if !seen[i - 1] {
            seen[i - 1] = true;
            sum += model.eigenvalues[i - 1];
        }
    }
    Ok(sum / total)
}

/// Projects rows onto the span of the selected components and maps them
/// back to input space, retaining the mean:
/// `x' = mean + (x - mean) P_S`. Idempotent.
pub fn project_reconstruct(
    model: &PcaModel,
    x: &Matrix,
    index_set: &[usize],
) -> Result<Matrix, PcaError> {
    if x.cols() != model.dim() {
        return Err(PcaError::WidthMismatch { expected: model.dim(), got: x.cols() });
    }
    model.check_indices(index_set)?;
    // deduplicate silently
    let mut seen = vec![false; model.dim()];
    let mut cols = Vec::new();
    for &i in index_set {
        if !seen[i - 1] {
            seen[i - 1] = true;
            cols.push(i - 1);
        }
    }

    let n = x.rows();
    let d = model.dim();
    let k = cols.len();
    // U_S: d x k slice of the component columns
    let mut basis = Matrix::zeros(d, k);
    for (j, &c) in cols.iter().enumerate() {
        for r in 0..d {
            basis.set(r, j, model.components.get(r, c));
        }
    }
    let mut centered = x.clone();
    for r in 0..n {
        for (v, &m) in centered.row_mut(r).iter_mut().zip(&model.mean) {
            *v -= m;
        }
    }
    // (Xc U_S) U_S^T + mean
    let coords = centered.matmul(&basis); // n x k
    let mut out = coords.matmul_transb(&basis); // n x d
    for r in 0..n {
        for (v, &m) in out.row_mut(r).iter_mut().zip(&model.mean) {
            *v += m;
        }
    }
    Ok(out)
}

/// Train/test pair projected onto one component set.
#[derive(Debug, Clone)]
pub struct ProjectedPair {
    pub index_set: Vec<usize>,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub variance_fraction: f64,
}

/// Fits PCA on the training features only, then projects both datasets onto
/// each component set (supports unions such as 1-16 with 513-3072).
pub fn build_pca_datasets(
    ds_train: &LabeledDataset,
    ds_test: &LabeledDataset,
    ranges: &[Vec<usize>],
) -> Result<(PcaModel, Vec<ProjectedPair>), PcaError> {
    let model = fit_pca(&ds_train.features)?;
    let mut pairs = Vec::with_capacity(ranges.len());
    for set in ranges {
        let train_features = project_reconstruct(&model, &ds_train.features, set)?;
        let test_features = project_reconstruct(&model, &ds_test.features, set)?;
        pairs.push(ProjectedPair {
            index_set: set.clone(),
            variance_fraction: variance_fraction(&model, set)?,
            train: LabeledDataset::new(
                train_features,
                ds_train.labels.clone(),
                ds_train.image_shape,
                ds_train.class_count,
            )?,
            test: LabeledDataset::new(
                test_features,
                ds_test.labels.clone(),
                ds_test.image_shape,
                ds_test.class_count,
            )?,
        });
    }
    Ok((model, pairs))
}

/// Parses a 1-based component set like "1-16,513-3072" (comma-separated
/// unions of inclusive ranges or single indices), sorted and deduplicated.
pub fn parse_component_ranges(s: &str) -> Result<Vec<usize>, PcaError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(PcaError::BadRange(format!("empty segment in {s:?}")));
        }
        let parse =
            |t: &str| t.trim().parse::<usize>().map_err(|_| PcaError::BadRange(t.to_string()));
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo = parse(lo)?;
                let hi = parse(hi)?;
                if lo == 0 || lo > hi {
                    return Err(PcaError::BadRange(part.to_string()));
                }
                out.extend(lo..=hi);
            }
            None => {
                let v = parse(part)?;
                if v == 0 {
                    return Err(PcaError::BadRange(part.to_string()));
                }
                out.push(v);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    fn line_data(n: usize) -> Matrix {
        // points on y = x with noise only along the line
        let mut rng = RandomSource::new(5);
        let mut x = Matrix::zeros(n, 2);
        for r in 0..n {
            let t = rng.uniform_in(-2.0, 2.0);
            x.set(r, 0, t);
            x.set(r, 1, t);
        }
        x
    }

    #[test]
    fn line_has_diagonal_first_component() {
        let model = fit_pca(&line_data(100)).unwrap();
        let c0 = model.components.column(0);
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert!((c0[0].abs() - inv_sqrt2).abs() < 1e-10);
        assert!((c0[1].abs() - inv_sqrt2).abs() < 1e-10);
        assert!(c0[0] * c0[1] > 0.0, "first component along (1,1)");
        assert!(model.eigenvalues[1].abs() < 1e-10);
        // sign convention: largest-magnitude entry positive
        assert!(c0[0] > 0.0);
    }

    #[test]
    fn isotropic_data_has_flat_spectrum() {
        let mut rng = RandomSource::new(9);
        let mut x = Matrix::zeros(4000, 3);
        for r in 0..x.rows() {
            for v in x.row_mut(r).iter_mut() {
                *v = rng.normal();
            }
        }
        let model = fit_pca(&x).unwrap();
        let ratio = model.eigenvalues[0] / model.eigenvalues[2];
        assert!(ratio < 1.2, "eigenvalues should be nearly equal, ratio {ratio}");
    }

    #[test]
    fn constant_data_has_zero_spectrum() {
        let x = Matrix::from_vec(3, 2, vec![0.7, -0.2, 0.7, -0.2, 0.7, -0.2]).unwrap();
        let model = fit_pca(&x).unwrap();
        assert!(model.eigenvalues.iter().all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn needs_two_samples() {
        let x = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(fit_pca(&x), Err(PcaError::TooFewSamples(1))));
    }

    fn random_data(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = RandomSource::new(seed);
        let mut x = Matrix::zeros(n, d);
        for r in 0..n {
            for (j, v) in x.row_mut(r).iter_mut().enumerate() {
                // anisotropic so eigenvalues are distinct
                *v = rng.normal() * (1.0 + j as f64);
            }
        }
        x
    }

    #[test]
    fn full_set_reconstructs_and_fraction_is_one() {
        let x = random_data(50, 6, 3);
        let model = fit_pca(&x).unwrap();
        let all: Vec<usize> = (1..=6).collect();
        assert!((variance_fraction(&model, &all).unwrap() - 1.0).abs() < 1e-12);
        let back = project_reconstruct(&model, &x, &all).unwrap();
        assert!(back.max_abs_diff(&x) <= 1e-8);
    }

    #[test]
    fn empty_set_gives_mean_rows_and_zero_fraction() {
        let x = random_data(40, 4, 7);
        let model = fit_pca(&x).unwrap();
        assert_eq!(variance_fraction(&model, &[]).unwrap(), 0.0);
        let back = project_reconstruct(&model, &x, &[]).unwrap();
        for r in 0..back.rows() {
            for (v, m) in back.row(r).iter().zip(&model.mean) {
                assert!((v - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let x = random_data(60, 5, 11);
        let model = fit_pca(&x).unwrap();
        let set = vec![1, 3];
        let once = project_reconstruct(&model, &x, &set).unwrap();
        let twice = project_reconstruct(&model, &once, &set).unwrap();
        assert!(twice.max_abs_diff(&once) <= 1e-10);
    }

    #[test]
    fn disjoint_projections_add_up() {
        let x = random_data(60, 5, 13);
        let model = fit_pca(&x).unwrap();
        let s: Vec<usize> = vec![1, 2];
        let t: Vec<usize> = vec![4, 5];
        let union: Vec<usize> = vec![1, 2, 4, 5];
        let ps = project_reconstruct(&model, &x, &s).unwrap();
        let pt = project_reconstruct(&model, &x, &t).unwrap();
        let pu = project_reconstruct(&model, &x, &union).unwrap();
        // reconstruction(S u T) = reconstruction(S) + reconstruction(T) - mean
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                let expect = ps.get(r, c) + pt.get(r, c) - model.mean[c];
                assert!((pu.get(r, c) - expect).abs() < 1e-10);
            }
        }
        // variance additivity over disjoint sets
        let vu = variance_fraction(&model, &union).unwrap();
        let vs = variance_fraction(&model, &s).unwrap();
        let vt = variance_fraction(&model, &t).unwrap();
        assert!((vu - vs - vt).abs() <= 1e-12);
    }

    #[test]
    fn per_component_variance_matches_eigenvalue() {
        let x = random_data(5000, 4, 17);
        let model = fit_pca(&x).unwrap();
        for c in 0..4 {
            let col = model.components.column(c);
            let mut vals = Vec::with_capacity(x.rows());
            for r in 0..x.rows() {
                let centered: f64 = x
                    .row(r)
                    .iter()
                    .zip(&model.mean)
                    .zip(&col)
                    .map(|((&v, &m), &u)| (v - m) * u)
                    .sum();
                vals.push(centered);
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (vals.len() as f64 - 1.0);
            let lam = model.eigenvalues[c];
            assert!((var - lam).abs() <= 1e-8 * lam.max(1.0), "c={c}: {var} vs {lam}");
        }
    }

    #[test]
    fn union_duplicates_are_deduplicated() {
        let x = random_data(30, 3, 19);
        let model = fit_pca(&x).unwrap();
        let a = variance_fraction(&model, &[1, 1, 2]).unwrap();
        let b = variance_fraction(&model, &[1, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_indices_error() {
        let x = random_data(30, 3, 23);
        let model = fit_pca(&x).unwrap();
        assert!(variance_fraction(&model, &[0]).is_err());
        assert!(variance_fraction(&model, &[4]).is_err());
        assert!(project_reconstruct(&model, &x, &[7]).is_err());
    }

    #[test]
    fn build_datasets_projects_both_splits() {
        let train = LabeledDataset::new(random_data(40, 4, 29), vec![0; 40], (1, 2, 2), 2)
            .unwrap();
        let test =
            LabeledDataset::new(random_data(10, 4, 31), vec![1; 10], (1, 2, 2), 2).unwrap();
        let (model, pairs) =
            build_pca_datasets(&train, &test, &[vec![1, 2, 3, 4], vec![1]]).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs[0].train.features.max_abs_diff(&train.features) <= 1e-8);
        assert!((pairs[0].variance_fraction - 1.0).abs() < 1e-12);
        assert!(pairs[1].variance_fraction < 1.0);
        assert_eq!(model.dim(), 4);
        assert_eq!(pairs[1].test.labels, test.labels);
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_component_ranges("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(
            parse_component_ranges("1-3,7,5-6").unwrap(),
            vec![1, 2, 3, 5, 6, 7]
        );
        assert_eq!(parse_component_ranges("2,2,2").unwrap(), vec![2]);
        assert!(parse_component_ranges("0-3").is_err());
        assert!(parse_component_ranges("5-2").is_err());
        assert!(parse_component_ranges("a-b").is_err());
        assert!(parse_component_ranges("").is_err());
    }
}
