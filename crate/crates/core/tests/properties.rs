//! Property tests for the invariants that hold by construction.

use lipbench::cover::{nn_certified_radius, nn_predict, Metric, OneNNModel};
use lipbench::datasets::{read_cache, subsample_indices, write_cache, LabeledDataset};
use lipbench::lipnet::{accuracy_of, aol_effective_weight, cra, maxmin};
use lipbench::numerics::{
    dist2, inv_norm_cdf, norm_cdf, power_iteration, sym_eig, Matrix, RandomSource,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn maxmin_is_norm_preserving_and_one_lipschitz(
        a in proptest::collection::vec(-10.0f64..10.0, 4..=12),
        b in proptest::collection::vec(-10.0f64..10.0, 4..=12),
    ) {
        let len = (a.len().min(b.len()) / 2) * 2;
        let (a, b) = (&a[..len], &b[..len]);
        let ma = maxmin(a).unwrap();
        let mb = maxmin(b).unwrap();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nma: f64 = ma.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((na - nma).abs() <= 1e-12);
        prop_assert!(dist2(&ma, &mb) <= dist2(a, b) * (1.0 + 1e-12));
    }

    #[test]
    fn aol_rescaling_bounds_the_spectral_norm(
        data in proptest::collection::vec(-3.0f64..3.0, 36),
    ) {
        let w = Matrix::from_vec(6, 6, data).unwrap();
        let eff = aol_effective_weight(&w);
        let (sigma, _) = power_iteration(&eff, 1500, 1e-13).unwrap();
        prop_assert!(sigma <= 1.0 + 1e-9, "sigma {sigma}");
    }

    #[test]
    fn power_iteration_never_exceeds_eigensolver(
        data in proptest::collection::vec(-2.0f64..2.0, 20),
    ) {
        let m = Matrix::from_vec(4, 5, data).unwrap();
        let (sigma, _) = power_iteration(&m, 800, 0.0).unwrap();
        let eig = sym_eig(&m.gram()).unwrap();
        let truth = eig.eigenvalues[0].max(0.0).sqrt();
        prop_assert!(sigma <= truth + 1e-8, "{sigma} > {truth}");
        prop_assert!((sigma - truth).abs() <= 1e-6 * truth.max(1.0));
    }

    #[test]
    fn cache_round_trip_bits(
        features in proptest::collection::vec(-1.0f64..1.0, 12),
        labels in proptest::collection::vec(0usize..4, 3),
    ) {
        let ds = LabeledDataset::new(
            Matrix::from_vec(3, 4, features).unwrap(),
            labels,
            (1, 2, 2),
            4,
        ).unwrap();
        let bytes = write_cache(&ds);
        let back = read_cache(&bytes).unwrap();
        prop_assert_eq!(write_cache(&back), bytes);
    }

    #[test]
    fn subsample_prefixes_nest(total in 5usize..60, seed in 0u64..500) {
        let small = total / 2;
        let big = subsample_indices(total, total, seed);
        let prefix = subsample_indices(total, small, seed);
        prop_assert_eq!(&big[..small], &prefix[..]);
    }

    #[test]
    fn inverse_cdf_round_trips_and_mirrors(p in 1e-6f64..0.5) {
        let x = inv_norm_cdf(p).unwrap();
        prop_assert!((norm_cdf(x) - p).abs() <= 1e-8);
        let mirrored = inv_norm_cdf(1.0 - p).unwrap();
        prop_assert!((x + mirrored).abs() <= 1e-12);
    }

    #[test]
    fn cra_is_monotone_and_below_accuracy(
        scores in proptest::collection::vec(-2.0f64..2.0, 30),
        eps1 in 0.0f64..0.5,
        eps2 in 0.0f64..0.5,
    ) {
        let m = Matrix::from_vec(10, 3, scores).unwrap();
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let (lo, hi) = if eps1 <= eps2 { (eps1, eps2) } else { (eps2, eps1) };
        prop_assert!(cra(&m, &labels, hi) <= cra(&m, &labels, lo));
        prop_assert!(cra(&m, &labels, 0.0) <= accuracy_of(&m, &labels));
    }

    #[test]
    fn nn_certified_radius_is_sound(
        points in proptest::collection::vec(0.0f64..1.0, 12),
        probe in proptest::collection::vec(0.0f64..1.0, 2),
        shift in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let model = OneNNModel::new(
            Matrix::from_vec(6, 2, points).unwrap(),
            vec![0, 1, 0, 1, 0, 1],
            Metric::L2,
        ).unwrap();
        let radius = nn_certified_radius(&model, &probe);
        prop_assume!(radius.is_finite() && radius > 0.0);
        let norm: f64 = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 0.0);
        let scale = 0.99 * radius / norm;
        let moved: Vec<f64> = probe.iter().zip(&shift).map(|(p, s)| p + s * scale).collect();
        prop_assert_eq!(nn_predict(&model, &moved), nn_predict(&model, &probe));
    }
}

#[test]
fn rng_streams_disagree_between_labels() {
    let root = RandomSource::new(1234);
    let mut a = root.split("alpha");
    let mut b = root.split("beta");
    let distinct = (0..1000).filter(|_| a.next_u64() != b.next_u64()).count();
    assert!(distinct > 990);
}
