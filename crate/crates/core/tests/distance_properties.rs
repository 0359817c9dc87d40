use blendmatch::distance::{
    blend_ranked, blend_scaled, mahalanobis_distance, select_donors, CovarianceEstimate,
    DistanceVector,
};
use blendmatch::rng::stream;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn distinct(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] != w[1])
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, dim)
}

proptest! {
    #[test]
    fn identity_covariance_is_euclidean(x in point(3), y in point(3)) {
        let cov = CovarianceEstimate::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let md = mahalanobis_distance(&x, &y, &cov).unwrap();
        let euclid = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!((md - euclid).abs() <= 1e-10 * euclid.max(1.0));
    }

    #[test]
    fn diagonal_rescaling_leaves_distance_unchanged(
        x in point(2),
        y in point(2),
        a in 0.1..10.0f64,
        b in 0.1..10.0f64,
        v1 in 0.5..4.0f64,
        v2 in 0.5..4.0f64,
        c in -0.4..0.4f64,
    ) {
        let c = c * (v1 * v2).sqrt();
        let sigma = DMatrix::from_row_slice(2, 2, &[v1, c, c, v2]);
        let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b]));
        let scaled_sigma = &scale * &sigma * &scale;
        let base = CovarianceEstimate::from_matrix(sigma).unwrap();
        let scaled = CovarianceEstimate::from_matrix(scaled_sigma).unwrap();
        let d0 = mahalanobis_distance(&x, &y, &base).unwrap();
        let d1 = mahalanobis_distance(&[a * x[0], b * x[1]], &[a * y[0], b * y[1]], &scaled).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-8 * d0.max(1.0));
    }

    #[test]
    fn whitening_agrees_with_quadratic_form(x in point(3), y in point(3), seed in 0u64..1000) {
        use rand::Rng;
        let mut rng = stream(seed);
        let data = DMatrix::from_fn(20, 3, |_, _| rng.gen_range(-3.0..3.0));
        let cov = CovarianceEstimate::estimate(&data).unwrap();
        let wx = cov.whiten(&x).unwrap();
        let wy = cov.whiten(&y).unwrap();
        let via_whitening = wx.iter().zip(&wy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dv = nalgebra::DVector::from_vec(d);
        let quad = (dv.transpose() * cov.inverse() * &dv)[(0, 0)].max(0.0).sqrt();
        prop_assert!((via_whitening - quad).abs() <= 1e-8 * quad.max(1.0));
    }

    #[test]
    fn full_predictive_weight_selects_like_pd(
        pd in prop::collection::vec(0.0..100.0f64, 6..40),
        seed in 0u64..10_000,
        k in 1usize..6,
    ) {
        prop_assume!(distinct(&pd));
        let md: Vec<f64> = pd.iter().map(|v| (v * 7.31).sin().abs()).collect();
        let pdv = DistanceVector::predictive(pd.clone()).unwrap();
        let mdv = DistanceVector::mahalanobis(md).unwrap();
        let reference = select_donors(&pd, k, &mut stream(seed)).unwrap();
        let ranked = blend_ranked(&pdv, &mdv, 1.0, &mut stream(seed)).unwrap();
        let scaled = blend_scaled(&pdv, &mdv, 1.0).unwrap();
        prop_assert_eq!(&select_donors(ranked.values(), k, &mut stream(seed)).unwrap(), &reference);
        prop_assert_eq!(&select_donors(scaled.values(), k, &mut stream(seed)).unwrap(), &reference);
    }

    #[test]
    fn ranked_blend_lies_between_one_and_n(
        pd in prop::collection::vec(0.0..10.0f64, 1..50),
        p in 0.0..=1.0f64,
        seed in 0u64..1000,
    ) {
        let n = pd.len();
        let md: Vec<f64> = pd.iter().rev().map(|v| v.round()).collect();
        let out = blend_ranked(
            &DistanceVector::predictive(pd).unwrap(),
            &DistanceVector::mahalanobis(md).unwrap(),
            p,
            &mut stream(seed),
        )
        .unwrap();
        for v in out.values() {
            prop_assert!(*v >= 1.0 - 1e-12 && *v <= n as f64 + 1e-12);
        }
        // ranks are permutations, so the blend sums to n(n+1)/2
        let total: f64 = out.values().iter().sum();
        prop_assert!((total - (n * (n + 1)) as f64 / 2.0).abs() < 1e-8 * n as f64);
    }

    #[test]
    fn scaled_blend_is_centered(
        pd in prop::collection::vec(0.0..10.0f64, 2..50),
        p in 0.0..=1.0f64,
    ) {
        let md: Vec<f64> = pd.iter().map(|v| (v - 5.0).abs()).collect();
        let out = blend_scaled(
            &DistanceVector::predictive(pd).unwrap(),
            &DistanceVector::mahalanobis(md).unwrap(),
            p,
        )
        .unwrap();
        let mean = out.values().iter().sum::<f64>() / out.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn selection_ignores_monotone_transforms(
        d in prop::collection::vec(0.0..100.0f64, 5..40),
        k in 1usize..5,
        seed in 0u64..1000,
    ) {
        prop_assume!(distinct(&d));
        let transformed: Vec<f64> = d.iter().map(|v| 3.0 * v.sqrt() + 2.0).collect();
        prop_assert_eq!(
            select_donors(&d, k, &mut stream(seed)).unwrap(),
            select_donors(&transformed, k, &mut stream(seed)).unwrap()
        );
    }

    #[test]
    fn selection_returns_k_smallest_ascending(
        d in prop::collection::vec(0.0..5.0f64, 1..40),
        k in 1usize..10,
        seed in 0u64..1000,
    ) {
        let k = k.min(d.len());
        let chosen = select_donors(&d, k, &mut stream(seed)).unwrap();
        prop_assert_eq!(chosen.len(), k);
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let picked: Vec<f64> = chosen.iter().map(|&i| d[i]).collect();
        prop_assert_eq!(&picked, &sorted[..k].to_vec());
        let mut unique = chosen.clone();
        unique.sort_unstable();
        unique.dedup();
        prop_assert_eq!(unique.len(), k);
    }
}

#[test]
fn boundary_ties_are_shared_fairly() {
    let d = [0.0, 1.0, 1.0, 1.0, 1.0];
    let mut counts = [0usize; 5];
    for seed in 0..4000 {
        for i in select_donors(&d, 2, &mut stream(seed)).unwrap() {
            counts[i] += 1;
        }
    }
    assert_eq!(counts[0], 4000);
    for &c in &counts[1..] {
        // each tied donor fills the single open slot a quarter of the time
        assert!(
            (c as f64 - 1000.0).abs() < 4.0 * (4000.0f64 * 0.25 * 0.75).sqrt(),
            "{counts:?}"
        );
    }
}
