use blendmatch::datagen::{ampute, gen_population, GenConfig, Mechanism, MissingnessConfig};
use blendmatch::distance::BlendSpec;
use blendmatch::imputer::{
    multiple_impute, pool_mean, pool_scalar, pool_single_value, Dataset, ImputationResult,
    ImputeOptions, MatchType, PoolingMode, PreparedImputation,
};
use blendmatch::io::write_imputations;
use blendmatch::rng::stream;
use proptest::prelude::*;

fn incomplete(n: usize, rho: f64, skewed: bool, proportion: f64, seed: u64) -> Dataset {
    let pop = gen_population(&GenConfig::new(n, rho, skewed, seed), &mut stream(seed)).unwrap();
    let miss = MissingnessConfig::new(Mechanism::MarRight, proportion, seed).unwrap();
    let mask = ampute(pop.y(), pop.x(), &miss, &mut stream(seed + 1)).unwrap();
    pop.remask(mask).unwrap()
}

fn all_specs() -> Vec<BlendSpec> {
    let mut specs = vec![BlendSpec::pmm(5).unwrap()];
    for p in [1.0, 0.5, 0.0] {
        specs.push(BlendSpec::ranked(p, 5).unwrap());
        specs.push(BlendSpec::scaled(p, 5).unwrap());
    }
    specs
}

#[test]
fn imputed_values_come_from_observed_donors() {
    let data = incomplete(200, 0.7, true, 0.5, 3);
    let donor_values: Vec<f64> = data.observed_rows().iter().map(|&i| data.y()[i]).collect();
    for spec in all_specs() {
        let result = multiple_impute(&data, spec, ImputeOptions::default(), 5, 11).unwrap();
        for completed in &result.completed {
            for i in 0..data.n() {
                if data.observed()[i] {
                    assert_eq!(completed[i], data.y()[i]);
                } else {
                    assert!(donor_values.contains(&completed[i]), "{}", spec.label());
                }
            }
        }
    }
}

#[test]
fn candidates_are_observed_and_k_sized() {
    let data = incomplete(150, 0.1, false, 0.25, 4);
    let prepared = PreparedImputation::new(
        &data,
        BlendSpec::scaled(0.5, 5).unwrap(),
        Default::default(),
    )
    .unwrap();
    let (completed, candidates) = prepared.impute_pass_traced(&mut stream(1)).unwrap();
    assert_eq!(candidates.len(), data.missing_rows().len());
    for (t, cands) in data.missing_rows().iter().zip(&candidates) {
        assert_eq!(cands.len(), 5);
        assert!(cands.iter().all(|&r| data.observed()[r]));
        assert!(cands.iter().any(|&r| data.y()[r] == completed[*t]));
    }
}

#[test]
fn fixed_seed_reproduces_exactly() {
    let data = incomplete(120, 0.7, false, 0.5, 5);
    for spec in all_specs() {
        let a = multiple_impute(&data, spec, ImputeOptions::default(), 4, 99).unwrap();
        let b = multiple_impute(&data, spec, ImputeOptions::default(), 4, 99).unwrap();
        assert_eq!(a, b);
        let c = multiple_impute(&data, spec, ImputeOptions::default(), 4, 100).unwrap();
        assert_ne!(a.completed, c.completed);
    }
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let data = incomplete(200, 0.7, true, 0.5, 6);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut bytes = Vec::new();
            for spec in all_specs() {
                let r = multiple_impute(&data, spec, ImputeOptions::default(), 6, 7).unwrap();
                write_imputations(&mut bytes, &r).unwrap();
            }
            bytes
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn ranked_full_weight_reproduces_pmm_candidates() {
    let data = incomplete(300, 0.7, true, 0.5, 7);
    let options = ImputeOptions::default();
    let pmm = PreparedImputation::new(&data, BlendSpec::pmm(5).unwrap(), options).unwrap();
    let ranked =
        PreparedImputation::new(&data, BlendSpec::ranked(1.0, 5).unwrap(), options).unwrap();
    for seed in 0..5 {
        let a = pmm.impute_pass_traced(&mut stream(seed)).unwrap();
        let b = ranked.impute_pass_traced(&mut stream(seed)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }
}

#[test]
fn type0_uses_least_squares_predictions() {
    let data = incomplete(100, 0.0, false, 0.25, 8);
    let options = ImputeOptions {
        match_type: MatchType::Type0,
        ..Default::default()
    };
    let prepared = PreparedImputation::new(&data, BlendSpec::pmm(1).unwrap(), options).unwrap();
    assert_eq!(
        prepared.draw_target_coefficients(&mut stream(1)),
        prepared.fit().beta_hat().to_vec()
    );
    // with k = 1 and no parameter draw every pass is identical
    let a = prepared.impute_pass(&mut stream(1)).unwrap();
    let b = prepared.impute_pass(&mut stream(2)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn too_few_donors_is_an_error() {
    let data = incomplete(40, 0.0, false, 0.5, 9);
    let n_obs = data.observed_rows().len();
    assert!(multiple_impute(
        &data,
        BlendSpec::pmm(n_obs + 1).unwrap(),
        Default::default(),
        2,
        1
    )
    .is_err());
    let complete = Dataset::complete(
        data.x().clone(),
        data.x().column(0).iter().copied().collect(),
    )
    .unwrap();
    assert!(multiple_impute(
        &complete,
        BlendSpec::pmm(5).unwrap(),
        Default::default(),
        2,
        1
    )
    .is_err());
}

/// Welford's running mean and sum of squares.
fn welford(values: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    (mean, m2 / (values.len() - 1) as f64)
}

fn result_of(completed: Vec<Vec<f64>>) -> ImputationResult {
    let n = completed[0].len();
    ImputationResult {
        completed,
        observed: vec![true; n],
        spec: BlendSpec::pmm(5).unwrap(),
        seed: 0,
    }
}

fn completions() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..12, 2usize..30)
        .prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(-1e3..1e3f64, n), m))
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn pooled_mean_matches_running_oracle(completed in completions()) {
        let r = result_of(completed.clone());
        let n = completed[0].len() as f64;
        let means: Vec<f64> = completed.iter().map(|c| welford(c).0).collect();
        let (qbar, b) = welford(&means);
        let ubar = completed.iter().map(|c| welford(c).1 / n).sum::<f64>() / means.len() as f64;
        for mode in [PoolingMode::Rubin, PoolingMode::FinitePopulation] {
            let pooled = pool_mean(&r, mode).unwrap();
            prop_assert!(rel_close(pooled.qbar, qbar));
            prop_assert!(rel_close(pooled.b, b));
            prop_assert!(pooled.ci_lower <= pooled.qbar && pooled.qbar <= pooled.ci_upper);
        }
        let rubin = pool_mean(&r, PoolingMode::Rubin).unwrap();
        prop_assert!(rel_close(rubin.ubar, ubar));
        let m = means.len() as f64;
        prop_assert!(rel_close(rubin.t_var, ubar + (1.0 + 1.0 / m) * b));
        prop_assert!(rubin.df > 0.0 && rubin.df <= n - 1.0 + 1e-9);
    }

    #[test]
    fn finite_population_total_is_inflated_between(completed in completions()) {
        let r = result_of(completed);
        let pooled = pool_mean(&r, PoolingMode::FinitePopulation).unwrap();
        let m = r.m() as f64;
        prop_assert_eq!(pooled.t_var, (1.0 + 1.0 / m) * pooled.b);
        prop_assert_eq!(pooled.ubar, 0.0);
        prop_assert_eq!(pooled.df, m - 1.0);
    }

    #[test]
    fn identical_completions_have_no_between_variance(
        column in prop::collection::vec(-1e3..1e3f64, 2..30),
        m in 2usize..10,
    ) {
        let r = result_of(vec![column; m]);
        for mode in [PoolingMode::Rubin, PoolingMode::FinitePopulation] {
            prop_assert_eq!(pool_mean(&r, mode).unwrap().b, 0.0);
        }
    }

    #[test]
    fn single_value_matches_oracle(values in prop::collection::vec(-100.0..100.0f64, 2..60)) {
        let m = values.len();
        let mut r = result_of(values.iter().map(|v| vec![0.0, *v]).collect());
        r.observed = vec![true, false];
        let sv = pool_single_value(&r, 1).unwrap();
        let (mean, var) = welford(&values);
        prop_assert!(rel_close(sv.estimate, mean));
        prop_assert!(rel_close(sv.ssd, var * (m - 1) as f64));
        prop_assert!(rel_close(sv.se, ((1.0 + 1.0 / m as f64) * var).sqrt()));
    }
}

#[test]
fn scalar_pooling_examples() {
    let p = pool_scalar(&[10.0, 12.0], &[1.0, 1.0], 100.0, PoolingMode::Rubin).unwrap();
    assert_eq!(p.qbar, 11.0);
    assert_eq!(p.b, 2.0);
    assert_eq!(p.t_var, 4.0);
    let f = pool_scalar(
        &[10.0, 12.0],
        &[1.0, 1.0],
        100.0,
        PoolingMode::FinitePopulation,
    )
    .unwrap();
    assert_eq!(f.t_var, 3.0);
    // t quantile on 1 df is 12.7062
    assert!((f.ci_upper - (11.0 + 12.706_204_736_174_7 * 3.0f64.sqrt())).abs() < 1e-6);
}
