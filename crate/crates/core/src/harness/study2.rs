//! Study II: a single masked case per replicate, imputed `m` times by PMM
//! and by the ranked blend at p = 1.0, 0.9, …, 0.0.

use rayon::prelude::*;

use crate::datagen::{gen_population, make_study2_case, GenConfig};
use crate::error::{Error, Result};
use crate::imputer::{multiple_impute, pool_single_value, ImputeOptions};
use crate::rng::{derive_seed, substream};

use super::{metric_coverage, metric_rmse, CellFailure, Method, DEFAULT_K};

const KEY_DATA: u64 = 11;
const KEY_CASE: u64 = 12;
const KEY_IMPUTE: u64 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Config {
    pub n: usize,
    pub nsim: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub skewed: bool,
    pub seed: u64,
    /// Draw one sample and vary only the masked case, instead of drawing a
    /// fresh sample per replicate.
    pub fixed_sample: bool,
    pub options: ImputeOptions,
}

impl Default for Study2Config {
    fn default() -> Self {
        Study2Config {
            n: 500,
            nsim: 10_000,
            m: 50,
            k: DEFAULT_K,
            rho: 0.7,
            skewed: true,
            seed: 20220402,
            fixed_sample: false,
            options: ImputeOptions::default(),
        }
    }
}

/// PMM followed by the ranked blend at p = 1.0 down to 0.0 in steps of 0.1.
pub fn study2_methods(k: usize) -> Result<Vec<Method>> {
    let mut methods = vec![Method::pmm(k)?];
    for step in (0..=10).rev() {
        methods.push(Method::ranked(step as f64 / 10.0, k)?);
    }
    Ok(methods)
}

/// Result of one method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Study2Record {
    pub replicate: usize,
    pub method: Method,
    pub estimate: f64,
    pub truth: f64,
    pub bias: f64,
    pub absbias: f64,
    pub ssd: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub covered: bool,
    /// Mean squared error of the `m` imputed values around the truth.
    pub rmse_contrib: f64,
}

impl Study2Record {
    pub fn rmse(&self) -> f64 {
        self.rmse_contrib.sqrt()
    }
}

/// Column averages of a method's records. `rmse` is the mean of the
/// per-replicate RMSEs over the imputed values; `rmse_estimate` is the RMSE
/// of the per-replicate estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Study2Row {
    pub method: Method,
    pub estimate: f64,
    pub truth: f64,
    pub bias: f64,
    pub absbias: f64,
    pub ssd: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub cov: f64,
    pub rmse: f64,
    pub rmse_estimate: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study2Output {
    pub rows: Vec<Study2Row>,
    pub records: Vec<Study2Record>,
    pub failures: Vec<CellFailure>,
}

fn run_replicate(
    methods: &[Method],
    config: &Study2Config,
    rep: usize,
) -> Vec<std::result::Result<Study2Record, String>> {
    let setup = (|| {
        let gen = GenConfig::new(config.n, config.rho, config.skewed, config.seed);
        let data_key = if config.fixed_sample {
            u64::MAX
        } else {
            rep as u64
        };
        let population = gen_population(&gen, &mut substream(config.seed, &[KEY_DATA, data_key]))?;
        make_study2_case(
            &population,
            &mut substream(config.seed, &[KEY_CASE, rep as u64]),
        )
    })();
    let case = match setup {
        Ok(c) => c,
        Err(e) => return vec![Err(e.to_string()); methods.len()],
    };
    methods
        .iter()
        .map(|method| {
            let seed = derive_seed(
                config.seed,
                &[
                    KEY_IMPUTE,
                    rep as u64,
                    method.spec.family() as u64,
                    method.spec.p().to_bits(),
                ],
            );
            let result = multiple_impute(&case.data, method.spec, config.options, config.m, seed)
                .and_then(|r| {
                    let values = r.values_at(case.row);
                    let truths = vec![case.truth; values.len()];
                    let rmse = metric_rmse(&values, &truths)?;
                    Ok((pool_single_value(&r, case.row)?, rmse))
                });
            result
                .map(|(sv, rmse)| {
                    let bias = sv.estimate - case.truth;
                    Study2Record {
                        replicate: rep,
                        method: *method,
                        estimate: sv.estimate,
                        truth: case.truth,
                        bias,
                        absbias: bias.abs(),
                        ssd: sv.ssd,
                        se: sv.se,
                        ci_lower: sv.ci_lower,
                        ci_upper: sv.ci_upper,
                        covered: sv.covers(case.truth),
                        rmse_contrib: rmse * rmse,
                    }
                })
                .map_err(|e| e.to_string())
        })
        .collect()
}

pub fn aggregate_records(method: Method, records: &[&Study2Record]) -> Result<Study2Row> {
    if records.is_empty() {
        return Err(Error::Empty("no successful replicates to aggregate"));
    }
    let n = records.len() as f64;
    let avg = |f: fn(&Study2Record) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
    let flags: Vec<bool> = records.iter().map(|r| r.covered).collect();
    let estimates: Vec<f64> = records.iter().map(|r| r.estimate).collect();
    let truths: Vec<f64> = records.iter().map(|r| r.truth).collect();
    Ok(Study2Row {
        method,
        estimate: avg(|r| r.estimate),
        truth: avg(|r| r.truth),
        bias: avg(|r| r.bias),
        absbias: avg(|r| r.absbias),
        ssd: avg(|r| r.ssd),
        se: avg(|r| r.se),
        ci_lower: avg(|r| r.ci_lower),
        ci_upper: avg(|r| r.ci_upper),
        cov: metric_coverage(&flags)?,
        rmse: avg(|r| r.rmse()),
        rmse_estimate: metric_rmse(&estimates, &truths)?,
        n_ok: records.len(),
    })
}

pub fn run_study2(config: &Study2Config) -> Result<Study2Output> {
    if config.nsim == 0 {
        return Err(Error::arg("study II needs at least 1 replicate"));
    }
    if config.m < 2 {
        return Err(Error::arg("study II needs at least 2 imputations"));
    }
    let methods = study2_methods(config.k)?;
    let outcomes: Vec<_> = (0..config.nsim)
        .into_par_iter()
        .map(|rep| run_replicate(&methods, config, rep))
        .collect();

    let mut records = Vec::with_capacity(config.nsim * methods.len());
    let mut failures = Vec::new();
    for (rep, per_method) in outcomes.into_iter().enumerate() {
        for (method, outcome) in methods.iter().zip(per_method) {
            match outcome {
                Ok(r) => records.push(r),
                Err(message) => failures.push(CellFailure {
                    condition: format!("replicate {rep}"),
                    method: method.label(),
                    replicate: rep,
                    message,
                }),
            }
        }
    }
    if !failures.is_empty() {
        log::warn!("study II: {} method-replicates failed", failures.len());
    }

    let rows = methods
        .iter()
        .map(|method| {
            let mine: Vec<&Study2Record> = records.iter().filter(|r| r.method == *method).collect();
            aggregate_records(*method, &mine)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Study2Output {
        rows,
        records,
        failures,
    })
}
