//! Study I: repeated amputation and multiple imputation of one fixed
//! complete sample per condition, for every method in the grid.
//!
//! Each replicate is imputed `m_per_sim` times and pooled into one
//! interval for the mean of the outcome. A cell's row averages the
//! replicate-level pooled quantities; `cov` is the fraction of replicate
//! intervals containing the complete-sample mean.

use rayon::prelude::*;

use crate::datagen::{ampute, gen_population, GenConfig, Mechanism, MissingnessConfig};
use crate::distance::BlendFamily;
use crate::error::{Error, Result};
use crate::imputer::{
    multiple_impute_prepared, pool_mean, pool_scalar, Dataset, ImputeOptions, PoolingMode,
    PreparedImputation,
};
use crate::linear_model::r_squared;
use crate::rng::{derive_seed, substream};

use super::{metric_bias, metric_coverage, Condition, ConditionGrid, Method};

const KEY_POPULATION: u64 = 1;
const KEY_AMPUTE: u64 = 2;
const KEY_IMPUTE: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Study1Config {
    pub n: usize,
    pub nsim: usize,
    pub m_per_sim: usize,
    pub seed: u64,
    /// Pooling rule for the per-replicate intervals.
    pub pooling: PoolingMode,
    pub options: ImputeOptions,
}

impl Default for Study1Config {
    fn default() -> Self {
        Study1Config {
            n: 500,
            nsim: 1000,
            m_per_sim: 5,
            seed: 20220401,
            pooling: PoolingMode::FinitePopulation,
            options: ImputeOptions::default(),
        }
    }
}

/// One cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Study1Row {
    pub condition: Condition,
    pub method: Method,
    /// Mean over replicates of the pooled estimate.
    pub qbar: f64,
    /// Mean replicate standard error.
    pub se: f64,
    /// Mean replicate total variance.
    pub t: f64,
    pub df: f64,
    /// Mean replicate between-imputation variance.
    pub b: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub truth: f64,
    pub cov: f64,
    pub bias: f64,
    pub r2: f64,
    /// Coverage of the same intervals pooled with the other rule.
    pub cov_alt: f64,
    /// Variance of the replicate estimates around `qbar`.
    pub replicate_var: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub condition: String,
    pub method: String,
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study1Output {
    pub rows: Vec<Study1Row>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Copy)]
struct ReplicateRecord {
    qbar: f64,
    se: f64,
    t: f64,
    df: f64,
    b: f64,
    ci_lower: f64,
    ci_upper: f64,
    covered: bool,
    covered_alt: bool,
    r2: f64,
}

fn mechanism_key(m: Mechanism) -> u64 {
    match m {
        Mechanism::Mcar => 0,
        Mechanism::MarRight => 1,
    }
}

fn family_key(f: BlendFamily) -> u64 {
    match f {
        BlendFamily::Pmm => 0,
        BlendFamily::Ranked => 1,
        BlendFamily::Scaled => 2,
    }
}

/// Keys depend on the condition's values, not its grid position, so a
/// reduced grid reproduces the matching cells of the full one.
fn condition_keys(c: &Condition) -> [u64; 4] {
    [
        mechanism_key(c.mechanism),
        c.proportion.to_bits(),
        c.skewed as u64,
        c.rho.to_bits(),
    ]
}

fn method_keys(m: &Method) -> [u64; 3] {
    [
        family_key(m.spec.family()),
        m.spec.p().to_bits(),
        m.spec.k() as u64,
    ]
}

/// Complete sample shared by all missingness conditions with the same
/// distribution and correlation.
pub fn study1_population(config: &Study1Config, skewed: bool, rho: f64) -> Result<Dataset> {
    let gen = GenConfig::new(config.n, rho, skewed, config.seed);
    let mut rng = substream(config.seed, &[KEY_POPULATION, skewed as u64, rho.to_bits()]);
    gen_population(&gen, &mut rng)
}

fn run_replicate(
    population: &Dataset,
    truth: f64,
    condition: &Condition,
    methods: &[Method],
    config: &Study1Config,
    rep: usize,
) -> Vec<std::result::Result<ReplicateRecord, String>> {
    let ck = condition_keys(condition);
    let miss = match MissingnessConfig::new(condition.mechanism, condition.proportion, config.seed)
    {
        Ok(m) => m,
        Err(e) => return vec![Err(e.to_string()); methods.len()],
    };
    let mut amp_rng = substream(
        config.seed,
        &[KEY_AMPUTE, ck[0], ck[1], ck[2], ck[3], rep as u64],
    );
    let data = ampute(population.y(), population.x(), &miss, &mut amp_rng)
        .and_then(|mask| population.remask(mask));
    let data = match data {
        Ok(d) => d,
        Err(e) => return vec![Err(e.to_string()); methods.len()],
    };
    let alt_mode = match config.pooling {
        PoolingMode::Rubin => PoolingMode::FinitePopulation,
        PoolingMode::FinitePopulation => PoolingMode::Rubin,
    };

    methods
        .iter()
        .map(|method| {
            let mk = method_keys(method);
            let seed = derive_seed(
                config.seed,
                &[
                    KEY_IMPUTE, ck[0], ck[1], ck[2], ck[3], mk[0], mk[1], mk[2], rep as u64,
                ],
            );
            let record = (|| -> Result<ReplicateRecord> {
                let prepared = PreparedImputation::new(&data, method.spec, config.options)?;
                let result = multiple_impute_prepared(&prepared, config.m_per_sim, seed)?;
                let pooled = pool_mean(&result, config.pooling)?;
                let alt = pool_mean(&result, alt_mode)?;
                let mut r2 = 0.0;
                for completed in &result.completed {
                    r2 += r_squared(data.x(), completed)?;
                }
                Ok(ReplicateRecord {
                    qbar: pooled.qbar,
                    se: pooled.se(),
                    t: pooled.t_var,
                    df: pooled.df,
                    b: pooled.b,
                    ci_lower: pooled.ci_lower,
                    ci_upper: pooled.ci_upper,
                    covered: pooled.covers(truth),
                    covered_alt: alt.covers(truth),
                    r2: r2 / result.m() as f64,
                })
            })();
            record.map_err(|e| e.to_string())
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn aggregate(
    condition: Condition,
    method: Method,
    truth: f64,
    records: &[ReplicateRecord],
    n_failed: usize,
) -> Study1Row {
    let qbar = mean(records.iter().map(|r| r.qbar));
    let covered: Vec<bool> = records.iter().map(|r| r.covered).collect();
    let covered_alt: Vec<bool> = records.iter().map(|r| r.covered_alt).collect();
    let estimates: Vec<f64> = records.iter().map(|r| r.qbar).collect();
    let replicate_var = if estimates.len() >= 2 {
        pool_scalar(
            &estimates,
            &vec![0.0; estimates.len()],
            1.0,
            PoolingMode::FinitePopulation,
        )
        .map(|p| p.b)
        .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Study1Row {
        condition,
        method,
        qbar,
        se: mean(records.iter().map(|r| r.se)),
        t: mean(records.iter().map(|r| r.t)),
        df: mean(records.iter().map(|r| r.df)),
        b: mean(records.iter().map(|r| r.b)),
        ci_lower: mean(records.iter().map(|r| r.ci_lower)),
        ci_upper: mean(records.iter().map(|r| r.ci_upper)),
        truth,
        cov: metric_coverage(&covered).unwrap_or(f64::NAN),
        bias: metric_bias(qbar, truth),
        r2: mean(records.iter().map(|r| r.r2)),
        cov_alt: metric_coverage(&covered_alt).unwrap_or(f64::NAN),
        replicate_var,
        n_ok: records.len(),
        n_failed,
    }
}

/// Runs every condition × method cell. Failed replicates are reported in
/// `failures` and excluded from their cell's averages.
pub fn run_study1(grid: &ConditionGrid, config: &Study1Config) -> Result<Study1Output> {
    if config.nsim < 2 {
        return Err(Error::arg("study I needs at least 2 replicates"));
    }
    if config.m_per_sim < 2 {
        return Err(Error::arg(
            "study I needs at least 2 imputations per replicate",
        ));
    }
    if grid.methods.is_empty() {
        return Err(Error::arg("method list is empty"));
    }
    let conditions = grid.conditions();
    if conditions.is_empty() {
        return Err(Error::arg("condition grid is empty"));
    }

    let mut populations: Vec<((bool, u64), Dataset)> = Vec::new();
    for c in &conditions {
        let key = (c.skewed, c.rho.to_bits());
        if !populations.iter().any(|(k, _)| *k == key) {
            populations.push((key, study1_population(config, c.skewed, c.rho)?));
        }
    }
    let population_of = |c: &Condition| {
        let key = (c.skewed, c.rho.to_bits());
        &populations
            .iter()
            .find(|(k, _)| *k == key)
            .expect("population exists")
            .1
    };

    let units: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|ci| (0..config.nsim).map(move |rep| (ci, rep)))
        .collect();
    let outcomes: Vec<_> = units
        .par_iter()
        .map(|&(ci, rep)| {
            let c = &conditions[ci];
            let population = population_of(c);
            let truth = mean(population.y().iter().copied());
            run_replicate(population, truth, c, &grid.methods, config, rep)
        })
        .collect();

    let mut rows = Vec::with_capacity(conditions.len() * grid.methods.len());
    let mut failures = Vec::new();
    for (ci, condition) in conditions.iter().enumerate() {
        let truth = mean(population_of(condition).y().iter().copied());
        let block = &outcomes[ci * config.nsim..(ci + 1) * config.nsim];
        for (mi, method) in grid.methods.iter().enumerate() {
            let mut records = Vec::with_capacity(config.nsim);
            let mut n_failed = 0;
            for (rep, per_method) in block.iter().enumerate() {
                match &per_method[mi] {
                    Ok(r) => records.push(*r),
                    Err(message) => {
                        n_failed += 1;
                        failures.push(CellFailure {
                            condition: condition.label(),
                            method: method.label(),
                            replicate: rep,
                            message: message.clone(),
                        });
                    }
                }
            }
            if n_failed > 0 {
                log::warn!(
                    "{} / {}: {n_failed} of {} replicates failed",
                    condition.label(),
                    method.label(),
                    config.nsim
                );
            }
            rows.push(aggregate(*condition, *method, truth, &records, n_failed));
        }
    }
    Ok(Study1Output { rows, failures })
}
