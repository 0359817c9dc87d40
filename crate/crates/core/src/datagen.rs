//! Synthetic populations and missingness mechanisms.
//!
//! Predictors are trivariate normal with unit variances and a common
//! correlation, optionally pushed through the power transform
//! `x¹² / max(x¹¹)` column by column to make them strongly right-skewed.
//! The outcome is the predictor sum plus Gaussian noise. Only the outcome
//! is ever made missing.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::imputer::Dataset;

pub const N_PREDICTORS: usize = 3;
pub const DEFAULT_MU: [f64; N_PREDICTORS] = [10.0, 10.0, 10.0];
pub const DEFAULT_SIGMA_EPS: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub mu: [f64; N_PREDICTORS],
    /// Off-diagonal of the predictor covariance (unit diagonal).
    pub rho: f64,
    pub skewed: bool,
    pub sigma_eps: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(n: usize, rho: f64, skewed: bool, seed: u64) -> Self {
        GenConfig {
            n,
            mu: DEFAULT_MU,
            rho,
            skewed,
            sigma_eps: DEFAULT_SIGMA_EPS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::arg("sample size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::arg(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(Error::arg("sigma_eps must be a non-negative number"));
        }
        Ok(())
    }
}

/// Unit-diagonal covariance with every off-diagonal equal to `rho`.
pub fn predictor_covariance(rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(
        N_PREDICTORS,
        N_PREDICTORS,
        |i, j| if i == j { 1.0 } else { rho },
    )
}

/// `n × 3` predictor matrix.
pub fn gen_predictors<R: Rng + ?Sized>(config: &GenConfig, rng: &mut R) -> Result<DMatrix<f64>> {
    config.validate()?;
    let chol = predictor_covariance(config.rho).cholesky().ok_or_else(|| {
        Error::Singular(format!("Σ(rho = {}) is not positive definite", config.rho))
    })?;
    let l = chol.l();
    let mut x = DMatrix::<f64>::zeros(config.n, N_PREDICTORS);
    let mut z = [0.0; N_PREDICTORS];
    for i in 0..config.n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for a in 0..N_PREDICTORS {
            let lz: f64 = (0..=a).map(|b| l[(a, b)] * z[b]).sum();
            x[(i, a)] = config.mu[a] + lz;
        }
    }
    if config.skewed {
        skew_columns(&mut x);
    }
    Ok(x)
}

/// `x ← x¹² / max(x¹¹)` applied per column.
pub fn skew_columns(x: &mut DMatrix<f64>) {
    for mut col in x.column_iter_mut() {
        if col.iter().any(|&v| v < 0.0) {
            log::warn!(
                "skew transform applied to a column with negative values; x¹² discards their sign"
            );
        }
        let denom = col
            .iter()
            .map(|v| v.powi(11))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(denom > 0.0) {
            log::warn!("skew transform denominator max(x¹¹) = {denom} is not positive");
        }
        for v in col.iter_mut() {
            *v = v.powi(12) / denom;
        }
    }
}

/// `Y = X₁ + X₂ + X₃ + ε`, `ε ~ N(0, sigma_eps²)`.
pub fn gen_outcome<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    sigma_eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x.ncols() != N_PREDICTORS {
        return Err(Error::dim(format!(
            "outcome model needs {N_PREDICTORS} predictors, got {}",
            x.ncols()
        )));
    }
    let noise = Normal::new(0.0, sigma_eps)
        .map_err(|e| Error::arg(format!("invalid noise scale {sigma_eps}: {e}")))?;
    Ok(x.row_iter()
        .map(|row| row.sum() + noise.sample(rng))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Mcar,
    /// Missingness increases with the predictor sum score.
    MarRight,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::MarRight => "MAR",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" | "mar_right" | "marright" => Ok(Mechanism::MarRight),
            other => Err(Error::Parse(format!(
                "unknown mechanism `{other}` (expected mcar or mar_right)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessConfig {
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub seed: u64,
}

impl MissingnessConfig {
    pub fn new(mechanism: Mechanism, proportion: f64, seed: u64) -> Result<Self> {
        if !(proportion > 0.0 && proportion < 1.0) {
            return Err(Error::arg(format!(
                "missingness proportion must lie in (0, 1), got {proportion}"
            )));
        }
        Ok(MissingnessConfig {
            mechanism,
            proportion,
            seed,
        })
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Standardized predictor sum score (zeros when the sums are constant).
fn sum_scores(x: &DMatrix<f64>) -> Vec<f64> {
    let sums: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let sd = if sums.len() > 1 {
        (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    if sd > f64::EPSILON * mean.abs().max(1.0) {
        sums.iter().map(|s| (s - mean) / sd).collect()
    } else {
        vec![0.0; sums.len()]
    }
}

/// Per-row missingness probabilities. For MAR-right these are
/// `logistic(z - c)` with the shift `c` found by bisection so the mean
/// probability equals the target proportion.
pub fn missing_probabilities(x: &DMatrix<f64>, config: &MissingnessConfig) -> Vec<f64> {
    let n = x.nrows();
    match config.mechanism {
        Mechanism::Mcar => vec![config.proportion; n],
        Mechanism::MarRight => {
            let z = sum_scores(x);
            let mean_prob = |c: f64| z.iter().map(|&zi| logistic(zi - c)).sum::<f64>() / n as f64;
            let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // mean_prob decreases in c
            let (mut lo, mut hi) = (zmin - 40.0, zmax + 40.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mean_prob(mid) > config.proportion {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            let c = 0.5 * (lo + hi);
            z.iter().map(|&zi| logistic(zi - c)).collect()
        }
    }
}

/// Observation mask (`true` = observed) for the outcome.
pub fn ampute<R: Rng + ?Sized>(
    y: &[f64],
    x: &DMatrix<f64>,
    config: &MissingnessConfig,
    rng: &mut R,
) -> Result<Vec<bool>> {
    if y.len() != x.nrows() {
        return Err(Error::dim(format!(
            "y has {} rows, X has {}",
            y.len(),
            x.nrows()
        )));
    }
    Ok(missing_probabilities(x, config)
        .into_iter()
        .map(|prob| rng.gen::<f64>() >= prob)
        .collect())
}

/// A complete dataset with a single outcome masked.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCase {
    pub data: Dataset,
    pub row: usize,
    pub truth: f64,
}

/// Masks the outcome of one uniformly chosen row.
pub fn make_study2_case<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<SingleCase> {
    let n = data.n();
    if n == 0 {
        return Err(Error::Dataset(
            "cannot mask a case in an empty dataset".into(),
        ));
    }
    if data.observed().iter().any(|&o| !o) {
        return Err(Error::Dataset(
            "single-case masking needs a complete dataset".into(),
        ));
    }
    let row = rng.gen_range(0..n);
    let truth = data.y()[row];
    let mut mask = vec![true; n];
    mask[row] = false;
    Ok(SingleCase {
        data: data.remask(mask)?,
        row,
        truth,
    })
}

/// Predictors and outcome for one population draw.
pub fn gen_population<R: Rng + ?Sized>(config: &GenConfig, rng: &mut R) -> Result<Dataset> {
    let x = gen_predictors(config, rng)?;
    let y = gen_outcome(&x, config.sigma_eps, rng)?;
    Dataset::complete(x, y)
}
