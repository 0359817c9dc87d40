//! Predictive mean matching with predictive, ranked-blend or scaled-blend
//! donor distances, plus pooling of the completed datasets.
//!
//! One imputation pass draws a single parameter vector, predicts donors
//! with the least-squares coefficients and targets with the drawn ones
//! (type-1 matching), selects the `k` closest donors per missing row under
//! the requested distance, and copies the outcome of one of them chosen
//! uniformly at random.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distance::{
    blend_ranked, blend_scaled, select_donors, BlendFamily, BlendSpec, CovarianceEstimate,
    DistanceVector,
};
use crate::error::{Error, Result};
use crate::linear_model::{draw_coefficients, ols_fit, predict_row, OlsFit, DEFAULT_RIDGE};
use crate::rng::substream;

/// Predictors, outcome and observation mask. Missing outcomes are stored as
/// NaN and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    observed: Vec<bool>,
}

impl Dataset {
    /// `y` values at rows where `observed` is false are discarded.
    pub fn new(x: DMatrix<f64>, mut y: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || observed.len() != n {
            return Err(Error::dim(format!(
                "X has {n} rows, y has {}, mask has {}",
                y.len(),
                observed.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset(
                "predictors must be fully observed and finite".into(),
            ));
        }
        for (v, &obs) in y.iter_mut().zip(&observed) {
            if !obs {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::Dataset("observed outcomes must be finite".into()));
            }
        }
        Ok(Dataset { x, y, observed })
    }

    pub fn complete(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(x, y, vec![true; n])
    }

    /// `None` marks a missing outcome.
    pub fn from_options(x: DMatrix<f64>, y: &[Option<f64>]) -> Result<Self> {
        let observed = y.iter().map(Option::is_some).collect();
        let values = y.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Self::new(x, values, observed)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.observed[i]).collect()
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.observed[i]).collect()
    }

    /// Same predictors and outcomes under a new mask. Only rows observed in
    /// `self` can be observed in the result.
    pub fn remask(&self, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != self.n() {
            return Err(Error::dim("mask length differs from dataset"));
        }
        if observed
            .iter()
            .zip(&self.observed)
            .any(|(&new, &old)| new && !old)
        {
            return Err(Error::Dataset("cannot unmask a missing outcome".into()));
        }
        Self::new(self.x.clone(), self.y.clone(), observed)
    }

    fn check_imputable(&self, k: usize) -> Result<()> {
        let n_obs = self.observed.iter().filter(|&&o| o).count();
        let q = self.n_predictors() + 1;
        if n_obs < q + 1 {
            return Err(Error::Dataset(format!(
                "{n_obs} observed outcomes; at least {} are needed",
                q + 1
            )));
        }
        if n_obs == self.n() {
            return Err(Error::Dataset("no missing outcomes to impute".into()));
        }
        if k > n_obs {
            return Err(Error::Dataset(format!(
                "{k} donors requested but only {n_obs} observed rows"
            )));
        }
        Ok(())
    }
}

/// Which coefficients predict the donors and the targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchType {
    /// Least-squares coefficients for both donors and targets.
    Type0,
    /// Least-squares for donors, drawn coefficients for targets.
    #[default]
    Type1,
}

impl FromStr for MatchType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" | "type0" => Ok(MatchType::Type0),
            "1" | "type1" => Ok(MatchType::Type1),
            other => Err(Error::Parse(format!("unknown match type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputeOptions {
    pub match_type: MatchType,
    /// Ridge for the coefficient draw, relative to the cross-product diagonal.
    pub ridge: f64,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions {
            match_type: MatchType::Type1,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// A candidate donor for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DonorMatch {
    /// Row of the donor in the dataset.
    pub row: usize,
    pub pd: f64,
    /// Only computed when the distance family uses it.
    pub md: Option<f64>,
    /// Value the selection ranked on.
    pub score: f64,
}

/// State shared by all imputation passes over one dataset: the model fit,
/// donor predictions and whitened predictor coordinates.
#[derive(Debug, Clone)]
pub struct PreparedImputation<'a> {
    data: &'a Dataset,
    spec: BlendSpec,
    options: ImputeOptions,
    fit: OlsFit,
    donors: Vec<usize>,
    targets: Vec<usize>,
    donor_pred: Vec<f64>,
    /// Row-major whitened predictors of every row, when needed.
    whitened: Option<Vec<f64>>,
}

impl<'a> PreparedImputation<'a> {
    pub fn new(data: &'a Dataset, spec: BlendSpec, options: ImputeOptions) -> Result<Self> {
        data.check_imputable(spec.k())?;
        let donors = data.observed_rows();
        let targets = data.missing_rows();
        let x_obs = DMatrix::from_fn(donors.len(), data.n_predictors(), |i, j| {
            data.x[(donors[i], j)]
        });
        let y_obs: Vec<f64> = donors.iter().map(|&i| data.y[i]).collect();
        let fit = ols_fit(&x_obs, &y_obs, options.ridge)?;
        let donor_pred = donors
            .iter()
            .map(|&i| predict_row(fit.beta_hat(), &data.row(i)))
            .collect();

        let whitened = if spec.needs_mahalanobis() {
            // covariance over all rows: predictors are fully observed
            let cov = CovarianceEstimate::estimate(&data.x)?;
            let mut flat = Vec::with_capacity(data.n() * data.n_predictors());
            for i in 0..data.n() {
                flat.extend(cov.whiten(&data.row(i))?);
            }
            Some(flat)
        } else {
            None
        };

        Ok(PreparedImputation {
            data,
            spec,
            options,
            fit,
            donors,
            targets,
            donor_pred,
            whitened,
        })
    }

    pub fn fit(&self) -> &OlsFit {
        &self.fit
    }

    pub fn spec(&self) -> BlendSpec {
        self.spec
    }

    /// Rows with a missing outcome, in dataset order.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Observed rows forming the donor pool, in dataset order.
    pub fn donors(&self) -> &[usize] {
        &self.donors
    }

    /// Coefficients used to predict targets in one pass.
    pub fn draw_target_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.options.match_type {
            MatchType::Type1 => draw_coefficients(&self.fit, rng).0,
            MatchType::Type0 => self.fit.beta_hat().to_vec(),
        }
    }

    fn mahalanobis_to(&self, target: usize) -> Option<Vec<f64>> {
        let w = self.whitened.as_ref()?;
        let p = self.data.n_predictors();
        let t = &w[target * p..(target + 1) * p];
        Some(
            self.donors
                .iter()
                .map(|&d| {
                    let row = &w[d * p..(d + 1) * p];
                    row.iter()
                        .zip(t)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
        )
    }

    /// The `k` best donors for dataset row `target`, best first.
    pub fn match_target<R: Rng + ?Sized>(
        &self,
        target: usize,
        target_beta: &[f64],
        rng: &mut R,
    ) -> Result<Vec<DonorMatch>> {
        if target >= self.data.n() {
            return Err(Error::arg(format!("target row {target} out of range")));
        }
        let target_pred = predict_row(target_beta, &self.data.row(target));
        let pd: Vec<f64> = self
            .donor_pred
            .iter()
            .map(|v| (v - target_pred).abs())
            .collect();
        let md = self.mahalanobis_to(target);

        let scores = match self.spec.family() {
            BlendFamily::Pmm => pd.clone(),
            family => {
                let pd_vec = DistanceVector::predictive(pd.clone())?;
                let md_vec = DistanceVector::mahalanobis(
                    md.clone().expect("whitened coordinates exist for blends"),
                )?;
                match family {
                    BlendFamily::Ranked => blend_ranked(&pd_vec, &md_vec, self.spec.p(), rng)?,
                    _ => blend_scaled(&pd_vec, &md_vec, self.spec.p())?,
                }
                .into_values()
            }
        };

        let chosen = select_donors(&scores, self.spec.k(), rng)?;
        Ok(chosen
            .into_iter()
            .map(|i| DonorMatch {
                row: self.donors[i],
                pd: pd[i],
                md: md.as_ref().map(|m| m[i]),
                score: scores[i],
            })
            .collect())
    }

    /// One completed outcome vector.
    pub fn impute_pass<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.impute_pass_traced(rng)?.0)
    }

    /// Like [`impute_pass`](Self::impute_pass), also returning each target's
    /// candidate donor rows.
    pub fn impute_pass_traced<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
        let beta = self.draw_target_coefficients(rng);
        let mut completed = self.data.y.clone();
        let mut candidates = Vec::with_capacity(self.targets.len());
        for &t in &self.targets {
            let matches = self.match_target(t, &beta, rng)?;
            let pick = matches[rng.gen_range(0..matches.len())];
            completed[t] = self.data.y[pick.row];
            candidates.push(matches.iter().map(|m| m.row).collect());
        }
        Ok((completed, candidates))
    }
}

/// Fits the model and fills every missing outcome once.
pub fn impute_once<R: Rng + ?Sized>(
    data: &Dataset,
    spec: BlendSpec,
    options: ImputeOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    PreparedImputation::new(data, spec, options)?.impute_pass(rng)
}

/// `m` completed outcome vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    pub completed: Vec<Vec<f64>>,
    pub observed: Vec<bool>,
    pub spec: BlendSpec,
    pub seed: u64,
}

impl ImputationResult {
    pub fn m(&self) -> usize {
        self.completed.len()
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    /// The `m` imputed values of one row.
    pub fn values_at(&self, row: usize) -> Vec<f64> {
        self.completed.iter().map(|c| c[row]).collect()
    }
}

/// Imputation `j` uses the stream keyed by `(seed, j)`, so the result does
/// not depend on scheduling.
pub fn multiple_impute(
    data: &Dataset,
    spec: BlendSpec,
    options: ImputeOptions,
    m: usize,
    seed: u64,
) -> Result<ImputationResult> {
    if m == 0 {
        return Err(Error::arg("number of imputations must be at least 1"));
    }
    let prepared = PreparedImputation::new(data, spec, options)?;
    multiple_impute_prepared(&prepared, m, seed)
}

pub fn multiple_impute_prepared(
    prepared: &PreparedImputation<'_>,
    m: usize,
    seed: u64,
) -> Result<ImputationResult> {
    if m == 0 {
        return Err(Error::arg("number of imputations must be at least 1"));
    }
    let completed = (0..m as u64)
        .into_par_iter()
        .map(|j| prepared.impute_pass(&mut substream(seed, &[j])))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImputationResult {
        completed,
        observed: prepared.data.observed.clone(),
        spec: prepared.spec,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolingMode {
    /// Within plus inflated between-imputation variance.
    #[default]
    Rubin,
    /// The complete sample is the population: no within variance.
    FinitePopulation,
}

impl PoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::Rubin => "rubin",
            PoolingMode::FinitePopulation => "finite",
        }
    }
}

impl FromStr for PoolingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rubin" => Ok(PoolingMode::Rubin),
            "finite" | "finite-population" | "finite_population" => {
                Ok(PoolingMode::FinitePopulation)
            }
            other => Err(Error::Parse(format!("unknown pooling mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub qbar: f64,
    /// Between-imputation variance.
    pub b: f64,
    /// Mean within-imputation variance.
    pub ubar: f64,
    /// Total variance.
    pub t_var: f64,
    pub df: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub m: usize,
}

impl PooledEstimate {
    pub fn se(&self) -> f64 {
        self.t_var.sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Two-sided 95% Student t quantile.
pub fn t_quantile_975(df: f64) -> f64 {
    const Z975: f64 = 1.959_963_984_540_054;
    if !df.is_finite() || df > 1e7 {
        return Z975;
    }
    StudentsT::new(0.0, 1.0, df.max(1e-3))
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(Z975)
}

/// Pools `m` scalar estimates with their within-imputation variances.
/// `dfcom` is the complete-data degrees of freedom used by the
/// Barnard–Rubin adjustment.
pub fn pool_scalar(
    estimates: &[f64],
    variances: &[f64],
    dfcom: f64,
    mode: PoolingMode,
) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::arg(format!(
            "pooling needs at least 2 imputations, got {m}"
        )));
    }
    if variances.len() != m {
        return Err(Error::dim("one variance per estimate is required"));
    }
    let mf = m as f64;
    let (qbar, b) = if estimates.iter().all(|q| *q == estimates[0]) {
        // summing identical values can still round away from them
        (estimates[0], 0.0)
    } else {
        let qbar = estimates.iter().sum::<f64>() / mf;
        let b = estimates.iter().map(|q| (q - qbar).powi(2)).sum::<f64>() / (mf - 1.0);
        (qbar, b)
    };
    let inflated = (1.0 + 1.0 / mf) * b;

    let (ubar, t_var, df) = match mode {
        PoolingMode::FinitePopulation => (0.0, inflated, mf - 1.0),
        PoolingMode::Rubin => {
            let ubar = variances.iter().sum::<f64>() / mf;
            let t_var = ubar + inflated;
            let lambda = if t_var > 0.0 { inflated / t_var } else { 0.0 };
            let df_obs = (dfcom + 1.0) / (dfcom + 3.0) * dfcom * (1.0 - lambda);
            let df = if lambda > 0.0 {
                let df_old = (mf - 1.0) / (lambda * lambda);
                df_old * df_obs / (df_old + df_obs)
            } else {
                df_obs
            };
            (ubar, t_var, df)
        }
    };

    let half = if t_var > 0.0 {
        t_quantile_975(df) * t_var.sqrt()
    } else {
        0.0
    };
    Ok(PooledEstimate {
        qbar,
        b,
        ubar,
        t_var,
        df,
        ci_lower: qbar - half,
        ci_upper: qbar + half,
        m,
    })
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Pools the completed-data mean of the outcome.
pub fn pool_mean(result: &ImputationResult, mode: PoolingMode) -> Result<PooledEstimate> {
    let n = result.n();
    if n < 2 {
        return Err(Error::arg("need at least 2 rows to pool a mean"));
    }
    let (estimates, variances): (Vec<f64>, Vec<f64>) = result
        .completed
        .iter()
        .map(|c| {
            let (mean, var) = mean_and_var(c);
            (mean, var / n as f64)
        })
        .unzip();
    pool_scalar(&estimates, &variances, (n - 1) as f64, mode)
}

/// Summary of the `m` imputations of one missing cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleValueEstimate {
    pub estimate: f64,
    /// Sum of squared deviations around `estimate`.
    pub ssd: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl SingleValueEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// `se = sqrt((1 + 1/m) · ssd / (m - 1))`, interval on `m - 1` degrees of
/// freedom.
pub fn pool_single_value(result: &ImputationResult, row: usize) -> Result<SingleValueEstimate> {
    if row >= result.n() {
        return Err(Error::arg(format!("row {row} out of range")));
    }
    if result.observed[row] {
        return Err(Error::arg(format!("row {row} is observed, not imputed")));
    }
    let m = result.m();
    if m < 2 {
        return Err(Error::arg(format!(
            "pooling needs at least 2 imputations, got {m}"
        )));
    }
    let values = result.values_at(row);
    Ok(single_value_from(&values))
}

pub(crate) fn single_value_from(values: &[f64]) -> SingleValueEstimate {
    let mf = values.len() as f64;
    let (estimate, ssd) = if values.iter().all(|v| *v == values[0]) {
        (values[0], 0.0)
    } else {
        let estimate = values.iter().sum::<f64>() / mf;
        (
            estimate,
            values.iter().map(|v| (v - estimate).powi(2)).sum(),
        )
    };
    let se = ((1.0 + 1.0 / mf) * ssd / (mf - 1.0)).sqrt();
    let half = t_quantile_975(mf - 1.0) * se;
    SingleValueEstimate {
        estimate,
        ssd,
        se,
        ci_lower: estimate - half,
        ci_upper: estimate + half,
    }
}
