//! Linear prediction model for predictive mean matching.
//!
//! The fit always includes an intercept (coefficient 0). `xtx_inv` is the
//! inverse of the ridge-stabilized cross-product `[1 X]ᵀ[1 X]` and is only
//! used to scale the Bayesian coefficient draw.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Default ridge, relative to each diagonal entry of the cross-product.
pub const DEFAULT_RIDGE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    beta_hat: Vec<f64>,
    xtx_inv: DMatrix<f64>,
    draw_factor: DMatrix<f64>,
    sse: f64,
    n_obs: usize,
}

impl OlsFit {
    /// Least-squares coefficients, intercept first.
    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn xtx_inv(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }

    pub fn sse(&self) -> f64 {
        self.sse
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Number of coefficients, predictors plus intercept.
    pub fn q(&self) -> usize {
        self.beta_hat.len()
    }
}

/// Coefficients drawn from their posterior under a flat prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnModel {
    pub beta_dot: Vec<f64>,
    pub sigma_dot: f64,
    pub parent: OlsFit,
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::arg(format!(
            "{what} contains missing or non-finite values"
        )));
    }
    Ok(())
}

/// Fits `y ~ 1 + X` by least squares.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], ridge: f64) -> Result<OlsFit> {
    let (n, p) = x.shape();
    let q = p + 1;
    if y.len() != n {
        return Err(Error::dim(format!("X has {n} rows but y has {}", y.len())));
    }
    if n <= q {
        return Err(Error::arg(format!(
            "need more than {q} complete cases to fit {q} coefficients, got {n}"
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::arg(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    check_finite(x.iter().copied(), "X")?;
    check_finite(y.iter().copied(), "y")?;

    let design = DMatrix::from_fn(n, q, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let yv = DVector::from_column_slice(y);
    let xtx = design.tr_mul(&design);
    let xty = design.tr_mul(&yv);

    let mut stabilized = xtx.clone();
    for j in 0..q {
        stabilized[(j, j)] += ridge * xtx[(j, j)];
    }
    let chol = stabilized.cholesky().ok_or_else(|| {
        Error::Singular("predictor cross-product is not positive definite".into())
    })?;
    let xtx_inv = chol.inverse();
    let xtx_inv = (&xtx_inv + xtx_inv.transpose()) * 0.5;
    let draw_factor = xtx_inv
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("inverse cross-product lost definiteness".into()))?
        .l();

    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    let full_rank = r.diagonal().iter().all(|d| d.abs() > 1e-10 * rmax);
    let beta = if full_rank {
        let qty = qr.q().tr_mul(&yv);
        r.solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?
    } else {
        log::warn!("design matrix is rank deficient; using ridge-stabilized coefficients");
        &xtx_inv * &xty
    };

    let fitted = &design * &beta;
    let sse = (yv - fitted).norm_squared();

    Ok(OlsFit {
        beta_hat: beta.iter().copied().collect(),
        xtx_inv,
        draw_factor,
        sse,
        n_obs: n,
    })
}

/// `(beta_dot, sigma_dot)` without cloning the parent fit.
pub(crate) fn draw_coefficients<R: Rng + ?Sized>(fit: &OlsFit, rng: &mut R) -> (Vec<f64>, f64) {
    let q = fit.q();
    let df = (fit.n_obs - q) as f64;
    let g: f64 = ChiSquared::new(df)
        .expect("degrees of freedom are positive by construction")
        .sample(rng);
    let sigma_dot = (fit.sse / g).sqrt();
    let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
    let beta_dot = (0..q)
        .map(|i| {
            let lz: f64 = (0..=i).map(|j| fit.draw_factor[(i, j)] * z[j]).sum();
            fit.beta_hat[i] + sigma_dot * lz
        })
        .collect();
    (beta_dot, sigma_dot)
}

/// One draw of `(sigma, beta)`: `sigma² = sse / χ²(n - q)` and
/// `beta = beta_hat + sigma · L z` with `L Lᵀ = xtx_inv`.
pub fn bayes_draw<R: Rng + ?Sized>(fit: &OlsFit, rng: &mut R) -> DrawnModel {
    let (beta_dot, sigma_dot) = draw_coefficients(fit, rng);
    DrawnModel {
        beta_dot,
        sigma_dot,
        parent: fit.clone(),
    }
}

/// Linear predictor for a single row.
pub fn predict_row(beta: &[f64], row: &[f64]) -> f64 {
    debug_assert_eq!(beta.len(), row.len() + 1);
    beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}

/// `[1 X] · beta`.
pub fn predict(beta: &[f64], x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if beta.len() != x.ncols() + 1 {
        return Err(Error::dim(format!(
            "{} coefficients for {} predictors",
            beta.len(),
            x.ncols()
        )));
    }
    Ok((0..x.nrows())
        .map(|i| {
            beta[0]
                + beta[1..]
                    .iter()
                    .enumerate()
                    .map(|(j, b)| b * x[(i, j)])
                    .sum::<f64>()
        })
        .collect())
}

/// Ordinary R² of `y ~ 1 + X`; zero when `y` has no variance.
pub fn r_squared(x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(sst > 0.0) {
        log::warn!("outcome has zero variance; reporting R² = 0");
        return Ok(0.0);
    }
    let fit = ols_fit(x, y, 0.0).or_else(|_| ols_fit(x, y, DEFAULT_RIDGE))?;
    Ok((1.0 - fit.sse / sst).clamp(0.0, 1.0))
}
