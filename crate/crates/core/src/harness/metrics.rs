use crate::error::{Error, Result};
use crate::imputer::Dataset;
use crate::linear_model::r_squared;

pub fn metric_bias(qbar: f64, truth: f64) -> f64 {
    qbar - truth
}

/// `sqrt(mean((estimate - truth)²))`.
pub fn metric_rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("rmse needs at least one estimate"));
    }
    if estimates.len() != truths.len() {
        return Err(Error::dim("one truth per estimate is required"));
    }
    let mse = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).powi(2))
        .sum::<f64>()
        / estimates.len() as f64;
    Ok(mse.sqrt())
}

/// Fraction of intervals that covered the truth.
pub fn metric_coverage(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::Empty("coverage needs at least one interval"));
    }
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// R² of the outcome on the predictors in a completed dataset.
pub fn metric_r2(completed: &Dataset) -> Result<f64> {
    if completed.observed().iter().any(|&o| !o) {
        return Err(Error::Dataset(
            "R² needs a dataset without missing outcomes".into(),
        ));
    }
    r_squared(completed.x(), completed.y())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn simple_metrics() {
        assert_eq!(metric_rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(metric_bias(4.0, 4.0), 0.0);
        assert_eq!(metric_rmse(&[3.0, 5.0], &[4.0, 4.0]).unwrap(), 1.0);
        assert_eq!(metric_coverage(&[true, true, false, true]).unwrap(), 0.75);
        assert!(metric_rmse(&[], &[]).is_err());
        assert!(metric_coverage(&[]).is_err());
    }

    #[test]
    fn r2_of_row_sum_is_one() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 2.0, 0.5, 3.0, 1.0, 2.0, 0.0, 4.0, 1.0, 2.0, 2.0, 2.0, 5.0, 0.0, 1.5,
            ],
        );
        let y: Vec<f64> = x.row_iter().map(|r| r.sum()).collect();
        let d = Dataset::complete(x.clone(), y).unwrap();
        assert!((metric_r2(&d).unwrap() - 1.0).abs() < 1e-12);
        let incomplete = d.remask(vec![true, true, false, true, true]).unwrap();
        assert!(metric_r2(&incomplete).is_err());
    }
}
