//! Distances between a target and a pool of donors.
//!
//! Two base metrics are supported: the predictive distance (absolute
//! difference between predicted outcomes) and the Mahalanobis distance in
//! predictor space. They can be blended either through their ranks or
//! through standardized values, with weight `p` on the predictive part.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Ridge multiplier (relative to the mean variance) for near-singular
/// covariance matrices.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// Squared Cholesky pivots below this fraction of the largest variance are
/// treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Covariance matrix of the predictors together with its inverse and a
/// whitening transform `W = L⁻¹` where `matrix = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    whitener: DMatrix<f64>,
    regularized: bool,
}

impl CovarianceEstimate {
    /// Sample covariance (divisor `n - 1`) of the rows of `predictors`.
    pub fn estimate(predictors: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = predictors.shape();
        if n < 2 {
            return Err(Error::arg(format!(
                "covariance needs at least 2 rows, got {n}"
            )));
        }
        if p == 0 {
            return Err(Error::dim("covariance needs at least one column"));
        }
        if predictors.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(
                "predictors contain missing or non-finite values",
            ));
        }

        let means: Vec<f64> = (0..p).map(|j| predictors.column(j).mean()).collect();
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for row in 0..n {
            for a in 0..p {
                let da = predictors[(row, a)] - means[a];
                for b in a..p {
                    cov[(a, b)] += da * (predictors[(row, b)] - means[b]);
                }
            }
        }
        let denom = (n - 1) as f64;
        for a in 0..p {
            for b in a..p {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        Self::from_matrix(cov)
    }

    /// Wraps an explicit covariance matrix, regularizing it if needed.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || matrix.ncols() != p {
            return Err(Error::dim(format!(
                "covariance must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("covariance contains non-finite entries"));
        }
        let scale = matrix.diagonal().amax().max(f64::MIN_POSITIVE);
        for a in 0..p {
            for b in (a + 1)..p {
                if (matrix[(a, b)] - matrix[(b, a)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::arg("covariance matrix is not symmetric"));
                }
            }
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;

        if let Some(est) = Self::factor(&matrix, false) {
            return Ok(est);
        }

        let mean_diag = matrix.trace() / p as f64;
        let ridge = COVARIANCE_RIDGE * mean_diag;
        if ridge.is_nan() || ridge <= 0.0 {
            return Err(Error::Singular(
                "all predictors are constant; ridge cannot restore invertibility".into(),
            ));
        }
        log::debug!("covariance near-singular, adding ridge {ridge:e}");
        let regularized = &matrix + DMatrix::<f64>::identity(p, p) * ridge;
        Self::factor(&regularized, true).ok_or_else(|| {
            Error::Singular("covariance is not positive definite after ridge".into())
        })
    }

    fn factor(matrix: &DMatrix<f64>, regularized: bool) -> Option<Self> {
        let p = matrix.nrows();
        let max_diag = matrix.diagonal().max();
        if max_diag <= 0.0 || matrix.diagonal().iter().any(|&d| d <= 0.0) {
            return None;
        }
        let chol = matrix.clone().cholesky()?;
        let l = chol.l();
        if l.diagonal()
            .iter()
            .any(|&d| d * d <= PIVOT_TOLERANCE * max_diag)
        {
            return None;
        }
        let mut whitener = DMatrix::<f64>::identity(p, p);
        if !l.solve_lower_triangular_mut(&mut whitener) {
            return None;
        }
        let inverse = chol.inverse();
        Some(CovarianceEstimate {
            matrix: matrix.clone(),
            inverse,
            whitener,
            regularized,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Whether a ridge was added before inversion.
    pub fn is_regularized(&self) -> bool {
        self.regularized
    }

    /// Maps `x` into coordinates where the Mahalanobis distance is the
    /// Euclidean distance.
    pub fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.dimension();
        if x.len() != p {
            return Err(Error::dim(format!(
                "point has dimension {}, covariance has {p}",
                x.len()
            )));
        }
        Ok((0..p)
            .map(|i| (0..=i).map(|j| self.whitener[(i, j)] * x[j]).sum())
            .collect())
    }
}

/// `sqrt((x - y)ᵀ C⁻¹ (x - y))`.
pub fn mahalanobis_distance(x: &[f64], y: &[f64], cov: &CovarianceEstimate) -> Result<f64> {
    let p = cov.dimension();
    if x.len() != p || y.len() != p {
        return Err(Error::dim(format!(
            "points have dimensions {} and {}, covariance has {p}",
            x.len(),
            y.len()
        )));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let inv = cov.inverse();
    let mut q = 0.0;
    for a in 0..p {
        let mut row = 0.0;
        for b in 0..p {
            row += inv[(a, b)] * diff[b];
        }
        q += diff[a] * row;
    }
    Ok(q.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    Predictive,
    Mahalanobis,
    RankedBlend,
    ScaledBlend,
}

/// One distance per donor.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    values: Vec<f64>,
    kind: DistanceKind,
}

impl DistanceVector {
    pub fn new(values: Vec<f64>, kind: DistanceKind) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("{kind:?} distances must be finite")));
        }
        if matches!(kind, DistanceKind::Predictive | DistanceKind::Mahalanobis)
            && values.iter().any(|&v| v < 0.0)
        {
            return Err(Error::arg(format!(
                "{kind:?} distances must be non-negative"
            )));
        }
        Ok(DistanceVector { values, kind })
    }

    pub fn predictive(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DistanceKind::Predictive)
    }

    pub fn mahalanobis(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DistanceKind::Mahalanobis)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlendFamily {
    /// Predictive distance only.
    Pmm,
    /// Weighted sum of predictive and Mahalanobis ranks.
    Ranked,
    /// Weighted sum of standardized predictive and Mahalanobis distances.
    Scaled,
}

impl BlendFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            BlendFamily::Pmm => "pmm",
            BlendFamily::Ranked => "ranked",
            BlendFamily::Scaled => "scaled",
        }
    }
}

impl fmt::Display for BlendFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlendFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pmm" => Ok(BlendFamily::Pmm),
            "ranked" => Ok(BlendFamily::Ranked),
            "scaled" => Ok(BlendFamily::Scaled),
            other => Err(Error::Parse(format!(
                "unknown family `{other}` (expected pmm, ranked or scaled)"
            ))),
        }
    }
}

/// Distance family, blend factor `p` (weight on the predictive part) and
/// number of candidate donors `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendSpec {
    family: BlendFamily,
    p: f64,
    k: usize,
}

impl BlendSpec {
    pub fn new(family: BlendFamily, p: f64, k: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!(
                "blend factor must lie in [0, 1], got {p}"
            )));
        }
        if k == 0 {
            return Err(Error::arg("donor count k must be at least 1"));
        }
        let p = if family == BlendFamily::Pmm { 1.0 } else { p };
        Ok(BlendSpec { family, p, k })
    }

    pub fn pmm(k: usize) -> Result<Self> {
        Self::new(BlendFamily::Pmm, 1.0, k)
    }

    pub fn ranked(p: f64, k: usize) -> Result<Self> {
        Self::new(BlendFamily::Ranked, p, k)
    }

    pub fn scaled(p: f64, k: usize) -> Result<Self> {
        Self::new(BlendFamily::Scaled, p, k)
    }

    pub fn family(&self) -> BlendFamily {
        self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn needs_mahalanobis(&self) -> bool {
        self.family != BlendFamily::Pmm
    }

    /// Short label such as `pmm`, `ranked_0.5` or `scaled_1`.
    pub fn label(&self) -> String {
        match self.family {
            BlendFamily::Pmm => "pmm".to_string(),
            f => format!("{f}_{}", self.p),
        }
    }
}

/// Sorts `order` by value, then shuffles every run of equal values so ties
/// end up in uniformly random order. The rng is only touched on ties.
fn sort_with_random_ties<R: Rng + ?Sized>(order: &mut [usize], values: &[f64], rng: &mut R) {
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == v {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].shuffle(rng);
        }
        start = end;
    }
}

/// Ranks `1..=n` with ties broken by a uniform random permutation.
pub fn random_tie_ranks<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    sort_with_random_ties(&mut order, values, rng);
    let mut ranks = vec![0.0; values.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = (pos + 1) as f64;
    }
    ranks
}

fn check_pair(pd: &DistanceVector, md: &DistanceVector, p: f64) -> Result<()> {
    if pd.kind() != DistanceKind::Predictive {
        return Err(Error::arg("first blend input must be predictive distances"));
    }
    if md.kind() != DistanceKind::Mahalanobis {
        return Err(Error::arg(
            "second blend input must be Mahalanobis distances",
        ));
    }
    if pd.len() != md.len() {
        return Err(Error::dim(format!(
            "predictive has {} donors, Mahalanobis has {}",
            pd.len(),
            md.len()
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!(
            "blend factor must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// `p · rank(PD) + (1 - p) · rank(MD)`, predictive ranks drawn first.
pub fn blend_ranked<R: Rng + ?Sized>(
    pd: &DistanceVector,
    md: &DistanceVector,
    p: f64,
    rng: &mut R,
) -> Result<DistanceVector> {
    check_pair(pd, md, p)?;
    let rank_pd = random_tie_ranks(pd.values(), rng);
    let rank_md = random_tie_ranks(md.values(), rng);
    let values = rank_pd
        .iter()
        .zip(&rank_md)
        .map(|(a, b)| p * a + (1.0 - p) * b)
        .collect();
    Ok(DistanceVector {
        values,
        kind: DistanceKind::RankedBlend,
    })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Adds `weight · (v - mean) / sd` to `out`; a zero spread contributes the
/// centered vector instead.
fn accumulate_standardized(out: &mut [f64], values: &[f64], weight: f64, what: &str) {
    if weight == 0.0 {
        return;
    }
    let (mean, sd) = mean_and_sd(values);
    let scale = mean.abs().max(1.0);
    let divisor = if sd > f64::EPSILON * scale {
        sd
    } else {
        log::warn!(
            "{what} distances have zero spread (all donors equidistant); using centered values"
        );
        1.0
    };
    for (o, v) in out.iter_mut().zip(values) {
        *o += weight * (v - mean) / divisor;
    }
}

/// `p · z(PD) + (1 - p) · z(MD)` with sample standardization.
pub fn blend_scaled(pd: &DistanceVector, md: &DistanceVector, p: f64) -> Result<DistanceVector> {
    check_pair(pd, md, p)?;
    if pd.len() < 2 {
        return Err(Error::arg("scaled blend needs at least 2 donors"));
    }
    let mut values = vec![0.0; pd.len()];
    accumulate_standardized(&mut values, pd.values(), p, "predictive");
    accumulate_standardized(&mut values, md.values(), 1.0 - p, "Mahalanobis");
    Ok(DistanceVector {
        values,
        kind: DistanceKind::ScaledBlend,
    })
}

/// Indices of the `k` smallest distances, ascending, with boundary ties
/// broken uniformly at random.
pub fn select_donors<R: Rng + ?Sized>(
    distances: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = distances.len();
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if k > n {
        return Err(Error::arg(format!(
            "requested {k} donors from a pool of {n}"
        )));
    }
    let cmp = |a: &usize, b: &usize| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b));
    let mut order: Vec<usize> = (0..n).collect();
    if k < n {
        order.select_nth_unstable_by(k - 1, cmp);
        let cutoff = distances[order[k - 1]];
        let tied_inside = order[..k]
            .iter()
            .filter(|&&i| distances[i] == cutoff)
            .count();
        let tied_outside = order[k..]
            .iter()
            .filter(|&&i| distances[i] == cutoff)
            .count();
        if tied_outside > 0 {
            // redraw which of the tied donors fill the last slots
            let mut tied: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&i| distances[i] == cutoff)
                .collect();
            tied.sort_unstable();
            let (chosen, _) = tied.partial_shuffle(rng, tied_inside);
            let mut kept: Vec<usize> = order[..k]
                .iter()
                .copied()
                .filter(|&i| distances[i] != cutoff)
                .collect();
            kept.extend_from_slice(chosen);
            order = kept;
        } else {
            order.truncate(k);
        }
    }
    sort_with_random_ties(&mut order, distances, rng);
    Ok(order)
}

/// One row of the donor scatter: predictive and Mahalanobis distance of a
/// donor to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub index: usize,
    pub pd: f64,
    pub md: f64,
}

pub fn distance_table(
    donors: &DMatrix<f64>,
    donor_preds: &[f64],
    target: &[f64],
    target_pred: f64,
    cov: &CovarianceEstimate,
) -> Result<Vec<DistanceRow>> {
    if donors.nrows() != donor_preds.len() {
        return Err(Error::dim(format!(
            "{} donor rows but {} predictions",
            donors.nrows(),
            donor_preds.len()
        )));
    }
    if donors.ncols() != target.len() {
        return Err(Error::dim(format!(
            "donors have {} predictors, target has {}",
            donors.ncols(),
            target.len()
        )));
    }
    let mut row = vec![0.0; donors.ncols()];
    donor_preds
        .iter()
        .enumerate()
        .map(|(i, &pred)| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = donors[(i, j)];
            }
            Ok(DistanceRow {
                index: i,
                pd: (pred - target_pred).abs(),
                md: mahalanobis_distance(&row, target, cov)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sample_variance_of_one_two_three() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let cov = CovarianceEstimate::estimate(&x).unwrap();
        assert!(close(cov.matrix()[(0, 0)], 1.0, 1e-15));
        assert!(!cov.is_regularized());
    }

    #[test]
    fn constant_column_is_regularized() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let cov = CovarianceEstimate::estimate(&x).unwrap();
        assert!(cov.is_regularized());
        assert!(close(cov.matrix()[(0, 0)], 2.0 + 1e-6, 1e-12));
        assert!(cov.matrix()[(1, 1)] > 0.0);
        let id = cov.inverse() * cov.matrix();
        assert!((id - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn all_constant_predictors_fail() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 1.0, 5.0, 1.0, 5.0]);
        assert!(matches!(
            CovarianceEstimate::estimate(&x),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn single_row_fails() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(CovarianceEstimate::estimate(&x).is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        let id = CovarianceEstimate::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(
            mahalanobis_distance(&[3.0, 4.0], &[0.0, 0.0], &id).unwrap(),
            5.0
        );
        assert_eq!(
            mahalanobis_distance(&[1.5, -2.0], &[1.5, -2.0], &id).unwrap(),
            0.0
        );

        let diag = CovarianceEstimate::from_matrix(DMatrix::from_diagonal(
            &nalgebra::DVector::from_vec(vec![4.0, 1.0]),
        ))
        .unwrap();
        let d = mahalanobis_distance(&[2.0, 1.0], &[0.0, 0.0], &diag).unwrap();
        assert!(close(d, 2f64.sqrt(), 1e-12));
        assert!(mahalanobis_distance(&[1.0], &[0.0, 0.0], &diag).is_err());
    }

    #[test]
    fn whitened_euclidean_matches_quadratic_form() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.3, 0.6, 1.0, 0.2, 0.3, 0.2, 0.5]);
        let cov = CovarianceEstimate::from_matrix(c).unwrap();
        let x = [1.0, -2.0, 0.5];
        let y = [0.3, 0.4, 2.0];
        let wx = cov.whiten(&x).unwrap();
        let wy = cov.whiten(&y).unwrap();
        let e: f64 = wx
            .iter()
            .zip(&wy)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(close(e, mahalanobis_distance(&x, &y, &cov).unwrap(), 1e-12));
    }

    #[test]
    fn ranked_blend_hand_example() {
        // PD ranks [1,2,3], MD ranks [3,1,2]; no ties so the rng is irrelevant.
        let pd = DistanceVector::predictive(vec![0.1, 0.2, 0.3]).unwrap();
        let md = DistanceVector::mahalanobis(vec![9.0, 1.0, 2.0]).unwrap();
        let rbd = blend_ranked(&pd, &md, 0.5, &mut stream(1)).unwrap();
        assert_eq!(rbd.values(), &[2.0, 1.5, 2.5]);
        assert_eq!(rbd.kind(), DistanceKind::RankedBlend);
        let best = select_donors(rbd.values(), 1, &mut stream(1)).unwrap();
        assert_eq!(best, vec![1]);
    }

    #[test]
    fn ranked_blend_extremes_follow_single_metric() {
        let pd = DistanceVector::predictive(vec![0.5, 0.1, 0.9, 0.3]).unwrap();
        let md = DistanceVector::mahalanobis(vec![0.2, 3.0, 0.1, 1.0]).unwrap();
        let full_pd = blend_ranked(&pd, &md, 1.0, &mut stream(3)).unwrap();
        assert_eq!(full_pd.values(), &[3.0, 1.0, 4.0, 2.0]);
        let full_md = blend_ranked(&pd, &md, 0.0, &mut stream(3)).unwrap();
        assert_eq!(full_md.values(), &[2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn ranked_ties_get_distinct_ranks() {
        let values = [1.0, 1.0, 1.0, 0.0];
        let ranks = random_tie_ranks(&values, &mut stream(11));
        assert_eq!(ranks[3], 1.0);
        let mut tied: Vec<f64> = ranks[..3].to_vec();
        tied.sort_by(f64::total_cmp);
        assert_eq!(tied, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn scaled_blend_hand_examples() {
        let pd = DistanceVector::predictive(vec![1.0, 2.0, 3.0]).unwrap();
        let md = DistanceVector::mahalanobis(vec![3.0, 2.0, 1.0]).unwrap();
        let sbd = blend_scaled(&pd, &md, 0.5).unwrap();
        assert_eq!(sbd.values(), &[0.0, 0.0, 0.0]);

        let pd = DistanceVector::predictive(vec![5.0, 5.0, 5.0]).unwrap();
        let md = DistanceVector::mahalanobis(vec![1.0, 2.0, 3.0]).unwrap();
        let sbd = blend_scaled(&pd, &md, 0.0).unwrap();
        assert_eq!(sbd.values(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn scaled_blend_zero_spread_uses_centered_values() {
        let pd = DistanceVector::predictive(vec![5.0, 5.0, 5.0]).unwrap();
        let md = DistanceVector::mahalanobis(vec![1.0, 3.0, 5.0]).unwrap();
        let sbd = blend_scaled(&pd, &md, 0.5).unwrap();
        // PD term is centered to zeros, MD term is (v - 3) / 2
        assert_eq!(sbd.values(), &[-0.5, 0.0, 0.5]);
    }

    #[test]
    fn blend_input_checks() {
        let pd = DistanceVector::predictive(vec![1.0, 2.0]).unwrap();
        let md = DistanceVector::mahalanobis(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(blend_scaled(&pd, &md, 0.5).is_err());
        assert!(blend_ranked(&pd, &md, 0.5, &mut stream(0)).is_err());
        let md2 = DistanceVector::mahalanobis(vec![1.0, 2.0]).unwrap();
        assert!(blend_scaled(&md2, &pd, 0.5).is_err());
        assert!(blend_scaled(&pd, &md2, 1.5).is_err());
        assert!(DistanceVector::predictive(vec![-1.0]).is_err());
    }

    #[test]
    fn select_donors_examples() {
        let d = [0.3, 0.1, 0.2];
        assert_eq!(select_donors(&d, 2, &mut stream(0)).unwrap(), vec![1, 2]);
        let mut all = select_donors(&d, 3, &mut stream(0)).unwrap();
        assert_eq!(all, vec![1, 2, 0]);
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
        assert!(select_donors(&d, 4, &mut stream(0)).is_err());
        assert!(select_donors(&d, 0, &mut stream(0)).is_err());
    }

    #[test]
    fn select_donors_ties_are_seeded() {
        let d = [1.0; 10];
        let a = select_donors(&d, 2, &mut stream(42)).unwrap();
        let b = select_donors(&d, 2, &mut stream(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_ne!(a[0], a[1]);
        let picks: std::collections::HashSet<Vec<usize>> = (0..50)
            .map(|s| select_donors(&d, 2, &mut stream(s)).unwrap())
            .collect();
        assert!(picks.len() > 10);
    }

    #[test]
    fn distance_table_examples() {
        let cov = CovarianceEstimate::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let donors = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 6.0]);
        let rows = distance_table(&donors, &[3.0, 1.0], &[1.0, 2.0], 1.0, &cov).unwrap();
        assert_eq!(
            rows[0],
            DistanceRow {
                index: 0,
                pd: 2.0,
                md: 0.0
            }
        );
        assert_eq!(
            rows[1],
            DistanceRow {
                index: 1,
                pd: 0.0,
                md: 5.0
            }
        );
        assert!(distance_table(&donors, &[3.0], &[1.0, 2.0], 1.0, &cov).is_err());
        assert!(distance_table(&donors, &[3.0, 1.0], &[1.0], 1.0, &cov).is_err());
    }

    #[test]
    fn blend_spec_validation() {
        assert!(BlendSpec::ranked(1.2, 5).is_err());
        assert!(BlendSpec::scaled(-0.1, 5).is_err());
        assert!(BlendSpec::pmm(0).is_err());
        assert_eq!(BlendSpec::ranked(0.5, 5).unwrap().label(), "ranked_0.5");
        assert_eq!(BlendSpec::pmm(5).unwrap().label(), "pmm");
        assert_eq!(
            "Scaled".parse::<BlendFamily>().unwrap(),
            BlendFamily::Scaled
        );
    }
}
