//! Browser bindings for three small views: the donor scatter for one target,
//! the blend-factor trend of the single-value study and a missingness
//! preview. Each returns a flat `Float64Array`; the record layouts are
//! documented per function.

use blendmatch::datagen::{
    ampute, gen_population, missing_probabilities, GenConfig, MissingnessConfig,
};
use blendmatch::distance::mahalanobis_distance;
use blendmatch::harness::{run_study2, Study2Config};
use blendmatch::imputer::{ImputeOptions, MatchType, PreparedImputation};
use blendmatch::linear_model::predict_row;
use blendmatch::rng::{stream, substream};
use blendmatch::{BlendFamily, BlendSpec, CovarianceEstimate};
use wasm_bindgen::prelude::*;

pub const SCATTER_N: usize = 200;
pub const SCATTER_FIELDS: usize = 4;
pub const TREND_FIELDS: usize = 5;
pub const AMPUTE_FIELDS: usize = 3;

fn family(name: &str) -> Result<BlendFamily, String> {
    name.parse().map_err(|e: blendmatch::Error| e.to_string())
}

/// Row 0 of a 200-row sample is the target, the rest are donors. One record
/// per donor: `row, pd, md, chosen` with `chosen` 1 for the `k` selected.
pub fn scatter(
    seed: u64,
    family_name: &str,
    blend: f64,
    k: usize,
    rho: f64,
) -> Result<Vec<f64>, String> {
    let fam = family(family_name)?;
    let p = if fam == BlendFamily::Pmm { 1.0 } else { blend };
    let spec = BlendSpec::new(fam, p, k).map_err(|e| e.to_string())?;
    let gen = GenConfig::new(SCATTER_N, rho, false, seed);
    gen.validate().map_err(|e| e.to_string())?;
    let full = gen_population(&gen, &mut substream(seed, &[0])).map_err(|e| e.to_string())?;
    let mut mask = vec![true; SCATTER_N];
    mask[0] = false;
    let data = full.remask(mask).map_err(|e| e.to_string())?;
    let options = ImputeOptions {
        match_type: MatchType::Type0,
        ..Default::default()
    };
    let prepared = PreparedImputation::new(&data, spec, options).map_err(|e| e.to_string())?;
    let beta = prepared.fit().beta_hat();
    let chosen: Vec<usize> = prepared
        .match_target(0, beta, &mut stream(seed))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|d| d.row)
        .collect();
    let cov = CovarianceEstimate::estimate(data.x()).map_err(|e| e.to_string())?;
    let target = data.row(0);
    let target_pred = predict_row(beta, &target);
    let mut out = Vec::with_capacity(prepared.donors().len() * SCATTER_FIELDS);
    for &row in prepared.donors() {
        let x = data.row(row);
        let md = mahalanobis_distance(&x, &target, &cov).map_err(|e| e.to_string())?;
        out.extend([
            row as f64,
            (predict_row(beta, &x) - target_pred).abs(),
            md,
            chosen.contains(&row) as u8 as f64,
        ]);
    }
    Ok(out)
}

/// A short run of the single-value study. One record per ranked blend
/// factor from 1 down to 0: `p, cov, se, bias, rmse`.
pub fn trend(seed: u64, nsim: usize, m: usize) -> Result<Vec<f64>, String> {
    let config = Study2Config {
        nsim,
        m,
        seed,
        ..Default::default()
    };
    let output = run_study2(&config).map_err(|e| e.to_string())?;
    Ok(output
        .rows
        .iter()
        .filter(|r| r.method.spec.family() == BlendFamily::Ranked)
        .flat_map(|r| [r.method.spec.p(), r.cov, r.se, r.bias, r.rmse])
        .collect())
}

/// One record per row of an `n`-row sample: `sum score, probability,
/// missing`.
pub fn missingness(
    seed: u64,
    n: usize,
    mechanism: &str,
    proportion: f64,
    rho: f64,
) -> Result<Vec<f64>, String> {
    let mech = mechanism
        .parse()
        .map_err(|e: blendmatch::Error| e.to_string())?;
    let gen = GenConfig::new(n, rho, false, seed);
    gen.validate().map_err(|e| e.to_string())?;
    let data = gen_population(&gen, &mut substream(seed, &[0])).map_err(|e| e.to_string())?;
    let miss = MissingnessConfig::new(mech, proportion, seed).map_err(|e| e.to_string())?;
    let probs = missing_probabilities(data.x(), &miss);
    let mask =
        ampute(data.y(), data.x(), &miss, &mut substream(seed, &[1])).map_err(|e| e.to_string())?;
    Ok(data
        .x()
        .row_iter()
        .zip(probs)
        .zip(mask)
        .flat_map(|((row, prob), observed)| [row.sum(), prob, (!observed) as u8 as f64])
        .collect())
}

#[wasm_bindgen(js_name = donorScatter)]
pub fn donor_scatter(
    seed: u32,
    family_name: &str,
    blend: f64,
    k: u32,
    rho: f64,
) -> Result<Vec<f64>, JsValue> {
    scatter(seed as u64, family_name, blend, k as usize, rho).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = blendTrend)]
pub fn blend_trend(seed: u32, nsim: u32, m: u32) -> Result<Vec<f64>, JsValue> {
    trend(seed as u64, nsim as usize, m as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = amputePreview)]
pub fn ampute_preview(
    seed: u32,
    n: u32,
    mechanism: &str,
    proportion: f64,
    rho: f64,
) -> Result<Vec<f64>, JsValue> {
    missingness(seed as u64, n as usize, mechanism, proportion, rho)
        .map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_marks_k_donors() {
        let out = scatter(7, "ranked", 0.5, 5, 0.7).unwrap();
        assert_eq!(out.len(), (SCATTER_N - 1) * SCATTER_FIELDS);
        let chosen: f64 = out.chunks(SCATTER_FIELDS).map(|r| r[3]).sum();
        assert_eq!(chosen, 5.0);
        assert!(out
            .chunks(SCATTER_FIELDS)
            .all(|r| r[1] >= 0.0 && r[2] >= 0.0));
    }

    #[test]
    fn scatter_pmm_picks_smallest_pd() {
        let out = scatter(3, "pmm", 0.0, 5, 0.0).unwrap();
        let mut pds: Vec<f64> = out.chunks(SCATTER_FIELDS).map(|r| r[1]).collect();
        pds.sort_by(f64::total_cmp);
        let worst_chosen = out
            .chunks(SCATTER_FIELDS)
            .filter(|r| r[3] == 1.0)
            .map(|r| r[1])
            .fold(0.0, f64::max);
        assert_eq!(worst_chosen, pds[4]);
    }

    #[test]
    fn trend_has_eleven_factors() {
        let out = trend(1, 2, 5).unwrap();
        assert_eq!(out.len(), 11 * TREND_FIELDS);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[10 * TREND_FIELDS], 0.0);
    }

    #[test]
    fn missingness_rows_and_errors() {
        let out = missingness(1, 300, "mar", 0.5, 0.0).unwrap();
        assert_eq!(out.len(), 300 * AMPUTE_FIELDS);
        let mean_prob: f64 = out.chunks(AMPUTE_FIELDS).map(|r| r[1]).sum::<f64>() / 300.0;
        assert!((mean_prob - 0.5).abs() < 1e-9);
        assert!(missingness(1, 300, "nope", 0.5, 0.0).is_err());
        assert!(scatter(1, "ranked", 2.0, 5, 0.0).is_err());
    }
}
