//! CSV output for both studies. Numbers are written with Rust's shortest
//! round-trip formatting, so parsing them back gives the same `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::distance::BlendFamily;
use crate::error::{Error, Result};

use super::svg::trend_chart;
use super::{CellFailure, Study1Output, Study1Row, Study2Output};

pub const STUDY1_HEADER: [&str; 15] = [
    "mech", "mis", "dist", "cor", "qbar", "se", "t", "df", "b", "2.5%", "97.5%", "true", "cov",
    "bias", "R2",
];

pub const STUDY2_HEADER: [&str; 11] = [
    "method", "estimate", "true", "bias", "absbias", "ssd", "se", "lwr", "upr", "cov", "rmse",
];

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn condition_cells(row: &Study1Row) -> [String; 4] {
    let c = &row.condition;
    [
        c.mechanism.to_string(),
        c.mis_label(),
        c.dist_label().to_string(),
        c.rho.to_string(),
    ]
}

fn write_records<I, R>(path: &Path, header: &[&str], records: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// File name of a method's study I table, e.g. `table3_ranked_0.5.csv`.
pub fn study1_table_name(index: usize, label: &str) -> String {
    format!("table{}_{label}.csv", index + 1)
}

/// Writes one table per method, `results.csv` in long format and the
/// bias / coverage / R² panel data `figure2.csv` … `figure4.csv`.
pub fn write_study1_tables(output: &Study1Output, dir: &Path) -> Result<Vec<PathBuf>> {
    if output.rows.is_empty() {
        return Err(Error::Empty("study I produced no rows"));
    }
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let mut methods: Vec<_> = Vec::new();
    for row in &output.rows {
        if !methods.contains(&row.method) {
            methods.push(row.method);
        }
    }
    for (i, method) in methods.iter().enumerate() {
        let path = dir.join(study1_table_name(i, &method.label()));
        let rows = output.rows.iter().filter(|r| r.method == *method).map(|r| {
            let mut cells = condition_cells(r).to_vec();
            cells.extend(
                [
                    r.qbar, r.se, r.t, r.df, r.b, r.ci_lower, r.ci_upper, r.truth, r.cov, r.bias,
                    r.r2,
                ]
                .iter()
                .map(f64::to_string),
            );
            cells
        });
        write_records(&path, &STUDY1_HEADER, rows)?;
        written.push(path);
    }

    let path = dir.join("results.csv");
    let mut long = Vec::new();
    for r in &output.rows {
        let measures = [
            ("qbar", r.qbar),
            ("se", r.se),
            ("t", r.t),
            ("df", r.df),
            ("b", r.b),
            ("ci_lower", r.ci_lower),
            ("ci_upper", r.ci_upper),
            ("true", r.truth),
            ("cov", r.cov),
            ("bias", r.bias),
            ("r2", r.r2),
            ("cov_alt", r.cov_alt),
            ("replicate_var", r.replicate_var),
            ("n_ok", r.n_ok as f64),
            ("n_failed", r.n_failed as f64),
        ];
        for (name, value) in measures {
            let mut cells = condition_cells(r).to_vec();
            cells.push(r.method.label());
            cells.push(name.to_string());
            cells.push(value.to_string());
            long.push(cells);
        }
    }
    write_records(
        &path,
        &["mech", "mis", "dist", "cor", "method", "measure", "value"],
        long,
    )?;
    written.push(path);

    let panels: [(&str, fn(&Study1Row) -> f64); 3] = [
        ("figure2.csv", |r| r.bias),
        ("figure3.csv", |r| r.cov),
        ("figure4.csv", |r| r.r2),
    ];
    for (name, value) in panels {
        let path = dir.join(name);
        let rows = output
            .rows
            .iter()
            .map(|r| [r.condition.label(), r.method.label(), value(r).to_string()]);
        write_records(&path, &["condition", "method", "value"], rows)?;
        written.push(path);
    }

    if !output.failures.is_empty() {
        written.push(write_failures(&output.failures, dir)?);
    }
    Ok(written)
}

fn write_failures(failures: &[CellFailure], dir: &Path) -> Result<PathBuf> {
    let path = dir.join("failures.csv");
    write_records(
        &path,
        &["condition", "method", "replicate", "message"],
        failures.iter().map(|f| {
            [
                f.condition.clone(),
                f.method.clone(),
                f.replicate.to_string(),
                f.message.clone(),
            ]
        }),
    )?;
    Ok(path)
}

/// Writes `table8.csv`, the per-replicate `study2_records.csv`, and the
/// blend-factor trend as `figure5.csv` and `figure5.svg`.
pub fn write_study2_tables(output: &Study2Output, dir: &Path) -> Result<Vec<PathBuf>> {
    if output.rows.is_empty() {
        return Err(Error::Empty("study II produced no rows"));
    }
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let path = dir.join("table8.csv");
    write_records(
        &path,
        &STUDY2_HEADER,
        output.rows.iter().map(|r| {
            let mut cells = vec![r.method.label()];
            cells.extend(
                [
                    r.estimate, r.truth, r.bias, r.absbias, r.ssd, r.se, r.ci_lower, r.ci_upper,
                    r.cov, r.rmse,
                ]
                .iter()
                .map(f64::to_string),
            );
            cells
        }),
    )?;
    written.push(path);

    let path = dir.join("study2_records.csv");
    write_records(
        &path,
        &[
            "replicate",
            "method",
            "estimate",
            "true",
            "bias",
            "absbias",
            "ssd",
            "se",
            "lwr",
            "upr",
            "covered",
            "rmse_contrib",
        ],
        output.records.iter().map(|r| {
            vec![
                r.replicate.to_string(),
                r.method.label(),
                r.estimate.to_string(),
                r.truth.to_string(),
                r.bias.to_string(),
                r.absbias.to_string(),
                r.ssd.to_string(),
                r.se.to_string(),
                r.ci_lower.to_string(),
                r.ci_upper.to_string(),
                (r.covered as u8).to_string(),
                r.rmse_contrib.to_string(),
            ]
        }),
    )?;
    written.push(path);

    let mut trend: Vec<(f64, f64, f64)> = output
        .rows
        .iter()
        .filter(|r| r.method.spec.family() == BlendFamily::Ranked)
        .map(|r| (r.method.spec.p(), r.se, r.cov))
        .collect();
    trend.sort_by(|a, b| a.0.total_cmp(&b.0));
    let path = dir.join("figure5.csv");
    write_records(
        &path,
        &["blend", "se", "cov"],
        trend
            .iter()
            .map(|(p, se, cov)| [p.to_string(), se.to_string(), cov.to_string()]),
    )?;
    written.push(path);

    if !trend.is_empty() {
        let path = dir.join("figure5.svg");
        let xs: Vec<f64> = trend.iter().map(|t| t.0).collect();
        let se: Vec<f64> = trend.iter().map(|t| t.1).collect();
        let cov: Vec<f64> = trend.iter().map(|t| t.2).collect();
        let svg = trend_chart("Blending factor", ("SE", &se), ("Coverage", &cov), &xs);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    if !output.failures.is_empty() {
        written.push(write_failures(&output.failures, dir)?);
    }
    Ok(written)
}

/// `key = value` lines describing a run.
pub fn write_manifest(dir: &Path, entries: &[(String, String)]) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join("manifest.txt");
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
