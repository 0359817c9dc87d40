//! CSV schemas.
//!
//! * datasets: `x1,…,xp,y` with an empty `y` cell for a missing outcome, and
//!   an optional `mask` column (1 observed, 0 missing);
//! * imputations: `row,observed,imp1,…,impm`;
//! * donor distances: `index,pd,md`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::distance::DistanceRow;
use crate::error::{Error, Result};
use crate::imputer::{Dataset, ImputationResult};

pub const DISTANCE_TABLE_HEADER: &str = "index,pd,md";

fn predictor_index(name: &str) -> Option<usize> {
    name.strip_prefix('x')?
        .parse::<usize>()
        .ok()
        .filter(|&i| i >= 1)
}

/// Parses a dataset from any reader; `source` names it in error messages.
pub fn parse_dataset<R: Read>(reader: R, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{source}: {e}")))?
        .clone();

    let mut x_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, name)| predictor_index(name).map(|i| (i, col)))
        .collect();
    x_cols.sort();
    if x_cols.is_empty() || x_cols.iter().enumerate().any(|(k, (i, _))| *i != k + 1) {
        return Err(Error::Parse(format!(
            "{source}: expected predictor columns x1, x2, … in the header"
        )));
    }
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::Parse(format!("{source}: missing `y` column")))?;
    let mask_col = headers.iter().position(|h| h == "mask");

    let p = x_cols.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let line = line + 2;
        let record = record.map_err(|e| Error::Parse(format!("{source}: {e}")))?;
        let field = |col: usize| record.get(col).unwrap_or("");
        for &(_, col) in &x_cols {
            let v: f64 = field(col).parse().map_err(|_| {
                Error::Parse(format!(
                    "{source} line {line}: predictor `{}` is not a number",
                    field(col)
                ))
            })?;
            xs.push(v);
        }
        let observed = match mask_col {
            Some(col) => match field(col) {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::Parse(format!(
                        "{source} line {line}: mask `{other}` must be 0 or 1"
                    )))
                }
            },
            None => true,
        };
        let raw = field(y_col);
        let y = if raw.is_empty() || raw.eq_ignore_ascii_case("na") || !observed {
            None
        } else {
            Some(raw.parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{source} line {line}: outcome `{raw}` is not a number"
                ))
            })?)
        };
        ys.push(y);
    }
    if ys.is_empty() {
        return Err(Error::Parse(format!("{source}: no data rows")));
    }
    let x = DMatrix::from_row_slice(ys.len(), p, &xs);
    Dataset::from_options(x, &ys)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file, &path.display().to_string())
}

/// Writes `x1,…,xp,y,mask`. `truth`, when given, fills the `y` cell of
/// missing rows; otherwise it is left empty.
pub fn write_dataset(path: &Path, data: &Dataset, truth: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header: Vec<String> = (1..=data.n_predictors()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    header.push("mask".into());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for i in 0..data.n() {
        let mut cells: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        let observed = data.observed()[i];
        cells.push(if observed {
            data.y()[i].to_string()
        } else {
            truth.map(|t| t[i].to_string()).unwrap_or_default()
        });
        cells.push((observed as u8).to_string());
        w.write_record(&cells).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `row,observed,imp1,…,impm`.
pub fn write_imputations<W: Write>(out: W, result: &ImputationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row".to_string(), "observed".to_string()];
    header.extend((1..=result.m()).map(|j| format!("imp{j}")));
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(&header).map_err(err)?;
    for row in 0..result.n() {
        let mut cells = vec![row.to_string(), (result.observed[row] as u8).to_string()];
        cells.extend(result.completed.iter().map(|c| c[row].to_string()));
        w.write_record(&cells).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_distance_table<W: Write>(mut out: W, rows: &[DistanceRow]) -> std::io::Result<()> {
    writeln!(out, "{DISTANCE_TABLE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.index, r.pd, r.md)?;
    }
    Ok(())
}
