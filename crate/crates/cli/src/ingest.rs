//! Long-format CSV ingestion.

use std::collections::HashSet;
use std::path::Path;

use clusterperm::model::Cell;
use clusterperm::multiway::{MultiIndexDataset, Record};
use clusterperm::{DyadArray, Error as CoreError, Mask};

use crate::args::DataArgs;
use crate::error::CliError;

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: u64,
    pub i: usize,
    pub j: usize,
    pub l: Option<usize>,
    pub y: f64,
    pub d: Vec<f64>,
    pub x: Vec<f64>,
}

/// Parsed file with the resolved column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
    pub treatment: Vec<String>,
    pub covariates: Vec<String>,
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Config(format!("column {name:?} not found in header")))
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64, CliError> {
    field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
        line,
        message: format!("column {name:?}: {field:?} is not a finite number"),
    })
}

fn parse_index(field: &str, name: &str, line: u64) -> Result<usize, CliError> {
    match field.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(CliError::Parse {
            line,
            message: format!("column {name:?}: {field:?} is not a positive integer index"),
        }),
    }
}

/// Reads the bound columns. The third index is read when the column exists.
pub fn ingest_csv(path: &Path, bind: &DataArgs) -> Result<Table, CliError> {
    let mut reader = open(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let index_names = [bind.row_col.as_str(), bind.col_col.as_str(), bind.third_col.as_str(), bind.y.as_str()];
    let pick = |explicit: &Option<Vec<String>>, prefix: char| -> Vec<String> {
        match explicit {
            Some(list) => list.clone(),
            None => headers
                .iter()
                .filter(|h| h.starts_with(prefix) && !index_names.contains(h))
                .map(str::to_string)
                .collect(),
        }
    };
    let treatment = pick(&bind.treatment, 'd');
    let covariates = pick(&bind.covariates, 'x');
    if treatment.is_empty() {
        return Err(CliError::Config("no treatment columns; pass --treatment".into()));
    }
    let (ci, cj, cy) = (column(&headers, &bind.row_col)?, column(&headers, &bind.col_col)?, column(&headers, &bind.y)?);
    let cl = column(&headers, &bind.third_col).ok();
    let cd: Vec<usize> = treatment.iter().map(|n| column(&headers, n)).collect::<Result<_, _>>()?;
    let cx: Vec<usize> = covariates.iter().map(|n| column(&headers, n)).collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |c: usize| record.get(c).unwrap_or("");
        let mut x: Vec<f64> = Vec::with_capacity(cx.len() + 1);
        if !bind.no_intercept {
            x.push(1.0);
        }
        for (&c, name) in cx.iter().zip(&covariates) {
            x.push(parse_f64(get(c), name, line)?);
        }
        rows.push(Row {
            line,
            i: parse_index(get(ci), &bind.row_col, line)?,
            j: parse_index(get(cj), &bind.col_col, line)?,
            l: cl.map(|c| parse_index(get(c), &bind.third_col, line)).transpose()?,
            y: parse_f64(get(cy), &bind.y, line)?,
            d: cd
                .iter()
                .zip(&treatment)
                .map(|(&c, name)| parse_f64(get(c), name, line))
                .collect::<Result<_, _>>()?,
            x,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Parse { line: 1, message: "file has no data rows".into() });
    }
    Ok(Table { rows, treatment, covariates })
}

fn extents(rows: &[Row], bind: &DataArgs) -> Result<(usize, usize), CliError> {
    let m = rows.iter().map(|r| r.i).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.j).max().unwrap_or(0);
    let (m2, n2) = (bind.n_rows.unwrap_or(m), bind.n_cols.unwrap_or(n));
    if m2 < m || n2 < n {
        return Err(CliError::Config(format!("data has indices up to ({m}, {n}) beyond the declared extents")));
    }
    Ok((m2, n2))
}

/// Dyadic array with one observation per `(i, j)`; absent pairs are
/// unobserved in the returned mask.
pub fn to_dyadic(table: &Table, bind: &DataArgs) -> Result<(DyadArray, Mask), CliError> {
    let (m, n) = extents(&table.rows, bind)?;
    let p = table.rows[0].x.len();
    let mut array = DyadArray::new(m, n, table.treatment.len(), p)?;
    for row in &table.rows {
        if array.is_observed(row.i, row.j) {
            return Err(CoreError::DuplicateCell { i: row.i, j: row.j, l: None }.into());
        }
        array.set(row.i, row.j, Cell { y: row.y, d: row.d.clone(), x: row.x.clone() })?;
    }
    let mask = Mask::from_array(&array);
    Ok((array, mask))
}

/// Three-index dataset; the third index column is required.
pub fn to_multi(table: &Table, bind: &DataArgs) -> Result<MultiIndexDataset, CliError> {
    let (m, n) = extents(&table.rows, bind)?;
    let records = table
        .rows
        .iter()
        .map(|r| {
            let l = r.l.ok_or_else(|| CliError::Config(format!("column {:?} not found in header", bind.third_col)))?;
            Ok(Record { i: r.i, j: r.j, l, y: r.y, d: r.d.clone(), x: r.x.clone() })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(MultiIndexDataset::new(records, m, n)?)
}

/// Mask from `i,j[,m]` triples. Pairs not listed are unobserved.
pub fn read_mask(path: &Path, n_rows: Option<usize>, n_cols: Option<usize>) -> Result<Mask, CliError> {
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| CliError::Parse { line: 1, message: e.to_string() })?.clone();
    let (ci, cj) = (column(&headers, "i")?, column(&headers, "j")?);
    let cm = column(&headers, "m").ok();
    let mut cells = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let i = parse_index(record.get(ci).unwrap_or(""), "i", line)?;
        let j = parse_index(record.get(cj).unwrap_or(""), "j", line)?;
        let observed = match cm.map(|c| record.get(c).unwrap_or("")) {
            None => true,
            Some("1") => true,
            Some("0") => false,
            Some(other) => {
                return Err(CliError::Parse { line, message: format!("column \"m\": {other:?} is not 0 or 1") })
            }
        };
        if !seen.insert((i, j)) {
            return Err(CoreError::DuplicateCell { i, j, l: None }.into());
        }
        cells.push((i, j, observed));
    }
    let m = n_rows.unwrap_or_else(|| cells.iter().map(|c| c.0).max().unwrap_or(0));
    let n = n_cols.unwrap_or_else(|| cells.iter().map(|c| c.1).max().unwrap_or(0));
    let mut mask = Mask::from_fn(m, n, |_, _| false);
    for (i, j, observed) in cells {
        mask.set(i, j, observed)?;
    }
    Ok(mask)
}
