//! Discrepancy between two grid functions written by `run`.

use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub linf: f64,
    /// `sqrt(dt sum d^2)` with `dt` taken from the `t` column.
    pub l2: f64,
}

/// A CSV with a leading `t` column, read as named numeric columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(CliError::Compare(format!(
                "{}: first column must be `t`",
                path.display()
            )));
        }
        let mut columns = vec![Vec::new(); header.len()];
        for (i, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            for (c, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|e| {
                    CliError::Compare(format!(
                        "{}: row {}, column `{}`: {e}",
                        path.display(),
                        i + 2,
                        header[c]
                    ))
                })?;
                columns[c].push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn times(&self) -> &[f64] {
        &self.columns[0]
    }
}

/// Compares column `column` (default: `omega_num` if present, else the
/// first data column) of two CSVs sampled on the same grid.
pub fn compare_files(a: &Path, b: &Path, column: Option<&str>) -> Result<Discrepancy> {
    let (ta, tb) = (Table::read(a)?, Table::read(b)?);
    let name = match column {
        Some(c) => c.to_string(),
        None if ta.column("omega_num").is_some() => "omega_num".into(),
        None => ta
            .header
            .get(1)
            .cloned()
            .ok_or_else(|| CliError::Compare(format!("{}: no data column", a.display())))?,
    };
    let missing = |p: &Path| CliError::Compare(format!("{}: no column `{name}`", p.display()));
    let ya = ta.column(&name).ok_or_else(|| missing(a))?;
    let yb = tb.column(&name).ok_or_else(|| missing(b))?;
    let (t, tb_times) = (ta.times(), tb.times());
    if t.len() != tb_times.len()
        || t.iter()
            .zip(tb_times)
            .any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(CliError::Compare(format!(
            "grid mismatch: {} has {} rows, {} has {}",
            a.display(),
            t.len(),
            b.display(),
            tb_times.len()
        )));
    }
    Ok(discrepancy(t, ya, yb))
}

pub fn discrepancy(t: &[f64], a: &[f64], b: &[f64]) -> Discrepancy {
    let dt = if t.len() > 1 { t[1] - t[0] } else { 1.0 };
    let (mut linf, mut ss) = (0.0f64, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        linf = linf.max(d.abs());
        ss += d * d;
    }
    Discrepancy {
        linf,
        l2: (dt * ss).sqrt(),
    }
}
