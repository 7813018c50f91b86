//! Small CSV helpers shared by the stages.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hydrodata::io::{create, format_value, open};
use crate::metrics::ecdf;

pub fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_column(path: &Path, column: &str) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::parse(path, format!("missing column `{column}`")))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        out.push(rec?[idx].to_string());
    }
    Ok(out)
}

pub fn opt(v: Option<f64>) -> String {
    format_value(v)
}

/// Two-column `value,cdf` table, directly plottable.
pub fn write_ecdf(path: &Path, values: &[Option<f64>]) -> Result<()> {
    write_rows(path, &["value", "cdf"], ecdf(values).into_iter().map(|(x, f)| [x.to_string(), f.to_string()]))
}
