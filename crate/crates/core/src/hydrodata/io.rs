//! CSV readers and writers for daily series, forcing tables and static attributes.
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`). A missing value is an empty field or `NA`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};

use super::{DailySeries, ForcingSeries, ForcingSource, Variable};
use crate::error::{Error, Result};

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

pub(crate) fn parse_value(s: &str) -> std::result::Result<Option<f64>, String> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("NA") {
        return Ok(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) => Err(format!("non-finite value {v}")),
        Err(e) => Err(format!("bad number `{t}`: {e}")),
    }
}

pub fn format_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Reads rows of `date, v1, v2, ...` into one [`DailySeries`] per value column.
///
/// Rows may come in any order and skip days; gaps become missing slots.
fn read_table<R: Read>(reader: R, path: &Path, n_cols: usize) -> Result<Vec<DailySeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < n_cols + 1 {
            return Err(Error::parse(path, format!("row {}: expected {} columns", line + 2, n_cols + 1)));
        }
        let date = parse_date(&rec[0])
            .ok_or_else(|| Error::parse(path, format!("row {}: bad date `{}`", line + 2, &rec[0])))?;
        let vals = (1..=n_cols)
            .map(|k| parse_value(&rec[k]).map_err(|e| Error::parse(path, format!("row {}: {e}", line + 2))))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(date, vals).is_some() {
            return Err(Error::parse(path, format!("duplicate date {date}")));
        }
    }
    let Some((&start, _)) = rows.first_key_value() else {
        return Ok(vec![DailySeries::from_dense(NaiveDate::MIN, []); n_cols]);
    };
    let &end = rows.last_key_value().map(|(d, _)| d).unwrap();
    let n = (end - start).num_days() as usize + 1;
    let mut cols = vec![vec![None; n]; n_cols];
    for (d, vals) in rows {
        let i = (d - start).num_days() as usize;
        for (k, v) in vals.into_iter().enumerate() {
            cols[k][i] = v;
        }
    }
    cols.into_iter().map(|c| DailySeries::new(start, c)).collect()
}

pub fn read_series_csv(path: &Path) -> Result<DailySeries> {
    let mut cols = read_table(open(path)?, path, 1)?;
    Ok(cols.remove(0))
}

pub fn write_series_csv(path: &Path, series: &DailySeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["date", "value"])?;
    for (d, v) in series.iter() {
        w.write_record([d.to_string(), format_value(v)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Forcing table with columns `date,SSR,STR,SP,T2M,TP` (header names may be in any order).
pub fn read_forcing_csv(path: &Path, source: ForcingSource, lead_time_days: u32) -> Result<ForcingSeries> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = text
        .lines()
        .next()
        .unwrap_or_default()
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() != 6 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::parse(path, "expected header date + 5 forcing variables"));
    }
    let order = header[1..]
        .iter()
        .map(|h| h.parse::<Variable>())
        .collect::<Result<Vec<_>>>()?;
    let cols = read_table(text.as_bytes(), path, 5)?;
    let mut by_var: Vec<Option<DailySeries>> = vec![None; 5];
    for (v, c) in order.into_iter().zip(cols) {
        if by_var[v.index()].replace(c).is_some() {
            return Err(Error::parse(path, format!("variable {v} listed twice")));
        }
    }
    let vars: [DailySeries; 5] = by_var
        .into_iter()
        .map(|c| c.expect("five distinct variables"))
        .collect::<Vec<_>>()
        .try_into()
        .expect("five columns");
    ForcingSeries::new(source, lead_time_days, vars)
}

pub fn write_forcing_csv(path: &Path, forcing: &ForcingSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["date".to_string()];
    header.extend(Variable::ALL.iter().map(|v| v.name().to_string()));
    w.write_record(&header)?;
    for i in 0..forcing.len() {
        let mut row = vec![(forcing.start() + Days::new(i as u64)).to_string()];
        row.extend(forcing.iter().map(|(_, s)| format_value(s.values()[i])));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One row of the static attribute table.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub area_km2: f64,
    pub utc_offset_hours: f64,
    pub attrs: Vec<f64>,
}

/// Static attribute table keyed by `station_id`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StaticTable {
    /// Attribute column names, excluding `station_id`, `area_km2` and `utc_offset_hours`.
    pub attr_names: Vec<String>,
    pub rows: BTreeMap<String, StaticRow>,
}

pub fn read_static_csv(path: &Path) -> Result<StaticTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column `{name}`")))
    };
    let id_col = find("station_id")?;
    let area_col = find("area_km2")?;
    let utc_col = find("utc_offset_hours")?;
    let attr_cols: Vec<usize> = (0..headers.len())
        .filter(|c| ![id_col, area_col, utc_col].contains(c))
        .collect();
    let mut table = StaticTable {
        attr_names: attr_cols.iter().map(|&c| headers[c].to_string()).collect(),
        rows: BTreeMap::new(),
    };
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec[id_col].to_string();
        let num = |c: usize| -> Result<f64> {
            parse_value(&rec[c])
                .map_err(|e| Error::parse(path, format!("station {id}: {e}")))?
                .ok_or_else(|| Error::parse(path, format!("station {id}: missing `{}`", &headers[c])))
        };
        let row = StaticRow {
            area_km2: num(area_col)?,
            utc_offset_hours: num(utc_col)?,
            attrs: attr_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
        };
        if table.rows.insert(id.clone(), row).is_some() {
            return Err(Error::parse(path, format!("duplicate station {id}")));
        }
    }
    Ok(table)
}

pub fn write_static_csv(path: &Path, table: &StaticTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["station_id".to_string(), "area_km2".into(), "utc_offset_hours".into()];
    header.extend(table.attr_names.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in &table.rows {
        let mut rec = vec![id.clone(), row.area_km2.to_string(), row.utc_offset_hours.to_string()];
        rec.extend(row.attrs.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?
        .write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_csv_roundtrip_with_gaps_and_na() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        std::fs::write(&p, "date,value\n2020-01-03,3.5\n2020-01-01,1.25\n2020-01-02,NA\n2020-01-05,\n").unwrap();
        let s = read_series_csv(&p).unwrap();
        assert_eq!(s.start(), NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        assert_eq!(s.values(), &[Some(1.25), None, Some(3.5), None, None]);
        let p2 = dir.path().join("q2.csv");
        write_series_csv(&p2, &s).unwrap();
        assert_eq!(read_series_csv(&p2).unwrap(), s);
    }

    #[test]
    fn bad_date_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        std::fs::write(&p, "date,value\n01/02/2020,1\n").unwrap();
        assert!(matches!(read_series_csv(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn forcing_columns_in_any_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "date,TP,SSR,STR,SP,T2M\n2020-01-01,2,10,20,1000,5\n").unwrap();
        let f = read_forcing_csv(&p, ForcingSource::Reanalysis, 0).unwrap();
        assert_eq!(f.get(Variable::Tp).values(), &[Some(2.0)]);
        assert_eq!(f.get(Variable::Sp).values(), &[Some(1000.0)]);
        let p2 = dir.path().join("f2.csv");
        write_forcing_csv(&p2, &f).unwrap();
        assert_eq!(read_forcing_csv(&p2, ForcingSource::Reanalysis, 0).unwrap(), f);
    }

    #[test]
    fn static_table_requires_area_and_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "station_id,area_km2,elev\nA,10,100\n").unwrap();
        assert!(read_static_csv(&p).is_err());
        std::fs::write(&p, "station_id,elev,area_km2,utc_offset_hours\nA,100,10,1\n").unwrap();
        let t = read_static_csv(&p).unwrap();
        assert_eq!(t.attr_names, vec!["elev"]);
        assert_eq!(t.rows["A"].attrs, vec![100.0]);
        assert_eq!(t.rows["A"].utc_offset_hours, 1.0);
    }
}
