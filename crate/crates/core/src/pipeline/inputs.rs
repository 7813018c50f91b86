use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::curation::{read_geojson, BasinGeometry};
use crate::error::{Error, Result};
use crate::hydrodata::io::{read_forcing_csv, read_series_csv, read_static_csv};
use crate::hydrodata::{series_to_specific_discharge, ForcingSeries, ForcingSource, StationRecord};

use super::manifest::{DischargeUnits, RunManifest};

pub fn discharge_path(m: &RunManifest, id: &str) -> PathBuf {
    m.data.discharge_dir.join(format!("{id}.csv"))
}

pub fn reanalysis_path(m: &RunManifest, id: &str) -> PathBuf {
    m.data.reanalysis_dir.join(format!("{id}.csv"))
}

pub fn forecast_path(m: &RunManifest, id: &str, lead_time: u32) -> PathBuf {
    m.data.forecast_dir.join(format!("{id}_lt{lead_time}.csv"))
}

/// Everything the pipeline reads from the dataset directories.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub attr_names: Vec<String>,
    /// Observed discharge already converted to mm/d.
    pub records: BTreeMap<String, StationRecord>,
    pub reanalysis: BTreeMap<String, ForcingSeries>,
    pub forecasts: BTreeMap<(String, u32), ForcingSeries>,
    pub geometries: Vec<BasinGeometry>,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::parse(path, "file not found"))
    }
}

impl Inputs {
    pub fn load(m: &RunManifest) -> Result<Self> {
        let table = read_static_csv(&m.data.stations)?;
        if table.rows.is_empty() {
            return Err(Error::parse(&m.data.stations, "no stations"));
        }
        let mut records = BTreeMap::new();
        let mut reanalysis = BTreeMap::new();
        let mut forecasts = BTreeMap::new();
        for (id, row) in &table.rows {
            let qp = discharge_path(m, id);
            require(&qp)?;
            let raw = read_series_csv(&qp)?;
            let q = match m.discharge_units {
                DischargeUnits::CubicMetresPerSecond => series_to_specific_discharge(&raw, row.area_km2)?,
                DischargeUnits::MillimetresPerDay => raw,
            };
            let rec = StationRecord::new(id.clone(), row.area_km2, q, row.attrs.clone(), row.utc_offset_hours)?;
            records.insert(id.clone(), rec);
            let rp = reanalysis_path(m, id);
            require(&rp)?;
            reanalysis.insert(id.clone(), read_forcing_csv(&rp, ForcingSource::Reanalysis, 0)?);
            for &lt in &m.lead_times {
                let fp = forecast_path(m, id, lt);
                require(&fp)?;
                forecasts.insert((id.clone(), lt), read_forcing_csv(&fp, ForcingSource::ForecastControl, lt)?);
            }
        }
        let geometries = match &m.data.geometries {
            Some(p) => read_geojson(p)?,
            None => Vec::new(),
        };
        Ok(Self { attr_names: table.attr_names, records, reanalysis, forecasts, geometries })
    }

    pub fn forecast(&self, id: &str, lead_time: u32) -> Result<&ForcingSeries> {
        self.forecasts
            .get(&(id.to_string(), lead_time))
            .ok_or_else(|| Error::domain(format!("no lead-time {lead_time} forecast for station {id}")))
    }

    pub fn reanalysis(&self, id: &str) -> Result<&ForcingSeries> {
        self.reanalysis.get(id).ok_or_else(|| Error::domain(format!("no reanalysis forcing for station {id}")))
    }

    pub fn record(&self, id: &str) -> Result<&StationRecord> {
        self.records.get(id).ok_or_else(|| Error::domain(format!("unknown station {id}")))
    }
}
