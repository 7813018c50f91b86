use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::curation::{DedupConfig, QcConfig};
use crate::error::{Error, Result};
use crate::extremes::{ThresholdConfig, STANDARD_RETURN_PERIODS};
use crate::nn::{ModelConfig, TrainConfig};

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn years(y0: i32, y1: i32) -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(y0, 1, 1).expect("valid year"),
            end: NaiveDate::from_ymd_opt(y1, 12, 31).expect("valid year"),
        }
    }

    pub fn overlaps(&self, other: &Period) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periods {
    pub pretrain: Period,
    pub finetune: Period,
    pub validation: Period,
    pub test: Period,
}

impl Default for Periods {
    fn default() -> Self {
        Self {
            pretrain: Period::years(1980, 2019),
            finetune: Period::years(2016, 2019),
            validation: Period::years(2020, 2020),
            test: Period::years(2021, 2024),
        }
    }
}

/// Input file locations. Relative paths resolve against the manifest's directory.
///
/// * `stations`: CSV with `station_id`, `area_km2`, `utc_offset_hours` and
///   any number of numeric attribute columns.
/// * `discharge_dir/<id>.csv`: `date,value` observed discharge.
/// * `reanalysis_dir/<id>.csv`: `date,ssr,str,sp,t2m,tp`.
/// * `forecast_dir/<id>_lt<L>.csv`: same columns, valid dates, lead time L.
/// * `geometries`: GeoJSON polygons with a `station_id` property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPaths {
    pub stations: PathBuf,
    pub discharge_dir: PathBuf,
    pub reanalysis_dir: PathBuf,
    pub forecast_dir: PathBuf,
    pub geometries: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DischargeUnits {
    /// m^3/s, converted with the station area.
    CubicMetresPerSecond,
    /// Already specific discharge, mm/d.
    MillimetresPerDay,
}

/// Forcing used for the hindcast part of forecast-mode windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HindcastSource {
    Reanalysis,
    ForecastLt1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationOptions {
    pub return_periods: Vec<f64>,
    pub event_margin_days: u32,
    pub thresholds: ThresholdConfig,
    /// Metric compared by the benchmark stage (higher is better).
    pub benchmark_metric: String,
    /// Write ECDF tables of every skill metric.
    pub ecdf_tables: bool,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            return_periods: STANDARD_RETURN_PERIODS.to_vec(),
            event_margin_days: 0,
            thresholds: ThresholdConfig::default(),
            benchmark_metric: "kge_prime".into(),
            ecdf_tables: true,
        }
    }
}

fn default_lead_times() -> Vec<u32> {
    vec![1]
}
fn default_validation_basins() -> usize {
    1000
}
fn default_units() -> DischargeUnits {
    DischargeUnits::CubicMetresPerSecond
}
fn default_hindcast() -> HindcastSource {
    HindcastSource::ForecastLt1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub data: DataPaths,
    #[serde(default)]
    pub periods: Periods,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_units")]
    pub discharge_units: DischargeUnits,
    #[serde(default = "default_lead_times")]
    pub lead_times: Vec<u32>,
    #[serde(default = "default_hindcast")]
    pub hindcast_source: HindcastSource,
    /// Size of the basin subset scored during validation.
    #[serde(default = "default_validation_basins")]
    pub validation_basins: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "TrainConfig::pretrain")]
    pub pretrain: TrainConfig,
    #[serde(default = "TrainConfig::finetune")]
    pub finetune: TrainConfig,
    #[serde(default)]
    pub dedup: DedupConfig,
    #[serde(default)]
    pub qc: QcConfig,
    #[serde(default)]
    pub evaluation: EvaluationOptions,
}

impl RunManifest {
    /// Reads a TOML or JSON manifest (by extension) and resolves relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: RunManifest = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?,
            _ => toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.stations);
        fix(&mut self.data.discharge_dir);
        fix(&mut self.data.reanalysis_dir);
        fix(&mut self.data.forecast_dir);
        if let Some(g) = &mut self.data.geometries {
            fix(g);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.periods;
        for (name, q) in [("pretrain", p.pretrain), ("finetune", p.finetune), ("validation", p.validation), ("test", p.test)] {
            if q.start > q.end {
                return Err(Error::domain(format!("{name} period starts after it ends")));
            }
        }
        if p.finetune.start < p.pretrain.start || p.validation.start <= p.finetune.start || p.test.start <= p.validation.start {
            return Err(Error::domain("periods must be ordered pretrain <= finetune < validation < test"));
        }
        if p.test.overlaps(&p.pretrain) || p.test.overlaps(&p.finetune) {
            return Err(Error::domain("test period overlaps a training period"));
        }
        if self.lead_times.is_empty() || self.lead_times.contains(&0) {
            return Err(Error::domain("lead times must be non-empty and start at 1"));
        }
        if self.validation_basins == 0 {
            return Err(Error::domain("validation subset must not be empty"));
        }
        self.model.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        if self.evaluation.return_periods.iter().any(|t| !(*t > 1.0)) {
            return Err(Error::domain("return periods must exceed one year"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::domain(format!("manifest serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
[data]
stations = "stations.csv"
discharge_dir = "q"
reanalysis_dir = "era"
forecast_dir = "ifs"
"#
    }

    #[test]
    fn defaults_and_resolution() {
        let mut m: RunManifest = toml::from_str(minimal()).unwrap();
        m.resolve(Path::new("/data"));
        assert_eq!(m.data.stations, PathBuf::from("/data/stations.csv"));
        assert_eq!(m.periods.test, Period::years(2021, 2024));
        assert_eq!(m.pretrain.lr_init, 4e-4);
        assert_eq!(m.finetune.epochs, 30);
        assert_eq!(m.hindcast_source, HindcastSource::ForecastLt1);
        m.validate().unwrap();
        let back: RunManifest = toml::from_str(&m.to_toml().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn overlapping_test_period_rejected() {
        let mut m: RunManifest = toml::from_str(minimal()).unwrap();
        m.periods.test = Period::years(2019, 2024);
        assert!(m.validate().is_err());
    }
}
