//! Writes a generated network to disk in the pipeline's input layout.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::manifest::{DataPaths, DischargeUnits, EvaluationOptions, HindcastSource, Period, Periods, RunManifest};
use super::{discharge_path, forecast_path, reanalysis_path};
use crate::curation::{to_geojson, DedupConfig, QcConfig};
use crate::error::Result;
use crate::hydrodata::io::{write_forcing_csv, write_json, write_series_csv, write_static_csv, write_text, StaticRow, StaticTable};
use crate::nn::{ModelConfig, TrainConfig};
use crate::synth::{derive_forecast, generate_network, NetworkSpec, SYNTH_STATIC_NAMES};

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub station_ids: Vec<String>,
}

/// Periods fitting a record that starts in 2009 and ends in 2024.
pub fn synthetic_periods() -> Periods {
    Periods {
        pretrain: Period::years(2009, 2019),
        finetune: Period::years(2016, 2019),
        validation: Period::years(2020, 2020),
        test: Period::years(2021, 2024),
    }
}

/// Desk-scale manifest for a synthetic dataset rooted at `root`.
pub fn synthetic_manifest(root: &Path, n_basins: usize, lead_times: &[u32], seed: u64) -> RunManifest {
    let mut model = ModelConfig::desk_scale(SYNTH_STATIC_NAMES.len() + 1);
    model.hidden_size = 24;
    model.embed_layers = [16, 16, 16];
    let pretrain = TrainConfig {
        lr_init: 3e-3,
        epochs: 12,
        warmup_epochs: 1,
        updates_per_epoch: 60,
        batch_size: 16,
        validation_every: 2,
        max_validation_samples: 256,
        ..TrainConfig::pretrain()
    };
    let finetune = TrainConfig {
        lr_init: 1e-3,
        epochs: 6,
        warmup_epochs: 1,
        updates_per_epoch: 30,
        ..pretrain.clone()
    };
    RunManifest {
        data: DataPaths {
            stations: root.join("stations.csv"),
            discharge_dir: root.join("discharge"),
            reanalysis_dir: root.join("reanalysis"),
            forecast_dir: root.join("forecast"),
            geometries: Some(root.join("geometries.geojson")),
        },
        periods: synthetic_periods(),
        seed,
        discharge_units: DischargeUnits::CubicMetresPerSecond,
        lead_times: lead_times.to_vec(),
        hindcast_source: HindcastSource::ForecastLt1,
        validation_basins: n_basins.max(1),
        model,
        pretrain,
        finetune,
        dedup: DedupConfig::default(),
        qc: QcConfig::default(),
        evaluation: EvaluationOptions::default(),
    }
}

/// Generates a network from `spec` and writes stations, discharge (m^3/s),
/// reanalysis and forecast forcing, geometries and a `manifest.toml` under `dir`.
pub fn write_synthetic_dataset(dir: &Path, spec: &NetworkSpec, lead_times: &[u32], seed: u64) -> Result<SyntheticDataset> {
    let net = generate_network(spec, seed)?;
    let manifest = synthetic_manifest(dir, net.basins.len(), lead_times, seed);
    let mut table = StaticTable {
        attr_names: SYNTH_STATIC_NAMES.iter().map(|s| s.to_string()).collect(),
        ..StaticTable::default()
    };
    for (i, b) in net.basins.iter().enumerate() {
        let r = &b.record;
        table.rows.insert(
            r.station_id.clone(),
            StaticRow { area_km2: r.area_km2, utc_offset_hours: r.utc_offset_hours, attrs: r.static_attrs.clone() },
        );
        let q = r.discharge.map(|v| v * r.area_km2 / 86.4)?;
        write_series_csv(&discharge_path(&manifest, &r.station_id), &q)?;
        write_forcing_csv(&reanalysis_path(&manifest, &r.station_id), &b.reanalysis)?;
        for &lt in lead_times {
            let f = if lt == 1 {
                b.forecast.clone()
            } else {
                derive_forecast(&b.reanalysis, &net.specs[i].shift, lt, seed.wrapping_add(i as u64))?
            };
            write_forcing_csv(&forecast_path(&manifest, &r.station_id, lt), &f)?;
        }
    }
    write_static_csv(&manifest.data.stations, &table)?;
    write_json(dir.join("geometries.geojson").as_path(), &to_geojson(&net.geometries))?;

    // The written manifest uses paths relative to its own directory.
    let mut portable = manifest.clone();
    portable.data = DataPaths {
        stations: "stations.csv".into(),
        discharge_dir: "discharge".into(),
        reanalysis_dir: "reanalysis".into(),
        forecast_dir: "forecast".into(),
        geometries: Some("geometries.geojson".into()),
    };
    let manifest_path = dir.join("manifest.toml");
    write_text(&manifest_path, &portable.to_toml()?)?;
    Ok(SyntheticDataset {
        root: dir.to_path_buf(),
        manifest_path,
        manifest,
        station_ids: table.rows.keys().cloned().collect(),
    })
}

/// Network settings matching [`synthetic_periods`].
pub fn default_network(n_basins: usize) -> NetworkSpec {
    let start = NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date");
    let end = NaiveDate::from_ymd_opt(2024, 12, 31).expect("valid date");
    NetworkSpec {
        n_basins,
        n_days: (end - start).num_days() as usize + 1,
        start,
        shift: Default::default(),
        snow_fraction: 0.3,
        with_defects: true,
    }
}
