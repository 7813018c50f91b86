//! Batch pipeline: curation, scaler fit, two-stage training, prediction,
//! evaluation, event verification, benchmarking and reports, with
//! content-addressed stage caching.

mod cache;
mod inputs;
mod manifest;
mod report;
mod stages;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

pub use cache::{hash_bytes, hash_file, list_files, KeyBuilder, Stamp, STAMP_FILE};
pub use inputs::{discharge_path, forecast_path, reanalysis_path, Inputs};
pub use manifest::{DataPaths, DischargeUnits, EvaluationOptions, HindcastSource, Period, Periods, RunManifest};
pub use report::{read_column, write_ecdf, write_rows};
pub use synthetic::{default_network, synthetic_manifest, synthetic_periods, write_synthetic_dataset, SyntheticDataset};

use crate::error::{Error, Result};

/// Bump when stage semantics change so old caches are not reused.
const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Curate,
    Scaler,
    Pretrain,
    Finetune,
    Predict,
    Evaluate,
    ForcingShift,
    ReferenceSim,
    Thresholds,
    VerifyEvents,
    Benchmark,
    Report,
}

impl Stage {
    /// Topological order.
    pub const ALL: [Stage; 12] = [
        Stage::Curate,
        Stage::Scaler,
        Stage::Pretrain,
        Stage::Finetune,
        Stage::Predict,
        Stage::Evaluate,
        Stage::ForcingShift,
        Stage::ReferenceSim,
        Stage::Thresholds,
        Stage::VerifyEvents,
        Stage::Benchmark,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Curate => "curate",
            Stage::Scaler => "scaler",
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::ForcingShift => "forcing_shift",
            Stage::ReferenceSim => "reference_sim",
            Stage::Thresholds => "thresholds",
            Stage::VerifyEvents => "verify_events",
            Stage::Benchmark => "benchmark",
            Stage::Report => "report",
        }
    }

    pub fn deps(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Curate => &[],
            Scaler => &[Curate],
            Pretrain => &[Scaler],
            Finetune => &[Pretrain],
            Predict => &[Pretrain, Finetune],
            Evaluate => &[Curate, Predict],
            ForcingShift => &[Curate],
            ReferenceSim => &[Pretrain],
            Thresholds => &[Curate, ReferenceSim],
            VerifyEvents => &[Predict, Thresholds],
            Benchmark => &[Evaluate],
            Report => &[Curate, Pretrain, Finetune, Evaluate, ForcingShift, Thresholds, VerifyEvents, Benchmark],
        }
    }

    /// `targets` plus everything they depend on, in execution order.
    pub fn closure(targets: &[Stage]) -> Vec<Stage> {
        let mut need = std::collections::BTreeSet::new();
        let mut stack: Vec<Stage> = targets.to_vec();
        while let Some(s) = stack.pop() {
            if need.insert(s) {
                stack.extend_from_slice(s.deps());
            }
        }
        Stage::ALL.into_iter().filter(|s| need.contains(s)).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::domain(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunOutcome {
    pub stages: Vec<StageRecord>,
    /// Optimizer updates performed by this invocation (zero on a full cache hit).
    pub training_updates: u64,
}

impl RunOutcome {
    pub fn status(&self, stage: Stage) -> Option<StageStatus> {
        self.stages.iter().find(|r| r.stage == stage).map(|r| r.status)
    }
}

/// Shared state of one pipeline invocation.
pub struct Context<'a> {
    pub manifest: &'a RunManifest,
    pub inputs: &'a Inputs,
    pub out_dir: &'a Path,
}

impl Context<'_> {
    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out_dir.join(stage.name())
    }
}

fn input_hashes(m: &RunManifest, inputs: &Inputs) -> Result<BTreeMap<String, String>> {
    let mut h = BTreeMap::new();
    h.insert("stations".to_string(), hash_file(&m.data.stations)?);
    if let Some(g) = &m.data.geometries {
        h.insert("geometries".to_string(), hash_file(g)?);
    }
    for id in inputs.records.keys() {
        h.insert(format!("discharge/{id}"), hash_file(&discharge_path(m, id))?);
        h.insert(format!("reanalysis/{id}"), hash_file(&reanalysis_path(m, id))?);
        for &lt in &m.lead_times {
            h.insert(format!("forecast/{id}/lt{lt}"), hash_file(&forecast_path(m, id, lt))?);
        }
    }
    Ok(h)
}

fn stage_key(stage: Stage, m: &RunManifest, files: &BTreeMap<String, String>, keys: &BTreeMap<Stage, String>) -> Result<String> {
    use serde_json::json;
    let p = &m.periods;
    let e = &m.evaluation;
    let cfg = match stage {
        Stage::Curate => json!({ "dedup": m.dedup, "qc": m.qc, "units": m.discharge_units }),
        Stage::Scaler => json!({ "pretrain": p.pretrain, "validation_basins": m.validation_basins }),
        Stage::Pretrain => json!({ "model": m.model, "train": m.pretrain, "seed": m.seed, "pretrain": p.pretrain, "validation": p.validation }),
        Stage::Finetune => json!({ "train": m.finetune, "seed": m.seed, "finetune": p.finetune, "validation": p.validation }),
        Stage::Predict => json!({ "lead_times": m.lead_times, "hindcast": m.hindcast_source, "test": p.test }),
        Stage::Evaluate => json!({ "test": p.test }),
        Stage::ForcingShift => json!({ "lead_times": m.lead_times, "test": p.test }),
        Stage::ReferenceSim => json!({}),
        Stage::Thresholds => json!({ "thresholds": e.thresholds, "periods": e.return_periods }),
        Stage::VerifyEvents => json!({ "periods": e.return_periods, "margin": e.event_margin_days }),
        Stage::Benchmark => json!({ "metric": e.benchmark_metric }),
        Stage::Report => json!({ "evaluation": e, "seed": m.seed }),
    };
    let mut kb = KeyBuilder::new(stage.name()).config("version", &PIPELINE_VERSION)?.config("stage", &cfg)?;
    let prefixes: &[&str] = match stage {
        Stage::Curate => &["stations", "geometries", "discharge/"],
        Stage::Scaler | Stage::Pretrain | Stage::ReferenceSim => &["reanalysis/"],
        Stage::Finetune | Stage::ForcingShift => &["reanalysis/", "forecast/"],
        Stage::Predict => &["reanalysis/", "forecast/"],
        _ => &[],
    };
    for (label, hash) in files {
        if prefixes.iter().any(|p| label == p || (p.ends_with('/') && label.starts_with(p))) {
            kb = kb.config(&format!("file:{label}"), hash)?;
        }
    }
    for d in stage.deps() {
        kb = kb.upstream(&keys[d]);
    }
    Ok(kb.finish())
}

/// Runs `targets` and their dependencies. Completed stages whose key is
/// unchanged are skipped.
pub fn run_stages(manifest: &RunManifest, out_dir: &Path, targets: &[Stage]) -> Result<RunOutcome> {
    manifest.validate()?;
    let inputs = Inputs::load(manifest)?;
    let files = input_hashes(manifest, &inputs)?;
    let ctx = Context { manifest, inputs: &inputs, out_dir };
    let mut keys = BTreeMap::new();
    let mut outcome = RunOutcome::default();
    for stage in Stage::closure(targets) {
        let key = stage_key(stage, manifest, &files, &keys)?;
        let dir = ctx.stage_dir(stage);
        let status = match Stamp::read(&dir) {
            Some(s) if s.is_valid(&dir, &key) => {
                info!("{stage}: cached");
                StageStatus::Cached
            }
            _ => {
                info!("{stage}: running");
                if dir.exists() {
                    std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                }
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let updates = stages::run(stage, &ctx, &dir).map_err(|e| stage_error(stage, &dir, e))?;
                outcome.training_updates += updates;
                Stamp::write(&dir, stage.name(), &key)?;
                StageStatus::Ran
            }
        };
        outcome.stages.push(StageRecord { stage, status, key: key.clone() });
        keys.insert(stage, key);
    }
    Ok(outcome)
}

fn stage_error(stage: Stage, dir: &Path, e: Error) -> Error {
    if let Error::Diverged { last_finite, .. } = &e {
        let path = dir.join("last_finite_checkpoint.json");
        if let Err(w) = crate::nn::save_checkpoint(&path, &last_finite.0) {
            log::error!("could not save last finite checkpoint: {w}");
        }
    }
    Error::Stage { stage: stage.name().to_string(), reason: e.to_string() }
}

/// Full pipeline.
pub fn run_pipeline(manifest: &RunManifest, out_dir: &Path) -> Result<RunOutcome> {
    run_stages(manifest, out_dir, &[Stage::Report])
}

/// Report files every complete run produces, relative to the output directory.
pub fn declared_reports(m: &RunManifest) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = [
        "curate/retained.csv",
        "curate/pairs.csv",
        "curate/removal_log.csv",
        "curate/qc_rejections.csv",
        "curate/summary.json",
        "scaler/scaler.json",
        "scaler/validation_subset.csv",
        "pretrain/checkpoint.json",
        "pretrain/training.json",
        "finetune/checkpoint.json",
        "finetune/training.json",
        "evaluate/summary.json",
        "thresholds/observed.csv",
        "thresholds/simulated.csv",
        "thresholds/unfitted.csv",
        "benchmark/rows.csv",
        "benchmark/summary.json",
        "report/run_summary.json",
    ]
    .into_iter()
    .map(PathBuf::from)
    .collect();
    for &lt in &m.lead_times {
        out.push(format!("forcing_shift/w1_lt{lt}.csv").into());
        for model in stages::MODELS {
            out.push(format!("evaluate/{model}_lt{lt}.csv").into());
            out.push(format!("verify_events/{model}_lt{lt}_stations.csv").into());
            out.push(format!("verify_events/{model}_lt{lt}_totals.csv").into());
            if m.evaluation.ecdf_tables {
                out.push(format!("report/ecdf_{model}_lt{lt}_kge_prime.csv").into());
            }
        }
    }
    out
}
