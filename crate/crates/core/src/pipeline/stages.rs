use std::collections::BTreeMap;
use std::path::Path;

use chrono::Days;
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use super::manifest::{HindcastSource, Period};
use super::report::{opt, read_column, write_ecdf, write_rows};
use super::{Context, Stage};
use crate::benchmark::{benchmark_compare, read_skill_csv, write_benchmark_csv, write_skill_csv, StationSkill};
use crate::curation::{evaluate_pairs, qc_filter, resolve_duplicates};
use crate::error::{Error, Result};
use crate::extremes::{aggregate_tallies, dual_threshold_verify, fit_thresholds, GumbelThresholds, ThresholdSource, Unfitted};
use crate::hydrodata::io::{read_json, read_series_csv, write_json, write_series_csv};
use crate::hydrodata::{align, fit_scaler, static_input_names, DailySeries, ForcingSeries, ScalerStats, StationRecord, Variable};
use crate::metrics::{normalized_w1, SkillReport, Summary, WetDayMode};
use crate::nn::{
    finetune, load_checkpoint, predict_series, pretrain, save_checkpoint, BasinData, Dataset, ModelState, N_DYNAMIC,
};

pub const MODELS: [&str; 2] = ["pretrained", "finetuned"];

/// Executes one stage, writing into `dir`. Returns the number of optimizer updates.
pub fn run(stage: Stage, ctx: &Context<'_>, dir: &Path) -> Result<u64> {
    match stage {
        Stage::Curate => curate(ctx, dir).map(|_| 0),
        Stage::Scaler => scaler(ctx, dir).map(|_| 0),
        Stage::Pretrain => train_pretrain(ctx, dir),
        Stage::Finetune => train_finetune(ctx, dir),
        Stage::Predict => predict(ctx, dir).map(|_| 0),
        Stage::Evaluate => evaluate(ctx, dir).map(|_| 0),
        Stage::ForcingShift => forcing_shift(ctx, dir).map(|_| 0),
        Stage::ReferenceSim => reference_sim(ctx, dir).map(|_| 0),
        Stage::Thresholds => thresholds(ctx, dir).map(|_| 0),
        Stage::VerifyEvents => verify_events(ctx, dir).map(|_| 0),
        Stage::Benchmark => benchmark(ctx, dir).map(|_| 0),
        Stage::Report => report(ctx, dir).map(|_| 0),
    }
}

fn retained(ctx: &Context<'_>) -> Result<Vec<String>> {
    read_column(&ctx.stage_dir(Stage::Curate).join("retained.csv"), "station_id")
}

fn checkpoint(ctx: &Context<'_>, model: &str) -> Result<ModelState> {
    let stage = if model == "pretrained" { Stage::Pretrain } else { Stage::Finetune };
    load_checkpoint(&ctx.stage_dir(stage).join("checkpoint.json"))
}

fn curate(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let inputs = ctx.inputs;
    let m = ctx.manifest;
    let discharge: BTreeMap<String, DailySeries> =
        inputs.records.iter().map(|(id, r)| (id.clone(), r.discharge.clone())).collect();
    let verdicts = evaluate_pairs(&inputs.geometries, &discharge, &m.dedup)?;
    let records: Vec<StationRecord> = inputs.records.values().cloned().collect();
    let resolution = resolve_duplicates(&verdicts, &records, &m.dedup);
    let after_dedup: Vec<&StationRecord> = records.iter().filter(|r| resolution.retained.contains(&r.station_id)).collect();
    let qc = qc_filter(after_dedup.iter().copied(), &m.qc);

    write_rows(
        &dir.join("pairs.csv"),
        &["id_a", "id_b", "overlap_fraction", "kge", "verdict"],
        verdicts.iter().map(|v| {
            [v.id_a.clone(), v.id_b.clone(), v.overlap_fraction.to_string(), opt(v.kge), v.verdict.as_str().to_string()]
        }),
    )?;
    write_rows(
        &dir.join("removal_log.csv"),
        &["station_id", "reason", "related"],
        resolution.log.iter().map(|e| [e.station_id.clone(), e.reason.as_str().to_string(), e.related.clone()]),
    )?;
    write_rows(
        &dir.join("qc_rejections.csv"),
        &["station_id", "reason", "value"],
        qc.rejected
            .iter()
            .flat_map(|r| r.reasons.iter().map(move |q| [r.station_id.clone(), q.code().to_string(), opt(q.value())])),
    )?;
    write_rows(&dir.join("retained.csv"), &["station_id"], qc.retained.iter().map(|id| [id.clone()]))?;
    let summary = json!({
        "n_input": records.len(),
        "n_pairs": verdicts.len(),
        "n_after_dedup": after_dedup.len(),
        "n_qc_rejected": qc.rejected.len(),
        "n_retained": qc.retained.len(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    info!("curate: {} of {} stations retained", qc.retained.len(), records.len());
    if qc.retained.is_empty() {
        return Err(Error::domain("no station survived curation"));
    }
    Ok(())
}

fn scaler(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let ids = retained(ctx)?;
    let p = ctx.manifest.periods.pretrain;
    let records: Vec<StationRecord> = ids.iter().map(|id| ctx.inputs.record(id).cloned()).collect::<Result<_>>()?;
    let forcings: Vec<&ForcingSeries> = ids.iter().map(|id| ctx.inputs.reanalysis(id)).collect::<Result<_>>()?;
    let names = static_input_names(&ctx.inputs.attr_names);
    let stats = fit_scaler(&records, &forcings, (p.start, p.end), &names)?;
    write_json(&dir.join("scaler.json"), &stats)?;
    // Ids are already sorted; the subset is the first N.
    let subset: Vec<&String> = ids.iter().filter(|id| stats.basin_sigma.contains_key(*id)).take(ctx.manifest.validation_basins).collect();
    write_rows(&dir.join("validation_subset.csv"), &["station_id"], subset.iter().map(|id| [id.to_string()]))?;
    Ok(())
}

fn lead_in(ctx: &Context<'_>) -> usize {
    let c = &ctx.manifest.model;
    c.window - c.horizon
}

/// Model-ready data over `period`, optionally with `lead_in` days of input
/// history before it. Stations without a fitted sigma are skipped.
fn build_dataset<'f>(
    ctx: &Context<'_>,
    ids: &[String],
    scaler: &ScalerStats,
    forcing: impl Fn(&str) -> Result<&'f ForcingSeries>,
    period: Period,
    with_lead_in: bool,
) -> Result<Dataset> {
    let c = &ctx.manifest.model;
    let li = if with_lead_in { lead_in(ctx) } else { 0 };
    let from = period.start - Days::new(li as u64);
    let mut basins = Vec::new();
    for id in ids {
        if scaler.basin_sigma.get(id).is_none() {
            warn!("station {id}: no observations in the scaler period, skipped");
            continue;
        }
        basins.push(BasinData::build(ctx.inputs.record(id)?, forcing(id)?, scaler, from, period.end)?);
    }
    Ok(Dataset::with_lead_in(basins, c.window, c.horizon, li))
}

fn model_config(ctx: &Context<'_>) -> crate::nn::ModelConfig {
    let mut c = ctx.manifest.model.clone();
    c.n_dynamic = N_DYNAMIC;
    c.n_static = ctx.inputs.attr_names.len() + 1;
    c
}

fn train_pretrain(ctx: &Context<'_>, dir: &Path) -> Result<u64> {
    let m = ctx.manifest;
    let ids = retained(ctx)?;
    let scaler: ScalerStats = read_json(&ctx.stage_dir(Stage::Scaler).join("scaler.json"))?;
    let subset = read_column(&ctx.stage_dir(Stage::Scaler).join("validation_subset.csv"), "station_id")?;
    let inputs = ctx.inputs;
    let train = build_dataset(ctx, &ids, &scaler, |id| inputs.reanalysis(id), m.periods.pretrain, false)?;
    let val = build_dataset(ctx, &subset, &scaler, |id| inputs.reanalysis(id), m.periods.validation, true)?;
    let val = (!val.samples.is_empty()).then_some(&val);
    let (state, report) = pretrain(model_config(ctx), scaler, &train, val, &m.pretrain, m.seed)?;
    save_checkpoint(&dir.join("checkpoint.json"), &state)?;
    write_json(&dir.join("training.json"), &report)?;
    Ok(report.total_updates)
}

fn train_finetune(ctx: &Context<'_>, dir: &Path) -> Result<u64> {
    let m = ctx.manifest;
    let ids = retained(ctx)?;
    let pre = checkpoint(ctx, "pretrained")?;
    let subset = read_column(&ctx.stage_dir(Stage::Scaler).join("validation_subset.csv"), "station_id")?;
    let inputs = ctx.inputs;
    let train = build_dataset(ctx, &ids, &pre.scaler, |id| inputs.forecast(id, 1), m.periods.finetune, false)?;
    let val = build_dataset(ctx, &subset, &pre.scaler, |id| inputs.forecast(id, 1), m.periods.validation, true)?;
    let val = (!val.samples.is_empty()).then_some(&val);
    let before = pre.scaler.checksum();
    let (state, report) = finetune(&pre, &train, val, &m.finetune, m.seed.wrapping_add(1))?;
    if state.scaler.checksum() != before {
        return Err(Error::domain("fine-tuning modified the scaler"));
    }
    save_checkpoint(&dir.join("checkpoint.json"), &state)?;
    write_json(&dir.join("training.json"), &report)?;
    Ok(report.total_updates)
}

/// De-normalized predictions over `period` for one station.
fn predict_station(
    ctx: &Context<'_>,
    state: &ModelState,
    id: &str,
    hindcast: &ForcingSeries,
    forecast: &ForcingSeries,
    period: Period,
) -> Result<DailySeries> {
    let from = period.start - Days::new(lead_in(ctx) as u64);
    let rec = ctx.inputs.record(id)?;
    let h = BasinData::build(rec, hindcast, &state.scaler, from, period.end)?;
    let f = BasinData::build(rec, forecast, &state.scaler, from, period.end)?;
    Ok(predict_series(state, &h, &f)?.slice(period.start, period.end))
}

fn predict(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let m = ctx.manifest;
    let ids = predictable(ctx)?;
    for model in MODELS {
        let state = checkpoint(ctx, model)?;
        for &lt in &m.lead_times {
            let out = dir.join(model).join(format!("lt{lt}"));
            ids.par_iter()
                .map(|id| {
                    let hind = match m.hindcast_source {
                        HindcastSource::Reanalysis => ctx.inputs.reanalysis(id)?,
                        HindcastSource::ForecastLt1 => ctx.inputs.forecast(id, 1)?,
                    };
                    let s = predict_station(ctx, &state, id, hind, ctx.inputs.forecast(id, lt)?, m.periods.test)?;
                    write_series_csv(&out.join(format!("{id}.csv")), &s)
                })
                .collect::<Result<Vec<()>>>()?;
        }
    }
    Ok(())
}

/// Retained stations the scaler has a discharge sigma for; the others had no
/// observations in the fitting period.
fn predictable(ctx: &Context<'_>) -> Result<Vec<String>> {
    let scaler: ScalerStats = read_json(&ctx.stage_dir(Stage::Scaler).join("scaler.json"))?;
    Ok(retained(ctx)?.into_iter().filter(|id| scaler.basin_sigma.contains_key(id)).collect())
}

fn prediction(ctx: &Context<'_>, model: &str, lt: u32, id: &str) -> Result<Option<DailySeries>> {
    let p = ctx.stage_dir(Stage::Predict).join(model).join(format!("lt{lt}")).join(format!("{id}.csv"));
    p.exists().then(|| read_series_csv(&p)).transpose()
}

fn evaluate(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let m = ctx.manifest;
    let ids = retained(ctx)?;
    let test = m.periods.test;
    let mut summary = BTreeMap::new();
    for model in MODELS {
        for &lt in &m.lead_times {
            let rows: Vec<StationSkill> = ids
                .iter()
                .map(|id| {
                    let rec = ctx.inputs.record(id)?;
                    let skill = match prediction(ctx, model, lt, id)? {
                        Some(pred) => {
                            let al = align(&rec.discharge.slice(test.start, test.end), &pred);
                            SkillReport::compute(&al.a, &al.b)
                        }
                        None => SkillReport::default(),
                    };
                    Ok(StationSkill { station_id: id.clone(), area_km2: rec.area_km2, skill })
                })
                .collect::<Result<_>>()?;
            write_skill_csv(&dir.join(format!("{model}_lt{lt}.csv")), &rows)?;
            let per_metric: BTreeMap<&str, Summary> = SkillReport::METRICS
                .iter()
                .map(|&k| (k, Summary::of(&rows.iter().map(|r| r.skill.get(k)).collect::<Vec<_>>())))
                .collect();
            summary.insert(format!("{model}_lt{lt}"), per_metric);
        }
    }
    write_json(&dir.join("summary.json"), &summary)
}

fn forcing_shift(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let m = ctx.manifest;
    let ids = retained(ctx)?;
    let test = m.periods.test;
    let mut summary = BTreeMap::new();
    for &lt in &m.lead_times {
        let mut rows = Vec::new();
        let mut normalized = Vec::new();
        for id in &ids {
            let r = ctx.inputs.reanalysis(id)?.get(Variable::Tp).slice(test.start, test.end);
            let f = ctx.inputs.forecast(id, lt)?.get(Variable::Tp).slice(test.start, test.end);
            let w = normalized_w1(&r, &f, WetDayMode::Independent)?;
            normalized.push(w.w1_normalized);
            rows.push([
                id.clone(),
                opt(w.w1_raw),
                opt(w.w1_normalized),
                w.wet_day_counts.0.to_string(),
                w.wet_day_counts.1.to_string(),
                opt(w.reference_mean),
            ]);
        }
        write_rows(
            &dir.join(format!("w1_lt{lt}.csv")),
            &["station_id", "w1_raw", "w1_normalized", "wet_days_reference", "wet_days_forecast", "reference_wet_mean"],
            rows,
        )?;
        summary.insert(format!("lt{lt}"), Summary::of(&normalized));
    }
    write_json(&dir.join("summary.json"), &summary)
}

/// Long reanalysis-driven simulation of the pretrained model, the reference
/// for simulated-space flood thresholds.
fn reference_sim(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let ids = predictable(ctx)?;
    let state = checkpoint(ctx, "pretrained")?;
    let lead = lead_in(ctx) as u64;
    ids.par_iter()
        .map(|id| {
            let f = ctx.inputs.reanalysis(id)?;
            let Some(end) = f.get(Variable::Tp).end() else {
                return Ok(());
            };
            let start = f.start() + Days::new(lead);
            if start > end {
                return Ok(());
            }
            let s = predict_station(ctx, &state, id, f, f, Period::new(start, end))?;
            write_series_csv(&dir.join(format!("{id}.csv")), &s)
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}

const THRESHOLD_HEADER: [&str; 4] = ["station_id", "xi", "alpha", "n_annual_maxima"];

fn write_thresholds(path: &Path, periods: &[f64], rows: &[(String, GumbelThresholds)]) -> Result<()> {
    let mut header: Vec<String> = THRESHOLD_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(periods.iter().map(|t| format!("T{t}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        rows.iter().map(|(id, g)| {
            let mut r = vec![id.clone(), g.xi.to_string(), g.alpha.to_string(), g.n_annual_maxima.to_string()];
            r.extend(g.levels.iter().map(|l| l.level.to_string()));
            r
        }),
    )
}

fn read_thresholds(path: &Path, periods: &[f64], source: ThresholdSource) -> Result<BTreeMap<String, GumbelThresholds>> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| Error::parse(path, e.to_string()));
        let n = rec[3].parse::<usize>().map_err(|e| Error::parse(path, e.to_string()))?;
        out.insert(rec[0].to_string(), GumbelThresholds::from_params(num(1)?, num(2)?, periods, source, n)?);
    }
    Ok(out)
}

fn thresholds(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let e = &ctx.manifest.evaluation;
    let ids = retained(ctx)?;
    let sim_dir = ctx.stage_dir(Stage::ReferenceSim);
    let mut obs_rows = Vec::new();
    let mut sim_rows = Vec::new();
    let mut unfitted = Vec::new();
    let mut record = |id: &str, source: &str, r: std::result::Result<GumbelThresholds, Unfitted>, rows: &mut Vec<(String, GumbelThresholds)>| match r {
        Ok(g) => rows.push((id.to_string(), g)),
        Err(u) => unfitted.push([id.to_string(), source.to_string(), format!("{u:?}")]),
    };
    for id in &ids {
        let obs = &ctx.inputs.record(id)?.discharge;
        let fit = fit_thresholds(obs, &e.return_periods, ThresholdSource::ObservedReference, &e.thresholds);
        record(id, "observed", fit, &mut obs_rows);
        let sim_path = sim_dir.join(format!("{id}.csv"));
        let fit = if sim_path.exists() {
            fit_thresholds(&read_series_csv(&sim_path)?, &e.return_periods, ThresholdSource::SimulatedReference, &e.thresholds)
        } else {
            Err(Unfitted::TooFewMaxima(0))
        };
        record(id, "simulated", fit, &mut sim_rows);
    }
    write_thresholds(&dir.join("observed.csv"), &e.return_periods, &obs_rows)?;
    write_thresholds(&dir.join("simulated.csv"), &e.return_periods, &sim_rows)?;
    write_rows(&dir.join("unfitted.csv"), &["station_id", "source", "reason"], unfitted)
}

fn tally_row(id: &str, t: &crate::extremes::EventTally) -> Vec<String> {
    vec![
        id.to_string(),
        t.return_period.to_string(),
        t.hits.to_string(),
        t.misses.to_string(),
        t.false_alarms.to_string(),
        opt(t.precision()),
        opt(t.recall()),
    ]
}

const TALLY_HEADER: [&str; 7] = ["station_id", "return_period", "hits", "misses", "false_alarms", "precision", "recall"];

fn verify_events(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let m = ctx.manifest;
    let e = &m.evaluation;
    let ids = retained(ctx)?;
    let th_dir = ctx.stage_dir(Stage::Thresholds);
    let th_obs = read_thresholds(&th_dir.join("observed.csv"), &e.return_periods, ThresholdSource::ObservedReference)?;
    let th_sim = read_thresholds(&th_dir.join("simulated.csv"), &e.return_periods, ThresholdSource::SimulatedReference)?;
    let test = m.periods.test;
    for model in MODELS {
        for &lt in &m.lead_times {
            let mut per_station = Vec::new();
            let mut all = Vec::new();
            for id in &ids {
                let (Some(ts), Some(to)) = (th_sim.get(id), th_obs.get(id)) else {
                    continue;
                };
                let Some(pred) = prediction(ctx, model, lt, id)? else {
                    continue;
                };
                let obs = ctx.inputs.record(id)?.discharge.slice(test.start, test.end);
                let tallies = dual_threshold_verify(&pred, &obs, ts, to, &e.return_periods, e.event_margin_days)?;
                per_station.extend(tallies.iter().map(|t| tally_row(id, t)));
                all.extend(tallies);
            }
            write_rows(&dir.join(format!("{model}_lt{lt}_stations.csv")), &TALLY_HEADER, per_station)?;
            let totals = aggregate_tallies(&all);
            write_rows(
                &dir.join(format!("{model}_lt{lt}_totals.csv")),
                &TALLY_HEADER[1..],
                totals.iter().map(|t| tally_row("", t).split_off(1)),
            )?;
        }
    }
    Ok(())
}

fn benchmark(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let lt = ctx.manifest.lead_times[0];
    let eval = ctx.stage_dir(Stage::Evaluate);
    let a = read_skill_csv(&eval.join(format!("finetuned_lt{lt}.csv")))?;
    let b = read_skill_csv(&eval.join(format!("pretrained_lt{lt}.csv")))?;
    let r = benchmark_compare(&a, &b, &ctx.manifest.evaluation.benchmark_metric)?;
    write_benchmark_csv(&dir.join("rows.csv"), &r.rows)?;
    write_json(
        &dir.join("summary.json"),
        &json!({ "model_a": "finetuned", "model_b": "pretrained", "lead_time": lt, "summary": r.summary }),
    )
}

fn report(ctx: &Context<'_>, dir: &Path) -> Result<()> {
    let m = ctx.manifest;
    let eval = ctx.stage_dir(Stage::Evaluate);
    let mut medians = BTreeMap::new();
    for model in MODELS {
        for &lt in &m.lead_times {
            let rows = read_skill_csv(&eval.join(format!("{model}_lt{lt}.csv")))?;
            let mut per = BTreeMap::new();
            for k in SkillReport::METRICS {
                let vals: Vec<Option<f64>> = rows.iter().map(|r| r.skill.get(k)).collect();
                per.insert(k, Summary::of(&vals).median);
                if m.evaluation.ecdf_tables {
                    write_ecdf(&dir.join(format!("ecdf_{model}_lt{lt}_{k}.csv")), &vals)?;
                }
            }
            medians.insert(format!("{model}_lt{lt}"), per);
        }
    }
    let mut events = BTreeMap::new();
    let ve = ctx.stage_dir(Stage::VerifyEvents);
    for model in MODELS {
        for &lt in &m.lead_times {
            let path = ve.join(format!("{model}_lt{lt}_totals.csv"));
            let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::parse(&path, e.to_string()))?;
            let rows: Vec<BTreeMap<String, String>> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
            events.insert(format!("{model}_lt{lt}"), rows);
        }
    }
    let curate: serde_json::Value = read_json(&ctx.stage_dir(Stage::Curate).join("summary.json"))?;
    let bench: serde_json::Value = read_json(&ctx.stage_dir(Stage::Benchmark).join("summary.json"))?;
    let pre: serde_json::Value = read_json(&ctx.stage_dir(Stage::Pretrain).join("training.json"))?;
    let ft: serde_json::Value = read_json(&ctx.stage_dir(Stage::Finetune).join("training.json"))?;
    let summary = json!({
        "seed": m.seed,
        "periods": m.periods,
        "lead_times": m.lead_times,
        "curation": curate,
        "training": {
            "pretrain": { "updates": pre["total_updates"], "best_epoch": pre["best_epoch"], "best_val_loss": pre["best_val_loss"] },
            "finetune": { "updates": ft["total_updates"], "best_epoch": ft["best_epoch"], "best_val_loss": ft["best_val_loss"] },
        },
        "skill_medians": medians,
        "event_totals": events,
        "benchmark": bench,
    });
    write_json(&dir.join("run_summary.json"), &summary)
}
