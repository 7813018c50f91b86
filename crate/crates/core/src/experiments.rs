//! Desk-scale training experiments on synthetic linear-reservoir basins.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrodata::{align, fit_scaler, static_input_names, ForcingSeries, ScalerStats, StationRecord};
use crate::metrics::{decompose, kge_prime, median, nse};
use crate::nn::{finetune, predict_series, pretrain, BasinData, Dataset, ModelConfig, ModelState, TrainConfig};
use crate::synth::{generate_synthetic, ForcingShift, SyntheticBasin, SyntheticBasinSpec, SYNTH_STATIC_NAMES};

pub const N_BASINS: usize = 8;
pub const N_DAYS: usize = 2000;
/// Days `[0, TRAIN_DAYS)` train, the rest is the held-out slice.
pub const TRAIN_DAYS: u64 = 1500;
/// Fine-tuning uses forecast forcing from this day up to the end of training.
pub const FINETUNE_FROM: u64 = 900;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

/// Eight rain-fed basins with storage coefficients 0.08 .. 0.36.
pub fn reservoir_basins(shift: ForcingShift, seed: u64) -> Result<Vec<SyntheticBasin>> {
    (0..N_BASINS)
        .map(|i| {
            let spec = SyntheticBasinSpec {
                station_id: format!("B{i}"),
                k: 0.08 + 0.04 * i as f64,
                snow: None,
                area_km2: 200.0 * (i + 1) as f64,
                shift: shift.clone(),
                start: start(),
                mean_temp: 8.0,
            };
            generate_synthetic(&spec, N_DAYS, seed.wrapping_mul(1000).wrapping_add(i as u64))
        })
        .collect()
}

pub fn pretrain_config() -> TrainConfig {
    TrainConfig {
        lr_init: 3e-3,
        epochs: 20,
        warmup_epochs: 2,
        updates_per_epoch: 60,
        batch_size: 16,
        validation_every: 5,
        ..TrainConfig::pretrain()
    }
}

pub fn finetune_config() -> TrainConfig {
    TrainConfig {
        lr_init: 1e-3,
        epochs: 8,
        warmup_epochs: 1,
        updates_per_epoch: 40,
        batch_size: 16,
        validation_every: 4,
        ..TrainConfig::finetune()
    }
}

struct Setup {
    records: Vec<StationRecord>,
    scaler: ScalerStats,
    model: ModelConfig,
    train_end: NaiveDate,
}

fn setup(basins: &[SyntheticBasin]) -> Result<Setup> {
    let records: Vec<StationRecord> = basins.iter().map(|b| b.record.clone()).collect();
    let rea: Vec<&ForcingSeries> = basins.iter().map(|b| &b.reanalysis).collect();
    let train_end = start() + Days::new(TRAIN_DAYS - 1);
    let names = static_input_names(&SYNTH_STATIC_NAMES.map(String::from));
    let scaler = fit_scaler(&records, &rea, (start(), train_end), &names)?;
    Ok(Setup { records, scaler, model: ModelConfig::desk_scale(names.len()), train_end })
}

fn dataset(s: &Setup, forcing: &[&ForcingSeries], from: NaiveDate, to: NaiveDate) -> Result<Dataset> {
    let basins = s
        .records
        .iter()
        .zip(forcing)
        .map(|(r, f)| BasinData::build(r, f, &s.scaler, from, to))
        .collect::<Result<_>>()?;
    Ok(Dataset::new(basins, s.model.window, s.model.horizon))
}

/// Per-basin held-out `(obs, sim)` pairs; the first outputs land on the day
/// after training ends.
fn held_out(s: &Setup, state: &ModelState, forcing: &[&ForcingSeries]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let from = s.train_end + Days::new(1) - Days::new((s.model.window - s.model.horizon) as u64);
    let to = start() + Days::new(N_DAYS as u64 - 1);
    s.records
        .iter()
        .zip(forcing)
        .map(|(r, f)| {
            let b = BasinData::build(r, f, &state.scaler, from, to)?;
            let al = align(&r.discharge, &predict_series(state, &b, &b)?);
            Ok((al.a, al.b))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearningOutcome {
    pub nse: Vec<Option<f64>>,
    pub median_nse: f64,
}

/// Pre-trains on reanalysis forcing and scores NSE on the held-out slice.
pub fn learning_sanity(seed: u64) -> Result<LearningOutcome> {
    let basins = reservoir_basins(ForcingShift::default(), seed)?;
    let s = setup(&basins)?;
    let rea: Vec<&ForcingSeries> = basins.iter().map(|b| &b.reanalysis).collect();
    let train = dataset(&s, &rea, start(), s.train_end)?;
    let (state, _) = pretrain(s.model.clone(), s.scaler.clone(), &train, None, &pretrain_config(), seed)?;
    let nse: Vec<Option<f64>> = held_out(&s, &state, &rea)?.iter().map(|(o, p)| nse(o, p)).collect();
    let defined: Vec<f64> = nse.iter().flatten().copied().collect();
    let median_nse = median(&defined).ok_or_else(|| Error::domain("no defined NSE"))?;
    Ok(LearningOutcome { nse, median_nse })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainShiftOutcome {
    pub seed: u64,
    /// Median over basins of |beta - 1|, forecast-forced, both models.
    pub beta_dev_pretrained: f64,
    pub beta_dev_finetuned: f64,
    /// Median over basins of KGE'(finetuned) - KGE'(pretrained).
    pub median_delta_kge_prime: f64,
    pub scaler_unchanged: bool,
}

impl DomainShiftOutcome {
    pub fn passed(&self) -> bool {
        self.beta_dev_finetuned < self.beta_dev_pretrained && self.median_delta_kge_prime > 0.0 && self.scaler_unchanged
    }
}

/// Pre-trains on reanalysis forcing, fine-tunes on forecast forcing whose
/// wet-day precipitation is 1.3x reanalysis, and scores both models on
/// forecast-forced held-out data.
pub fn domain_shift(seed: u64) -> Result<DomainShiftOutcome> {
    let shift = ForcingShift { wet_bias: 1.3, temp_offset: 0.0, noise_per_lead_day: 0.0 };
    let basins = reservoir_basins(shift, seed)?;
    let s = setup(&basins)?;
    let rea: Vec<&ForcingSeries> = basins.iter().map(|b| &b.reanalysis).collect();
    let fc: Vec<&ForcingSeries> = basins.iter().map(|b| &b.forecast).collect();
    let mut pc = pretrain_config();
    pc.epochs = 15;
    let train = dataset(&s, &rea, start(), s.train_end)?;
    let (pre, _) = pretrain(s.model.clone(), s.scaler.clone(), &train, None, &pc, seed)?;
    let ft_ds = dataset(&s, &fc, start() + Days::new(FINETUNE_FROM), s.train_end)?;
    let (ft, _) = finetune(&pre, &ft_ds, None, &finetune_config(), seed.wrapping_add(1))?;

    let score = |state: &ModelState| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut dev = Vec::new();
        let mut kge = Vec::new();
        for (o, p) in held_out(&s, state, &fc)? {
            let beta = decompose(&o, &p).beta.ok_or_else(|| Error::domain("undefined beta"))?;
            dev.push((beta - 1.0).abs());
            kge.push(kge_prime(&o, &p).ok_or_else(|| Error::domain("undefined KGE'"))?);
        }
        Ok((dev, kge))
    };
    let (dev_pre, k_pre) = score(&pre)?;
    let (dev_ft, k_ft) = score(&ft)?;
    let dk: Vec<f64> = k_ft.iter().zip(&k_pre).map(|(a, b)| a - b).collect();
    Ok(DomainShiftOutcome {
        seed,
        beta_dev_pretrained: median(&dev_pre).unwrap_or(f64::NAN),
        beta_dev_finetuned: median(&dev_ft).unwrap_or(f64::NAN),
        median_delta_kge_prime: median(&dk).unwrap_or(f64::NAN),
        scaler_unchanged: ft.scaler.checksum() == s.scaler.checksum(),
    })
}
