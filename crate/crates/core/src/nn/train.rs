//! Two-stage training and inference.

use chrono::Days;
use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::data::{BasinData, Dataset, Sample};
use super::loss::sequence_loss;
use super::model::{Network, SequenceInput};
use super::optim::{add_target_noise, clip_gradients, lr_at, AdamState};
use crate::error::{Error, LastFinite, Result};
use crate::hydrodata::{DailySeries, ScalerStats};

/// Samples per work unit; gradients are summed within a unit, then units are
/// summed in batch order, so results do not depend on the thread count.
const CHUNK: usize = 4;

/// Trained parameters, optimizer moments and the scaler they were fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub scaler: ScalerStats,
}

impl ModelState {
    pub fn network(&self) -> Result<Network> {
        let net = Network::new(self.config.clone())?;
        if net.n_params() != self.params.len() {
            return Err(Error::Shape {
                what: "parameter vector".into(),
                expected: net.n_params(),
                got: self.params.len(),
            });
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub updates: usize,
    pub lr_last: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub total_updates: u64,
}

fn check_finite(net: &Network, v: &[f64], what: &str) -> std::result::Result<(), String> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(format!("non-finite {what} in tensor {}", net.layout.tensor_of(i))),
        None => Ok(()),
    }
}

/// Loss sum, count and gradient sum over a slice of samples.
fn chunk_gradient(
    net: &Network,
    params: &[f64],
    ds: &Dataset,
    sigmas: &[f64],
    cfg: &TrainConfig,
    items: &[(Sample, u64)],
) -> Result<(Vec<f64>, f64, usize)> {
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let mut count = 0;
    let mut d_out = vec![0.0; net.config.horizon];
    for &(s, seed) in items {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut target = ds.targets(s).to_vec();
        add_target_noise(&mut target, cfg.target_noise_sigma, &mut rng);
        let mask = net.sample_mask(&mut rng);
        let (dynamic, statics) = ds.inputs(s);
        let input = SequenceInput { dynamic, statics };
        let trace = net.forward_trace(params, &input, mask.as_deref())?;
        let (sum, n) = sequence_loss(&trace.outputs, &target, sigmas[s.basin], cfg.epsilon_loss, &mut d_out);
        if n > 0 {
            net.backward(params, &input, &trace, &d_out, &mut grad);
        }
        total += sum;
        count += n;
    }
    Ok((grad, total, count))
}

/// Mean noise-free, dropout-free loss over (a subsample of) `ds`.
pub fn evaluate_loss(net: &Network, params: &[f64], ds: &Dataset, epsilon: f64, max_samples: usize) -> Result<Option<f64>> {
    let samples = ds.subsample(max_samples);
    let parts: Vec<(f64, usize)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut d = vec![0.0; net.config.horizon];
            let mut acc = (0.0, 0);
            for &s in chunk {
                let (dynamic, statics) = ds.inputs(s);
                let y = net.forward(params, &SequenceInput { dynamic, statics }, None)?;
                let (sum, n) = sequence_loss(&y, ds.targets(s), ds.basins[s.basin].sigma, epsilon, &mut d);
                acc.0 += sum;
                acc.1 += n;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let (sum, n) = parts.iter().fold((0.0, 0), |a, p| (a.0 + p.0, a.1 + p.1));
    Ok((n > 0).then(|| sum / n as f64))
}

fn run_stage(
    stage: &str,
    mut state: ModelState,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelState, StageReport)> {
    cfg.validate()?;
    let net = state.network()?;
    if train.window != net.config.window || train.horizon != net.config.horizon {
        return Err(Error::domain("dataset window/horizon differ from the model configuration"));
    }
    if train.samples.is_empty() {
        return Err(Error::domain(format!("{stage}: no complete training windows")));
    }
    let sigmas: Vec<f64> = train
        .basins
        .iter()
        .map(|b| if cfg.recompute_basin_sigma { b.observed_sigma().unwrap_or(b.sigma) } else { b.sigma })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.samples.len()).collect();
    let per_epoch = train.samples.len().div_ceil(cfg.batch_size).min(cfg.updates_per_epoch);
    let mut report = StageReport {
        stage: stage.to_string(),
        history: Vec::new(),
        best_epoch: None,
        best_val_loss: None,
        total_updates: 0,
    };
    let mut best: Option<(Vec<f64>, AdamState)> = None;
    let diverged = |state: &ModelState, reason: String| Error::Diverged {
        stage: stage.to_string(),
        reason,
        last_finite: LastFinite(Box::new(state.clone())),
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        let mut lr = 0.0;
        for u in 0..per_epoch {
            let lo = u * cfg.batch_size;
            let hi = (lo + cfg.batch_size).min(order.len());
            let items: Vec<(Sample, u64)> = order[lo..hi].iter().map(|&i| (train.samples[i], rng.random())).collect();
            let parts: Vec<(Vec<f64>, f64, usize)> = items
                .par_chunks(CHUNK)
                .map(|c| chunk_gradient(&net, &state.params, train, &sigmas, cfg, c))
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; state.params.len()];
            let (mut sum, mut n) = (0.0, 0usize);
            for (g, s, k) in &parts {
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                sum += s;
                n += k;
            }
            if n == 0 {
                continue;
            }
            let scale = 1.0 / n as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let loss = sum * scale;
            if !loss.is_finite() {
                return Err(diverged(&state, format!("non-finite loss at epoch {epoch} update {u}")));
            }
            if let Err(reason) = check_finite(&net, &grad, "gradient") {
                return Err(diverged(&state, reason));
            }
            clip_gradients(&mut grad, cfg.grad_clip_norm);
            lr = lr_at(epoch as f64 + u as f64 / per_epoch as f64, cfg);
            let before = (state.params.clone(), state.adam.clone());
            state.adam.step(&mut state.params, &grad, lr);
            if let Err(reason) = check_finite(&net, &state.params, "parameter") {
                state.params = before.0;
                state.adam = before.1;
                return Err(diverged(&state, reason));
            }
            loss_sum += sum;
            loss_n += n;
            report.total_updates += 1;
        }
        let train_loss = if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN };
        let validate = (epoch + 1) % cfg.validation_every == 0 || epoch + 1 == cfg.epochs;
        let val_loss = match val {
            Some(v) if validate => evaluate_loss(&net, &state.params, v, cfg.epsilon_loss, cfg.max_validation_samples)?,
            _ => None,
        };
        if let Some(vl) = val_loss {
            if report.best_val_loss.map_or(true, |b| vl < b) {
                report.best_val_loss = Some(vl);
                report.best_epoch = Some(epoch);
                best = Some((state.params.clone(), state.adam.clone()));
            }
        }
        debug!("{stage} epoch {epoch}: lr {lr:.3e} train {train_loss:.5} val {val_loss:?}");
        report.history.push(EpochLog { epoch, updates: per_epoch, lr_last: lr, train_loss, val_loss });
    }
    if let Some((p, a)) = best {
        state.params = p;
        state.adam = a;
    }
    info!(
        "{stage}: {} updates, best validation {:?} at epoch {:?}",
        report.total_updates, report.best_val_loss, report.best_epoch
    );
    Ok((state, report))
}

/// Trains a freshly initialized model on reanalysis-forced data.
pub fn pretrain(
    config: ModelConfig,
    scaler: ScalerStats,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelState, StageReport)> {
    let net = Network::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = net.init_params(&mut rng);
    let state = ModelState { adam: AdamState::new(params.len()), config, params, scaler };
    run_stage("pretrain", state, train, val, cfg, rng.random())
}

/// Continues training a pretrained model on forecast-forced data. All
/// parameters stay trainable, the scaler is reused as is and the optimizer
/// moments start from zero.
pub fn finetune(
    pretrained: &ModelState,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelState, StageReport)> {
    let mut state = pretrained.clone();
    state.adam = AdamState::new(state.params.len());
    run_stage("finetune", state, train, val, cfg, seed)
}

/// Runs the model over consecutive, non-overlapping output blocks.
///
/// Hindcast steps read `hindcast`, the trailing `horizon` steps of each window
/// read `forecast`. Both must cover the same dates. The first block's outputs
/// start at index `window - horizon`. Returns de-normalized specific discharge.
pub fn predict_series(state: &ModelState, hindcast: &BasinData, forecast: &BasinData) -> Result<DailySeries> {
    let net = state.network()?;
    if hindcast.start != forecast.start || hindcast.len() != forecast.len() {
        return Err(Error::domain("hindcast and forecast inputs cover different dates"));
    }
    let (w, h) = (net.config.window, net.config.horizon);
    let len = hindcast.len();
    if len < w {
        return Err(Error::domain(format!("{} days of input, window needs {w}", len)));
    }
    let first = w - h;
    let out_start = hindcast.start + Days::new(first as u64);
    let blocks: Vec<usize> = (first..=len - h).step_by(h).collect();
    let nd = net.config.n_dynamic;
    let outputs: Vec<Option<Vec<f64>>> = blocks
        .par_iter()
        .map(|&s| {
            let end = s + h - 1;
            let lo = end + 1 - w;
            let ok = hindcast.valid[lo..s].iter().all(|&v| v) && forecast.valid[s..=end].iter().all(|&v| v);
            if !ok {
                return Ok(None);
            }
            let mut dynamic = Vec::with_capacity(w * nd);
            dynamic.extend_from_slice(&hindcast.dynamic[lo * nd..s * nd]);
            dynamic.extend_from_slice(&forecast.dynamic[s * nd..(end + 1) * nd]);
            let y = net.forward(&state.params, &SequenceInput { dynamic: &dynamic, statics: &hindcast.statics }, None)?;
            Ok(Some(y))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![None; len - first];
    for (&s, y) in blocks.iter().zip(outputs) {
        if let Some(y) = y {
            for (k, v) in y.into_iter().enumerate() {
                values[s - first + k] = Some(state.scaler.target.unscale(v));
            }
        }
    }
    DailySeries::new(out_start, values)
}
