//! JSON checkpoint: configuration, scaler, named tensors and optimizer state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::optim::AdamState;
use super::train::ModelState;
use crate::error::{Error, Result};
use crate::hydrodata::io::{read_json, write_json};
use crate::hydrodata::ScalerStats;

pub const CHECKPOINT_FORMAT: &str = "floodcast-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub scaler: ScalerStats,
    pub tensors: Vec<NamedTensor>,
    pub adam_step: u64,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

impl Checkpoint {
    pub fn from_state(state: &ModelState) -> Result<Self> {
        let net = state.network()?;
        let tensors = net
            .layout
            .tensors
            .iter()
            .map(|t| NamedTensor {
                name: t.name.clone(),
                rows: t.rows,
                cols: t.cols,
                values: state.params[t.range()].to_vec(),
            })
            .collect();
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            config: state.config.clone(),
            scaler: state.scaler.clone(),
            tensors,
            adam_step: state.adam.step,
            adam_m: state.adam.m.clone(),
            adam_v: state.adam.v.clone(),
        })
    }

    pub fn into_state(self) -> Result<ModelState> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::domain(format!("unsupported checkpoint format `{}`", self.format)));
        }
        let net = super::model::Network::new(self.config.clone())?;
        let mut params = vec![0.0; net.n_params()];
        if self.tensors.len() != net.layout.tensors.len() {
            return Err(Error::Shape {
                what: "checkpoint tensor count".into(),
                expected: net.layout.tensors.len(),
                got: self.tensors.len(),
            });
        }
        for (spec, t) in net.layout.tensors.iter().zip(&self.tensors) {
            if spec.name != t.name || spec.rows != t.rows || spec.cols != t.cols || t.values.len() != spec.len() {
                return Err(Error::domain(format!(
                    "checkpoint tensor `{}` ({}x{}) does not match `{}` ({}x{})",
                    t.name, t.rows, t.cols, spec.name, spec.rows, spec.cols
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("checkpoint tensor {}", t.name)));
            }
            params[spec.range()].copy_from_slice(&t.values);
        }
        if self.adam_m.len() != params.len() || self.adam_v.len() != params.len() {
            return Err(Error::Shape {
                what: "optimizer moments".into(),
                expected: params.len(),
                got: self.adam_m.len().min(self.adam_v.len()),
            });
        }
        Ok(ModelState {
            config: self.config,
            params,
            adam: AdamState { m: self.adam_m, v: self.adam_v, step: self.adam_step },
            scaler: self.scaler,
        })
    }
}

pub fn save_checkpoint(path: &Path, state: &ModelState) -> Result<()> {
    write_json(path, &Checkpoint::from_state(state)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    read_json::<Checkpoint>(path)?.into_state()
}
