//! Streamflow forecasting toolkit: basin-network curation, skill metrics,
//! extreme-value flood thresholds, event verification and a from-scratch
//! LSTM forecaster trained in two stages (reanalysis pre-training followed by
//! forecast-forcing fine-tuning).
//!
//! Module map:
//!
//! * [`hydrodata`] - series types, ingestion, unit conversion, scalers
//! * [`curation`] - polygon overlap, duplicate resolution, quality control
//! * [`metrics`] - NSE / KGE family and wet-day Wasserstein distance
//! * [`extremes`] - Gumbel return levels and event matching
//! * [`nn`] - the forecaster, its gradients, optimizer and training loops
//! * [`synth`], [`experiments`] - synthetic basins and desk-scale training runs
//! * [`benchmark`], [`pipeline`] - orchestration and reports

pub mod benchmark;
pub mod curation;
pub mod error;
pub mod experiments;
pub mod extremes;
pub mod hydrodata;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
