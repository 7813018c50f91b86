use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrodata::N_SEASONAL;

/// Architecture of the forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_size: usize,
    /// Dropout on the LSTM output before the head.
    pub dropout_p: f64,
    /// Widths of the three tanh layers of both embedding networks.
    pub embed_layers: [usize; 3],
    /// Sequence length in days, hindcast plus forecast steps.
    pub window: usize,
    /// Number of trailing steps that produce outputs.
    pub horizon: usize,
    /// Per-step inputs: the five meteorological drivers plus seasonal encodings.
    pub n_dynamic: usize,
    /// Static attributes including the UTC offset.
    pub n_static: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 1024,
            dropout_p: 0.4,
            embed_layers: [30, 20, 64],
            window: 180,
            horizon: 10,
            n_dynamic: 5 + N_SEASONAL,
            n_static: 204,
        }
    }
}

impl ModelConfig {
    /// Small configuration used for laptop-scale experiments.
    pub fn desk_scale(n_static: usize) -> Self {
        Self {
            hidden_size: 32,
            window: 60,
            horizon: 5,
            n_static,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.n_dynamic == 0 || self.n_static == 0 {
            return Err(Error::domain("hidden size and input widths must be positive"));
        }
        if self.embed_layers.contains(&0) {
            return Err(Error::domain("embedding layer widths must be positive"));
        }
        if self.horizon == 0 || self.horizon >= self.window {
            return Err(Error::domain(format!(
                "horizon {} must be positive and shorter than window {}",
                self.horizon, self.window
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::domain(format!("dropout {} outside [0, 1)", self.dropout_p)));
        }
        Ok(())
    }

    /// Width of each embedding output (identical for both branches).
    pub fn embed_dim(&self) -> usize {
        self.embed_layers[2]
    }
}

/// Optimization schedule for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub updates_per_epoch: usize,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub target_noise_sigma: f64,
    pub epsilon_loss: f64,
    pub validation_every: usize,
    /// Recompute per-basin sigma on this stage's data instead of reusing the
    /// values stored with the scaler.
    pub recompute_basin_sigma: bool,
    /// Upper bound on validation windows scored per validation pass.
    pub max_validation_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::pretrain()
    }
}

impl TrainConfig {
    pub fn pretrain() -> Self {
        Self {
            lr_init: 4e-4,
            epochs: 100,
            warmup_epochs: 10,
            updates_per_epoch: 10_000,
            batch_size: 512,
            grad_clip_norm: 1.0,
            target_noise_sigma: 0.02,
            epsilon_loss: 0.1,
            validation_every: 10,
            recompute_basin_sigma: false,
            max_validation_samples: 4096,
        }
    }

    pub fn finetune() -> Self {
        Self {
            lr_init: 1e-4,
            epochs: 30,
            warmup_epochs: 5,
            ..Self::pretrain()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.warmup_epochs >= self.epochs {
            return Err(Error::domain(format!(
                "warmup epochs {} must be fewer than epochs {}",
                self.warmup_epochs, self.epochs
            )));
        }
        if self.lr_init < 0.0 || !self.lr_init.is_finite() {
            return Err(Error::domain("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 || self.updates_per_epoch == 0 || self.validation_every == 0 {
            return Err(Error::domain("batch size, update cap and validation interval must be positive"));
        }
        if !(self.grad_clip_norm > 0.0) || self.target_noise_sigma < 0.0 || !(self.epsilon_loss > 0.0) {
            return Err(Error::domain("clip norm and loss epsilon must be positive, noise non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_architecture() {
        let m = ModelConfig::default();
        assert_eq!(m.hidden_size, 1024);
        assert_eq!(m.embed_layers, [30, 20, 64]);
        assert_eq!((m.window, m.horizon), (180, 10));
        assert!(m.validate().is_ok());
        let p = TrainConfig::pretrain();
        assert_eq!((p.lr_init, p.epochs, p.warmup_epochs), (4e-4, 100, 10));
        let f = TrainConfig::finetune();
        assert_eq!((f.lr_init, f.epochs, f.warmup_epochs), (1e-4, 30, 5));
    }

    #[test]
    fn invalid_configs() {
        let mut m = ModelConfig::desk_scale(3);
        m.horizon = m.window;
        assert!(m.validate().is_err());
        let mut t = TrainConfig::pretrain();
        t.warmup_epochs = t.epochs;
        assert!(t.validate().is_err());
    }
}
