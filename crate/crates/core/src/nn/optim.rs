use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::linalg::l2_norm;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Rescales `grads` in place when their global L2 norm exceeds `max_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// First and second moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    /// One bias-corrected Adam update of `params`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) {
    state.step(params, grads, lr)
}

/// Learning rate at a fractional epoch position `e` in `[0, epochs]`.
pub fn lr_at(e: f64, cfg: &TrainConfig) -> f64 {
    let w = cfg.warmup_epochs as f64;
    let total = cfg.epochs as f64;
    let lr = if e < w {
        cfg.lr_init * e / w
    } else {
        cfg.lr_init * 0.5 * (1.0 + (PI * (e - w) / (total - w)).cos())
    };
    lr.max(0.0)
}

/// Learning rate at the start of `epoch`: linear warmup, then cosine decay to zero.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::domain(format!("epoch {epoch} outside 0..{}", cfg.epochs)));
    }
    Ok(lr_at(epoch as f64, cfg))
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every present target.
pub fn add_target_noise<R: Rng>(targets: &mut [Option<f64>], sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for y in targets.iter_mut().flatten() {
        *y += normal.sample(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clipping() {
        let mut g = vec![0.3, 0.4];
        clip_gradients(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
        let mut g = vec![0.0, 4.0, 0.0];
        assert_eq!(clip_gradients(&mut g, 1.0), 4.0);
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
        let mut z = vec![0.0; 3];
        clip_gradients(&mut z, 1.0);
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut s = AdamState::new(3);
        let mut p = vec![0.0; 3];
        s.step(&mut p, &[2.0, -0.5, 0.0], 0.01);
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn adam_constant_gradient_converges_to_lr() {
        let mut s = AdamState::new(1);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            s.step(&mut p, &[0.3], 1e-3);
            last = before - p[0];
        }
        assert!((last - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn schedule_shape() {
        let cfg = TrainConfig::pretrain();
        assert_eq!(lr_schedule(0, &cfg).unwrap(), 0.0);
        assert_eq!(lr_schedule(10, &cfg).unwrap(), 4e-4);
        assert!((lr_schedule(55, &cfg).unwrap() - 2e-4).abs() < 1e-15);
        assert!(lr_schedule(99, &cfg).unwrap() < 1e-6);
        assert!(lr_schedule(100, &cfg).is_err());
        let left = lr_at(10.0 - 1e-9, &cfg);
        assert!((left - 4e-4).abs() < 1e-12);
    }

    #[test]
    fn target_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t: Vec<Option<f64>> = (0..100_000).map(|i| if i % 10 == 0 { None } else { Some(0.0) }).collect();
        let mut same = t.clone();
        add_target_noise(&mut same, 0.0, &mut rng);
        assert_eq!(same, t);
        add_target_noise(&mut t, 0.02, &mut rng);
        assert!(t.iter().step_by(10).all(Option::is_none));
        let v: Vec<f64> = t.iter().flatten().copied().collect();
        let sd = crate::hydrodata::population_std(&v).unwrap();
        assert!((sd / 0.02 - 1.0).abs() < 0.05);
    }
}
