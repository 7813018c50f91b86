use serde::{Deserialize, Serialize};

/// Correlation, variability and bias components of the KGE family.
///
/// Each component is `None` when its denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    /// Pearson correlation.
    pub r: Option<f64>,
    /// sigma_sim / sigma_obs.
    pub alpha: Option<f64>,
    /// mu_sim / mu_obs.
    pub beta: Option<f64>,
    /// CV_sim / CV_obs.
    pub gamma: Option<f64>,
}

/// Full per-station skill summary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SkillReport {
    pub nse: Option<f64>,
    pub kge2009: Option<f64>,
    pub kge_prime: Option<f64>,
    pub r: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub n: usize,
}

impl SkillReport {
    pub fn compute(obs: &[f64], sim: &[f64]) -> Self {
        let c = decompose(obs, sim);
        SkillReport {
            nse: nse(obs, sim),
            kge2009: kge_from(c.r, c.alpha, c.beta),
            kge_prime: kge_from(c.r, c.beta, c.gamma),
            r: c.r,
            alpha: c.alpha,
            beta: c.beta,
            gamma: c.gamma,
            n: obs.len(),
        }
    }

    /// Metric by column name as used in the CSV reports.
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "nse" => self.nse,
            "kge2009" => self.kge2009,
            "kge_prime" => self.kge_prime,
            "r" => self.r,
            "alpha" => self.alpha,
            "beta" => self.beta,
            "gamma" => self.gamma,
            _ => None,
        }
    }

    pub const METRICS: [&'static str; 7] = ["nse", "kge2009", "kge_prime", "r", "alpha", "beta", "gamma"];
}

struct Moments {
    mean_o: f64,
    mean_s: f64,
    var_o: f64,
    var_s: f64,
    cov: f64,
}

fn moments(obs: &[f64], sim: &[f64]) -> Moments {
    let n = obs.len() as f64;
    let mean_o = obs.iter().sum::<f64>() / n;
    let mean_s = sim.iter().sum::<f64>() / n;
    let (mut var_o, mut var_s, mut cov) = (0.0, 0.0, 0.0);
    for (o, s) in obs.iter().zip(sim) {
        let (a, b) = (o - mean_o, s - mean_s);
        var_o += a * a;
        var_s += b * b;
        cov += a * b;
    }
    Moments {
        mean_o,
        mean_s,
        var_o: var_o / n,
        var_s: var_s / n,
        cov: cov / n,
    }
}

fn check_lengths(obs: &[f64], sim: &[f64]) {
    assert_eq!(obs.len(), sim.len(), "obs and sim must be aligned");
}

/// Nash-Sutcliffe efficiency. `None` for fewer than two samples or constant `obs`.
pub fn nse(obs: &[f64], sim: &[f64]) -> Option<f64> {
    check_lengths(obs, sim);
    if obs.len() < 2 {
        return None;
    }
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let denom: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = obs.iter().zip(sim).map(|(o, s)| (s - o) * (s - o)).sum();
    Some(1.0 - num / denom)
}

/// Population-moment decomposition into `(r, alpha, beta, gamma)`.
pub fn decompose(obs: &[f64], sim: &[f64]) -> Components {
    check_lengths(obs, sim);
    if obs.len() < 2 {
        return Components::default();
    }
    let m = moments(obs, sim);
    let (sd_o, sd_s) = (m.var_o.sqrt(), m.var_s.sqrt());
    let r = (m.var_o > 0.0 && m.var_s > 0.0)
        .then(|| (m.cov / (m.var_o * m.var_s).sqrt()).clamp(-1.0, 1.0));
    let alpha = (sd_o > 0.0).then(|| sd_s / sd_o);
    let beta = (m.mean_o != 0.0).then(|| m.mean_s / m.mean_o);
    let gamma = (sd_o > 0.0 && m.mean_o != 0.0 && m.mean_s != 0.0)
        .then(|| (sd_s * m.mean_o) / (m.mean_s * sd_o));
    Components { r, alpha, beta, gamma }
}

fn kge_from(r: Option<f64>, a: Option<f64>, b: Option<f64>) -> Option<f64> {
    let (r, a, b) = (r?, a?, b?);
    Some(1.0 - ((r - 1.0).powi(2) + (a - 1.0).powi(2) + (b - 1.0).powi(2)).sqrt())
}

/// KGE with the variability term as a ratio of standard deviations.
pub fn kge2009(obs: &[f64], sim: &[f64]) -> Option<f64> {
    let c = decompose(obs, sim);
    kge_from(c.r, c.alpha, c.beta)
}

/// Modified KGE with the variability term as a ratio of coefficients of variation.
pub fn kge_prime(obs: &[f64], sim: &[f64]) -> Option<f64> {
    let c = decompose(obs, sim);
    kge_from(c.r, c.beta, c.gamma)
}
