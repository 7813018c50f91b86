use serde::{Deserialize, Serialize};

use crate::hydrodata::{DailySeries, StationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcConfig {
    /// Reject at or above this fraction of unchanged consecutive observations.
    pub max_flatline_ratio: f64,
    /// Reject below this variance, (mm/d)^2.
    pub min_variance: f64,
}

impl Default for QcConfig {
    fn default() -> Self {
        Self {
            max_flatline_ratio: 0.95,
            min_variance: 1e-8,
        }
    }
}

/// Fraction of consecutive observed values that are exactly unchanged.
///
/// Gaps are skipped: the value after a gap is compared with the last value
/// before it. `None` with fewer than two observations.
pub fn flatline_ratio(s: &DailySeries) -> Option<f64> {
    let obs = s.observed();
    if obs.len() < 2 {
        return None;
    }
    let flat = obs.windows(2).filter(|w| w[1] - w[0] == 0.0).count();
    Some(flat as f64 / (obs.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "value", rename_all = "snake_case")]
pub enum QcReason {
    InsufficientData,
    Flatline(f64),
    LowVariance(f64),
}

impl QcReason {
    pub fn code(&self) -> &'static str {
        match self {
            QcReason::InsufficientData => "insufficient_data",
            QcReason::Flatline(_) => "flatline",
            QcReason::LowVariance(_) => "low_variance",
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            QcReason::InsufficientData => None,
            QcReason::Flatline(v) | QcReason::LowVariance(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcRejection {
    pub station_id: String,
    pub reasons: Vec<QcReason>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QcOutcome {
    pub retained: Vec<String>,
    pub rejected: Vec<QcRejection>,
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn check_station(s: &DailySeries, cfg: &QcConfig) -> Vec<QcReason> {
    let Some(flat) = flatline_ratio(s) else {
        return vec![QcReason::InsufficientData];
    };
    let mut reasons = Vec::new();
    if flat >= cfg.max_flatline_ratio {
        reasons.push(QcReason::Flatline(flat));
    }
    let var = variance(&s.observed());
    if var < cfg.min_variance {
        reasons.push(QcReason::LowVariance(var));
    }
    reasons
}

pub fn qc_filter<'a, I>(records: I, cfg: &QcConfig) -> QcOutcome
where
    I: IntoIterator<Item = &'a StationRecord>,
{
    let mut out = QcOutcome::default();
    for r in records {
        let reasons = check_station(&r.discharge, cfg);
        if reasons.is_empty() {
            out.retained.push(r.station_id.clone());
        } else {
            out.rejected.push(QcRejection {
                station_id: r.station_id.clone(),
                reasons,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};

    fn series(v: impl IntoIterator<Item = f64>) -> DailySeries {
        DailySeries::from_dense(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), v)
    }

    #[test]
    fn flatline_examples() {
        assert!((flatline_ratio(&series([1.0, 1.0, 1.0, 2.0])).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(flatline_ratio(&series([1.0, 2.0, 3.0, 4.0])), Some(0.0));
        assert_eq!(flatline_ratio(&series([3.0; 5])), Some(1.0));
        assert_eq!(flatline_ratio(&series([3.0])), None);
    }

    #[test]
    fn filter_reasons() {
        let cfg = QcConfig::default();
        let constant = StationRecord::new("flat", 1.0, series([2.0; 100]), vec![], 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = StationRecord::new("noise", 1.0, series((0..100).map(|_| rng.random::<f64>())), vec![], 0.0).unwrap();
        // Alternating values with variance 1e-12.
        let tiny = StationRecord::new(
            "tiny",
            1.0,
            series((0..100).map(|i| 1.0 + if i % 2 == 0 { 1e-6 } else { -1e-6 })),
            vec![],
            0.0,
        )
        .unwrap();
        let out = qc_filter([&constant, &noise, &tiny], &cfg);
        assert_eq!(out.retained, vec!["noise"]);
        assert_eq!(out.rejected[0].station_id, "flat");
        assert_eq!(out.rejected[0].reasons[0].code(), "flatline");
        assert_eq!(out.rejected[1].station_id, "tiny");
        assert_eq!(out.rejected[1].reasons.len(), 1);
        let var = out.rejected[1].reasons[0].value().unwrap();
        assert_eq!(out.rejected[1].reasons[0].code(), "low_variance");
        assert!((var - 1e-12).abs() < 1e-15);
    }
}
