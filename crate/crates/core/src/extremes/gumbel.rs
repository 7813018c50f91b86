use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrodata::DailySeries;

pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Return periods (years) used throughout the event verification.
pub const STANDARD_RETURN_PERIODS: [f64; 6] = [1.5, 2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnualMaxima {
    pub maxima: Vec<(i32, f64)>,
    /// Years dropped by the completeness floor, with their observed-day count.
    pub skipped: Vec<(i32, usize)>,
}

impl AnnualMaxima {
    pub fn values(&self) -> Vec<f64> {
        self.maxima.iter().map(|m| m.1).collect()
    }
}

/// Calendar-year maxima of years with at least `min_days` observations.
pub fn annual_maxima(s: &DailySeries, min_days: usize) -> AnnualMaxima {
    let mut out = AnnualMaxima::default();
    let mut current: Option<(i32, usize, f64)> = None;
    let flush = |c: Option<(i32, usize, f64)>, out: &mut AnnualMaxima| {
        if let Some((year, n, max)) = c {
            if n >= min_days && n > 0 {
                out.maxima.push((year, max));
            } else {
                log::debug!("year {year} skipped: {n} observed days");
                out.skipped.push((year, n));
            }
        }
    };
    for (d, v) in s.iter() {
        let year = d.year();
        if current.map(|c| c.0) != Some(year) {
            flush(current.take(), &mut out);
            current = Some((year, 0, f64::NEG_INFINITY));
        }
        if let (Some(v), Some(c)) = (v, current.as_mut()) {
            c.1 += 1;
            c.2 = c.2.max(v);
        }
    }
    flush(current, &mut out);
    out
}

/// First two sample L-moments via unbiased probability-weighted moments.
pub fn sample_l_moments(x: &[f64]) -> Result<(f64, f64)> {
    if x.len() < 2 {
        return Err(Error::domain(format!("L-moments need at least 2 values, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("L-moment sample".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let b0 = s.iter().sum::<f64>() / n;
    let b1 = s
        .iter()
        .enumerate()
        .map(|(i, v)| i as f64 / (n - 1.0) * v)
        .sum::<f64>()
        / n;
    Ok((b0, 2.0 * b1 - b0))
}

/// Gumbel `(location, scale)` from the first two L-moments.
pub fn gumbel_fit(lambda1: f64, lambda2: f64) -> Result<(f64, f64)> {
    if !(lambda2 > 0.0) {
        return Err(Error::domain(format!(
            "degenerate sample: second L-moment {lambda2} must be positive"
        )));
    }
    let alpha = lambda2 / std::f64::consts::LN_2;
    Ok((lambda1 - EULER_MASCHERONI * alpha, alpha))
}

/// Level exceeded on average once every `period_years` years.
pub fn return_level(xi: f64, alpha: f64, period_years: f64) -> Result<f64> {
    if !(period_years > 1.0) {
        return Err(Error::domain(format!("return period must exceed 1 year, got {period_years}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("Gumbel scale must be positive, got {alpha}")));
    }
    Ok(xi - alpha * (-(1.0 - 1.0 / period_years).ln()).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdSource {
    SimulatedReference,
    ObservedReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnLevel {
    pub period_years: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelThresholds {
    pub xi: f64,
    pub alpha: f64,
    /// Ascending in period and level.
    pub levels: Vec<ReturnLevel>,
    pub source: ThresholdSource,
    pub n_annual_maxima: usize,
}

impl GumbelThresholds {
    pub fn from_params(
        xi: f64,
        alpha: f64,
        periods: &[f64],
        source: ThresholdSource,
        n_annual_maxima: usize,
    ) -> Result<Self> {
        let mut p = periods.to_vec();
        p.sort_by(f64::total_cmp);
        p.dedup();
        let levels = p
            .into_iter()
            .map(|t| Ok(ReturnLevel { period_years: t, level: return_level(xi, alpha, t)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { xi, alpha, levels, source, n_annual_maxima })
    }

    pub fn level(&self, period_years: f64) -> Option<f64> {
        self.levels
            .iter()
            .find(|l| (l.period_years - period_years).abs() < 1e-9)
            .map(|l| l.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub min_days_per_year: usize,
    pub min_annual_maxima: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { min_days_per_year: 300, min_annual_maxima: 10 }
    }
}

/// Why thresholds could not be fitted for a reference series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Unfitted {
    TooFewMaxima(usize),
    Degenerate(String),
}

/// Annual maxima -> L-moments -> Gumbel -> return levels.
pub fn fit_thresholds(
    reference: &DailySeries,
    periods: &[f64],
    source: ThresholdSource,
    cfg: &ThresholdConfig,
) -> std::result::Result<GumbelThresholds, Unfitted> {
    let am = annual_maxima(reference, cfg.min_days_per_year);
    let n = am.maxima.len();
    if n < cfg.min_annual_maxima.max(2) {
        return Err(Unfitted::TooFewMaxima(n));
    }
    let fit = sample_l_moments(&am.values())
        .and_then(|(l1, l2)| gumbel_fit(l1, l2))
        .and_then(|(xi, alpha)| GumbelThresholds::from_params(xi, alpha, periods, source, n));
    fit.map_err(|e| Unfitted::Degenerate(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn l_moment_examples() {
        let (l1, l2) = sample_l_moments(&[3.0, 1.0, 2.0]).unwrap();
        assert!((l1 - 2.0).abs() < 1e-15);
        assert!((l2 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sample_l_moments(&[4.0; 5]).unwrap(), (4.0, 0.0));
        assert_eq!(sample_l_moments(&[0.0, 1.0]).unwrap(), (0.5, 0.5));
        assert!(sample_l_moments(&[1.0]).is_err());
    }

    #[test]
    fn standard_gumbel_fit() {
        let ln2 = std::f64::consts::LN_2;
        let (xi, alpha) = gumbel_fit(EULER_MASCHERONI, ln2).unwrap();
        assert!(xi.abs() < 1e-15);
        assert!((alpha - 1.0).abs() < 1e-15);
        assert!(gumbel_fit(1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_levels() {
        assert!((return_level(0.0, 1.0, 2.0).unwrap() - 0.3665).abs() < 1e-4);
        assert!((return_level(0.0, 1.0, 50.0).unwrap() - 3.902).abs() < 1e-3);
        assert!(return_level(0.0, 1.0, 1.0).is_err());
        let t = GumbelThresholds::from_params(1.0, 2.0, &STANDARD_RETURN_PERIODS, ThresholdSource::ObservedReference, 20)
            .unwrap();
        assert!(t.levels.windows(2).all(|w| w[0].level < w[1].level));
        assert_eq!(t.level(5.0), Some(return_level(1.0, 2.0, 5.0).unwrap()));
        assert_eq!(t.level(100.0), None);
    }

    #[test]
    fn maxima_completeness_floor() {
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let mut vals: Vec<Option<f64>> = (0..365 * 3).map(|i| Some((i % 365) as f64 / 100.0)).collect();
        vals[10] = Some(5.0);
        vals[365 + 20] = Some(9.0);
        for v in vals.iter_mut().skip(730).take(265) {
            *v = None;
        }
        let am = annual_maxima(&DailySeries::new(start, vals).unwrap(), 300);
        assert_eq!(am.maxima, vec![(2001, 5.0), (2002, 9.0)]);
        assert_eq!(am.skipped, vec![(2003, 100)]);

        let flat = DailySeries::from_dense(start, vec![3.0; 365]);
        assert_eq!(annual_maxima(&flat, 300).maxima, vec![(2001, 3.0)]);
    }

    #[test]
    fn too_few_years_leave_thresholds_undefined() {
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
        let s = DailySeries::from_dense(start, (0..365 * 5).map(|i| (i as f64 * 0.37).sin()));
        let r = fit_thresholds(&s, &STANDARD_RETURN_PERIODS, ThresholdSource::ObservedReference, &ThresholdConfig::default());
        assert_eq!(r, Err(Unfitted::TooFewMaxima(5)));
    }

    proptest! {
        #[test]
        fn return_level_is_affine(xi in -10.0f64..10.0, alpha in 0.01f64..10.0, c in -5.0f64..5.0, k in 0.1f64..5.0) {
            for t in STANDARD_RETURN_PERIODS {
                let base = return_level(xi, alpha, t).unwrap();
                prop_assert!((return_level(xi + c, alpha, t).unwrap() - (base + c)).abs() < 1e-9);
                prop_assert!(((return_level(xi, k * alpha, t).unwrap() - xi) - k * (base - xi)).abs() < 1e-9);
            }
        }

        #[test]
        fn l_moments_shift_and_scale(x in prop::collection::vec(-50.0f64..50.0, 2..40), c in -10.0f64..10.0, k in 0.1f64..10.0) {
            let (l1, l2) = sample_l_moments(&x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let (s1, s2) = sample_l_moments(&shifted).unwrap();
            prop_assert!((s1 - (l1 + c)).abs() < 1e-9);
            prop_assert!((s2 - l2).abs() < 1e-9);
            let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
            let (k1, k2) = sample_l_moments(&scaled).unwrap();
            prop_assert!((k1 - k * l1).abs() < 1e-9);
            prop_assert!((k2 - k * l2).abs() < 1e-9);
        }
    }
}
