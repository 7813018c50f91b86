use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrodata::{align, DailySeries};

/// Precipitation strictly above this amount (mm/d) counts as a wet day.
pub const WET_DAY_THRESHOLD_MM: f64 = 1.0;

/// Keeps wet days (strictly above 1 mm), dropping missing slots.
pub fn wet_day_filter(p: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for v in p.iter().flatten() {
        if *v < 0.0 {
            return Err(Error::domain(format!("negative precipitation {v}")));
        }
        if *v > WET_DAY_THRESHOLD_MM {
            out.push(*v);
        }
    }
    Ok(out)
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// 1-D Wasserstein-1 distance between the empirical distributions of `a` and `b`.
///
/// Integrates |Q_a(u) - Q_b(u)| over u in [0, 1], walking the merged
/// breakpoints `i/n` and `j/m` of the two step quantile functions. Breakpoints
/// are compared in integer arithmetic so unequal sample sizes are handled exactly.
pub fn w1_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let (n, m) = (sa.len() as u128, sb.len() as u128);
    // Positions are measured in units of 1/(n*m).
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut total = 0.0;
    while i < sa.len() && j < sb.len() {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        total += (next - pos) as f64 * (sa[i] - sb[j]).abs();
        pos = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Some(total / (n * m) as f64)
}

/// How wet days are selected before comparing two precipitation products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WetDayMode {
    /// Each product keeps its own wet days.
    #[default]
    Independent,
    /// Only days wet in the reference product are kept, for both products.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinReport {
    /// mm/d; `None` when either product has no wet days.
    pub w1_raw: Option<f64>,
    /// `w1_raw / reference_mean`.
    pub w1_normalized: Option<f64>,
    /// Wet-day counts of (reference, candidate).
    pub wet_day_counts: (usize, usize),
    /// Mean reference wet-day precipitation; `None` when there are no wet days.
    pub reference_mean: Option<f64>,
}

/// W1 between reference (reanalysis) and candidate (forecast) wet-day
/// precipitation over their common observed dates, normalized by the
/// reference wet-day mean.
pub fn normalized_w1(
    reference: &DailySeries,
    candidate: &DailySeries,
    mode: WetDayMode,
) -> Result<WassersteinReport> {
    let al = align(reference, candidate);
    if let Some(v) = al.a.iter().chain(&al.b).find(|v| **v < 0.0) {
        return Err(Error::domain(format!("negative precipitation {v}")));
    }
    let (ref_wet, cand_wet) = match mode {
        WetDayMode::Independent => (
            wet_day_filter(&al.a.iter().map(|v| Some(*v)).collect::<Vec<_>>())?,
            wet_day_filter(&al.b.iter().map(|v| Some(*v)).collect::<Vec<_>>())?,
        ),
        WetDayMode::Paired => al
            .a
            .iter()
            .zip(&al.b)
            .filter(|(r, _)| **r > WET_DAY_THRESHOLD_MM)
            .map(|(r, c)| (*r, *c))
            .unzip(),
    };
    let reference_mean =
        (!ref_wet.is_empty()).then(|| ref_wet.iter().sum::<f64>() / ref_wet.len() as f64);
    let w1_raw = w1_distance(&ref_wet, &cand_wet);
    let w1_normalized = match (w1_raw, reference_mean) {
        (Some(w), Some(mu)) if mu > 0.0 => Some(w / mu),
        _ => None,
    };
    Ok(WassersteinReport {
        w1_raw,
        w1_normalized,
        wet_day_counts: (ref_wet.len(), cand_wet.len()),
        reference_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    /// Equal-size oracle: mean absolute difference of sorted samples.
    fn sorted_diff(a: &[f64], b: &[f64]) -> f64 {
        let (sa, sb) = (sorted(a), sorted(b));
        sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64
    }

    #[test]
    fn hand_examples() {
        assert_eq!(w1_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Some(0.0));
        assert!((w1_distance(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((w1_distance(&[0.0, 0.0, 10.0], &[0.0, 10.0, 10.0]).unwrap() - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(w1_distance(&[], &[1.0]), None);
    }

    #[test]
    fn unequal_sizes_match_replicated_samples() {
        // Replicating every sample k times leaves the empirical distribution unchanged.
        let a = [0.5, 3.0, 1.0];
        let b = [2.0, 0.0];
        let ar: Vec<f64> = a.iter().flat_map(|v| [*v; 2]).collect();
        let br: Vec<f64> = b.iter().flat_map(|v| [*v; 3]).collect();
        let exact = w1_distance(&a, &b).unwrap();
        assert!((exact - sorted_diff(&ar, &br)).abs() < 1e-12);
    }

    #[test]
    fn wet_day_threshold_is_strict() {
        let p = [Some(0.0), Some(0.5), Some(1.0), Some(1.1), Some(7.0), None];
        assert_eq!(wet_day_filter(&p).unwrap(), vec![1.1, 7.0]);
        assert!(wet_day_filter(&[Some(0.2), Some(0.0)]).unwrap().is_empty());
        assert!(wet_day_filter(&[Some(-1.0)]).is_err());
    }

    fn day0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
    }

    #[test]
    fn normalized_report() {
        let era = DailySeries::from_dense(day0(), [0.0, 2.0, 4.0, 0.5, 6.0]);
        let same = normalized_w1(&era, &era, WetDayMode::Independent).unwrap();
        assert_eq!(same.w1_normalized, Some(0.0));

        let shifted = era.map(|v| if v > 1.0 { v + 1.0 } else { v }).unwrap();
        let rep = normalized_w1(&era, &shifted, WetDayMode::Independent).unwrap();
        assert!((rep.w1_raw.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.reference_mean, Some(4.0));
        assert!((rep.w1_normalized.unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(rep.wet_day_counts, (3, 3));

        let dry = DailySeries::from_dense(day0(), [0.0, 0.5]);
        let rep = normalized_w1(&dry, &era, WetDayMode::Independent).unwrap();
        assert_eq!(rep.w1_normalized, None);
        assert_eq!(rep.reference_mean, None);
    }

    #[test]
    fn paired_mode_uses_reference_wet_days() {
        let era = DailySeries::from_dense(day0(), [0.0, 2.0, 4.0]);
        let fc = DailySeries::from_dense(day0(), [5.0, 3.0, 4.0]);
        let ind = normalized_w1(&era, &fc, WetDayMode::Independent).unwrap();
        let par = normalized_w1(&era, &fc, WetDayMode::Paired).unwrap();
        assert_eq!(ind.wet_day_counts, (2, 3));
        assert_eq!(par.wet_day_counts, (2, 2));
        assert!((par.w1_raw.unwrap() - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn translation_property(a in prop::collection::vec(-100.0f64..100.0, 1..50), c in -20.0f64..20.0) {
            let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
            prop_assert!((w1_distance(&shifted, &a).unwrap() - c.abs()).abs() < 1e-12);
        }

        #[test]
        fn symmetric(a in prop::collection::vec(0.0f64..10.0, 1..30), b in prop::collection::vec(0.0f64..10.0, 1..30)) {
            prop_assert_eq!(w1_distance(&a, &b), w1_distance(&b, &a));
        }
    }
}
