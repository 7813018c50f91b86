use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::gumbel::{GumbelThresholds, ThresholdSource};
use crate::error::{Error, Result};
use crate::hydrodata::{align, DailySeries};

/// Days on which the series is observed and strictly above `threshold`.
/// Every exceedance day is its own event.
pub fn extract_exceedances(s: &DailySeries, threshold: f64) -> BTreeSet<NaiveDate> {
    s.iter()
        .filter_map(|(d, v)| v.filter(|v| *v > threshold).map(|_| d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub hits: u64,
    pub misses: u64,
    pub false_alarms: u64,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.hits += o.hits;
        self.misses += o.misses;
        self.false_alarms += o.false_alarms;
    }
}

/// One-to-one matching of forecast event days to observed event days
/// within `margin` days.
///
/// Forecast days are visited in chronological order and each takes the
/// earliest still-unmatched observed day inside its window. Because every
/// window is an interval and both window ends increase with the forecast
/// day, this greedy choice yields a maximum matching.
pub fn match_events(forecast: &BTreeSet<NaiveDate>, observed: &BTreeSet<NaiveDate>, margin: u32) -> Counts {
    let mut free: BTreeSet<NaiveDate> = observed.clone();
    let m = chrono::Days::new(margin as u64);
    let mut hits = 0u64;
    for &f in forecast {
        let lo = f.checked_sub_days(m).unwrap_or(NaiveDate::MIN);
        let hi = f.checked_add_days(m).unwrap_or(NaiveDate::MAX);
        if let Some(&o) = free.range(lo..=hi).next() {
            free.remove(&o);
            hits += 1;
        }
    }
    Counts {
        hits,
        misses: observed.len() as u64 - hits,
        false_alarms: forecast.len() as u64 - hits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventTally {
    pub return_period: f64,
    pub hits: u64,
    pub misses: u64,
    pub false_alarms: u64,
}

impl EventTally {
    pub fn new(return_period: f64, c: Counts) -> Self {
        Self {
            return_period,
            hits: c.hits,
            misses: c.misses,
            false_alarms: c.false_alarms,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts { hits: self.hits, misses: self.misses, false_alarms: self.false_alarms }
    }

    /// hits / (hits + false alarms); `None` with no forecast events.
    pub fn precision(&self) -> Option<f64> {
        let d = self.hits + self.false_alarms;
        (d > 0).then(|| self.hits as f64 / d as f64)
    }

    /// hits / (hits + misses); `None` with no observed events.
    pub fn recall(&self) -> Option<f64> {
        let d = self.hits + self.misses;
        (d > 0).then(|| self.hits as f64 / d as f64)
    }
}

/// Forecast events judged against simulation-derived thresholds, observed
/// events against observation-derived thresholds.
///
/// Only dates on which both the forecast and the observation exist are
/// considered.
pub fn dual_threshold_verify(
    forecast_sim: &DailySeries,
    obs: &DailySeries,
    thresholds_sim: &GumbelThresholds,
    thresholds_obs: &GumbelThresholds,
    return_periods: &[f64],
    margin: u32,
) -> Result<Vec<EventTally>> {
    if thresholds_sim.source != ThresholdSource::SimulatedReference {
        return Err(Error::domain("forecast thresholds must come from the simulated reference"));
    }
    if thresholds_obs.source != ThresholdSource::ObservedReference {
        return Err(Error::domain("observed thresholds must come from the observed reference"));
    }
    let al = align(forecast_sim, obs);
    return_periods
        .iter()
        .map(|&t| {
            let missing = || Error::domain(format!("no threshold for return period {t}"));
            let ts = thresholds_sim.level(t).ok_or_else(missing)?;
            let to = thresholds_obs.level(t).ok_or_else(missing)?;
            let f: BTreeSet<NaiveDate> = al.dates.iter().zip(&al.a).filter(|(_, v)| **v > ts).map(|(d, _)| *d).collect();
            let o: BTreeSet<NaiveDate> = al.dates.iter().zip(&al.b).filter(|(_, v)| **v > to).map(|(d, _)| *d).collect();
            Ok(EventTally::new(t, match_events(&f, &o, margin)))
        })
        .collect()
}

/// Sums raw counts per return period across basins and lead times.
pub fn aggregate_tallies<'a, I>(tallies: I) -> Vec<EventTally>
where
    I: IntoIterator<Item = &'a EventTally>,
{
    let mut out: Vec<EventTally> = Vec::new();
    for t in tallies {
        match out.iter_mut().find(|o| o.return_period == t.return_period) {
            Some(o) => {
                o.hits += t.hits;
                o.misses += t.misses;
                o.false_alarms += t.false_alarms;
            }
            None => out.push(*t),
        }
    }
    out.sort_by(|a, b| a.return_period.total_cmp(&b.return_period));
    out
}
