//! Model-ready tensors: scaled dynamic rows, scaled statics and normalized
//! targets per basin, plus the list of usable training windows.

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::hydrodata::{encode_seasonality, ForcingSeries, ScalerStats, StationRecord, N_SEASONAL};

/// Per-step input width: five drivers plus the seasonal encoding.
pub const N_DYNAMIC: usize = 5 + N_SEASONAL;

#[derive(Debug, Clone, PartialEq)]
pub struct BasinData {
    pub station_id: String,
    pub start: NaiveDate,
    /// `len x N_DYNAMIC`, row-major; rows with missing forcing are zero.
    pub dynamic: Vec<f64>,
    pub valid: Vec<bool>,
    pub statics: Vec<f64>,
    /// Normalized specific discharge.
    pub target: Vec<Option<f64>>,
    /// Basin discharge std in normalized units.
    pub sigma: f64,
}

impl BasinData {
    /// Scales `forcing` and the station observations over `[from, to]`.
    pub fn build(
        station: &StationRecord,
        forcing: &ForcingSeries,
        scaler: &ScalerStats,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Self> {
        if from > to {
            return Err(Error::domain(format!("empty period {from} .. {to}")));
        }
        let len = (to - from).num_days() as usize + 1;
        let scaled = scaler.apply(forcing)?;
        let mut dynamic = vec![0.0; len * N_DYNAMIC];
        let mut valid = vec![false; len];
        let mut target = vec![None; len];
        let f_start = forcing.start();
        for i in 0..len {
            let date = from + Days::new(i as u64);
            let fi = (date - f_start).num_days();
            if fi >= 0 {
                if let Some(Some(row)) = scaled.get(fi as usize) {
                    let out = &mut dynamic[i * N_DYNAMIC..(i + 1) * N_DYNAMIC];
                    out[..5].copy_from_slice(row);
                    out[5..].copy_from_slice(&encode_seasonality(date));
                    valid[i] = true;
                }
            }
            target[i] = station.discharge.get(date).map(|q| scaler.target.scale(q));
        }
        let statics = scaler.scale_static(&station.static_inputs())?;
        let sigma = scaler.normalized_sigma(&station.station_id).ok_or_else(|| {
            Error::domain(format!("no fitted discharge sigma for station {}", station.station_id))
        })?;
        Ok(Self {
            station_id: station.station_id.clone(),
            start: from,
            dynamic,
            valid,
            statics,
            target,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start + Days::new(i as u64)
    }

    /// Dynamic rows `[end + 1 - window, end]`.
    pub fn window(&self, end: usize, window: usize) -> &[f64] {
        &self.dynamic[(end + 1 - window) * N_DYNAMIC..(end + 1) * N_DYNAMIC]
    }

    /// Population std of the normalized targets present in the record.
    pub fn observed_sigma(&self) -> Option<f64> {
        let obs: Vec<f64> = self.target.iter().flatten().copied().collect();
        crate::hydrodata::population_std(&obs)
    }
}

/// A training window: basin index and index of its last step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub basin: usize,
    pub end: usize,
}

/// Basins with every window whose inputs are complete and whose output steps
/// hold at least one observation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub basins: Vec<BasinData>,
    pub samples: Vec<Sample>,
    pub window: usize,
    pub horizon: usize,
}

impl Dataset {
    pub fn new(basins: Vec<BasinData>, window: usize, horizon: usize) -> Self {
        Self::with_lead_in(basins, window, horizon, 0)
    }

    /// Like [`Dataset::new`], but output steps must not fall in the first
    /// `lead_in` days, which then only serve as input history.
    pub fn with_lead_in(basins: Vec<BasinData>, window: usize, horizon: usize, lead_in: usize) -> Self {
        let mut samples = Vec::new();
        for (b, d) in basins.iter().enumerate() {
            let mut since_invalid = 0usize;
            for t in 0..d.len() {
                if d.valid[t] {
                    since_invalid += 1;
                } else {
                    since_invalid = 0;
                }
                if since_invalid >= window && t + 1 >= lead_in + horizon && d.target[t + 1 - horizon..=t].iter().any(Option::is_some) {
                    samples.push(Sample { basin: b, end: t });
                }
            }
        }
        Self { basins, samples, window, horizon }
    }

    pub fn targets(&self, s: Sample) -> &[Option<f64>] {
        &self.basins[s.basin].target[s.end + 1 - self.horizon..=s.end]
    }

    pub fn inputs(&self, s: Sample) -> (&[f64], &[f64]) {
        let b = &self.basins[s.basin];
        (b.window(s.end, self.window), &b.statics)
    }

    /// Deterministic subsample of at most `n` windows, evenly strided.
    pub fn subsample(&self, n: usize) -> Vec<Sample> {
        if self.samples.len() <= n || n == 0 {
            return self.samples.clone();
        }
        (0..n).map(|k| self.samples[k * self.samples.len() / n]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydrodata::{fit_scaler, static_input_names, DailySeries, ForcingSource};

    fn d(y: i32, m: u32, dd: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, dd).unwrap()
    }

    #[test]
    fn windows_skip_gaps() {
        let start = d(2000, 1, 1);
        let n = 40;
        let col = |k: f64| DailySeries::from_dense(start, (0..n).map(move |i| k + i as f64));
        let mut tp: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
        tp[20] = None;
        let vars = [col(1.0), col(2.0), col(3.0), col(4.0), DailySeries::new(start, tp).unwrap()];
        let f = ForcingSeries::new(ForcingSource::Reanalysis, 0, vars).unwrap();
        let q = DailySeries::from_dense(start, (0..n).map(|i| 1.0 + (i % 7) as f64));
        let s = StationRecord::new("a", 10.0, q, vec![1.0], 0.0).unwrap();
        let scaler = fit_scaler(&[s.clone()], &[&f], (start, d(2000, 2, 9)), &static_input_names(&["x".into()])).unwrap();
        let b = BasinData::build(&s, &f, &scaler, start, d(2000, 2, 9)).unwrap();
        assert_eq!(b.len(), 40);
        assert!(!b.valid[20]);
        let ds = Dataset::new(vec![b], 10, 3);
        let ends: Vec<usize> = ds.samples.iter().map(|s| s.end).collect();
        assert_eq!(ends.first(), Some(&9));
        assert!(!ends.iter().any(|&e| (20..30).contains(&e)));
        assert_eq!(ends.iter().filter(|&&e| e >= 30).count(), 10);
        assert_eq!(ds.inputs(ds.samples[0]).0.len(), 10 * N_DYNAMIC);
    }
}
