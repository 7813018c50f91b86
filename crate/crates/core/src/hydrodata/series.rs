use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A daily time series; slot `i` holds the value for `start + i` days.
///
/// Missing observations are `None`. Non-missing slots are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    start: NaiveDate,
    values: Vec<Option<f64>>,
}

impl DailySeries {
    pub fn new(start: NaiveDate, values: Vec<Option<f64>>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| matches!(v, Some(x) if !x.is_finite())) {
            return Err(Error::NonFinite(format!(
                "daily series slot {i} ({})",
                start + Days::new(i as u64)
            )));
        }
        Ok(Self { start, values })
    }

    /// Builds a fully observed series. Non-finite entries become missing.
    pub fn from_dense(start: NaiveDate, values: impl IntoIterator<Item = f64>) -> Self {
        let values = values
            .into_iter()
            .map(|v| v.is_finite().then_some(v))
            .collect();
        Self { start, values }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Date of the last slot, or `None` for an empty series.
    pub fn end(&self) -> Option<NaiveDate> {
        (!self.values.is_empty()).then(|| self.date(self.values.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start + Days::new(index as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).and_then(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.date(i), *v))
    }

    /// Non-missing values in date order.
    pub fn observed(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn count_observed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Non-missing values on or after `from`.
    pub fn count_observed_since(&self, from: NaiveDate) -> usize {
        self.iter()
            .filter(|(d, v)| *d >= from && v.is_some())
            .count()
    }

    /// Restricts the series to `[from, to]` (inclusive). The result may be empty.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> DailySeries {
        let Some(end) = self.end() else {
            return self.clone();
        };
        let lo = from.max(self.start);
        let hi = to.min(end);
        if lo > hi {
            return DailySeries {
                start: lo,
                values: Vec::new(),
            };
        }
        let a = self.index_of(lo).unwrap_or(0);
        let b = self.index_of(hi).unwrap_or(self.values.len() - 1);
        DailySeries {
            start: lo,
            values: self.values[a..=b].to_vec(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<DailySeries> {
        DailySeries::new(self.start, self.values.iter().map(|v| v.map(&f)).collect())
    }
}

/// Values of two series paired on their common, jointly observed dates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aligned {
    pub dates: Vec<NaiveDate>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Intersection of the two date ranges, `None` when they do not overlap.
    pub range: Option<(NaiveDate, NaiveDate)>,
}

impl Aligned {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Pairs `a` and `b` over the intersection of their date ranges, dropping any
/// date missing in either series.
pub fn align(a: &DailySeries, b: &DailySeries) -> Aligned {
    let (Some(ea), Some(eb)) = (a.end(), b.end()) else {
        return Aligned::default();
    };
    let lo = a.start.max(b.start);
    let hi = ea.min(eb);
    if lo > hi {
        return Aligned::default();
    }
    let ia = a.index_of(lo).expect("lo inside a");
    let ib = b.index_of(lo).expect("lo inside b");
    let n = (hi - lo).num_days() as usize + 1;
    let mut out = Aligned {
        range: Some((lo, hi)),
        ..Aligned::default()
    };
    for k in 0..n {
        if let (Some(x), Some(y)) = (a.values[ia + k], b.values[ib + k]) {
            out.dates.push(lo + Days::new(k as u64));
            out.a.push(x);
            out.b.push(y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn identical_series_pair_fully() {
        let s = DailySeries::from_dense(d(2020, 1, 1), (0..10).map(f64::from));
        let al = align(&s, &s);
        assert_eq!(al.len(), 10);
        assert_eq!(al.range, Some((d(2020, 1, 1), d(2020, 1, 10))));
    }

    #[test]
    fn overlapping_ranges_intersect() {
        let a = DailySeries::from_dense(d(2020, 1, 1), (0..10).map(f64::from));
        let b = DailySeries::from_dense(d(2020, 1, 6), (0..10).map(f64::from));
        let al = align(&a, &b);
        assert_eq!(al.len(), 5);
        assert_eq!(al.a, vec![5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(al.b, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(align(&b, &a).len(), 5);
    }

    #[test]
    fn missing_in_either_drops_date() {
        let mut vals: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        vals[3] = None;
        let a = DailySeries::new(d(2020, 1, 1), vals).unwrap();
        let b = DailySeries::from_dense(d(2020, 1, 1), (0..10).map(f64::from));
        let al = align(&a, &b);
        assert_eq!(al.len(), 9);
        assert!(!al.dates.contains(&d(2020, 1, 4)));
    }

    #[test]
    fn disjoint_ranges_give_empty_result() {
        let a = DailySeries::from_dense(d(2020, 1, 1), [1.0, 2.0]);
        let b = DailySeries::from_dense(d(2021, 1, 1), [1.0, 2.0]);
        let al = align(&a, &b);
        assert!(al.is_empty());
        assert_eq!(al.range, None);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(DailySeries::new(d(2020, 1, 1), vec![Some(f64::NAN)]).is_err());
    }

    #[test]
    fn slice_clips_to_available_range() {
        let s = DailySeries::from_dense(d(2020, 1, 1), (0..10).map(f64::from));
        let sl = s.slice(d(2019, 12, 1), d(2020, 1, 3));
        assert_eq!(sl.start(), d(2020, 1, 1));
        assert_eq!(sl.len(), 3);
        assert!(s.slice(d(2021, 1, 1), d(2021, 2, 1)).is_empty());
    }
}
