use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DailySeries;
use crate::error::{Error, Result};

/// The five daily meteorological drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    /// Surface solar radiation downwards.
    Ssr,
    /// Surface thermal radiation downwards.
    Str,
    /// Surface pressure.
    Sp,
    /// 2 m air temperature.
    T2m,
    /// Total daily precipitation, mm.
    Tp,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::Ssr,
        Variable::Str,
        Variable::Sp,
        Variable::T2m,
        Variable::Tp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Ssr => "SSR",
            Variable::Str => "STR",
            Variable::Sp => "SP",
            Variable::T2m => "T2M",
            Variable::Tp => "TP",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForcingSource {
    Reanalysis,
    ForecastControl,
}

/// Daily forcing for one basin from one product (and lead time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSeries {
    source: ForcingSource,
    lead_time_days: u32,
    /// Indexed by [`Variable::index`].
    variables: Vec<DailySeries>,
}

impl ForcingSeries {
    pub fn new(
        source: ForcingSource,
        lead_time_days: u32,
        variables: [DailySeries; 5],
    ) -> Result<Self> {
        match (source, lead_time_days) {
            (ForcingSource::Reanalysis, 0) => {}
            (ForcingSource::ForecastControl, lt) if lt > 0 => {}
            (s, lt) => {
                return Err(Error::domain(format!(
                    "lead time {lt} is inconsistent with source {s:?}"
                )))
            }
        }
        let first = &variables[0];
        for (v, s) in Variable::ALL.iter().zip(variables.iter()) {
            if s.start() != first.start() || s.len() != first.len() {
                return Err(Error::domain(format!(
                    "forcing variable {v} covers a different date range than {}",
                    Variable::ALL[0]
                )));
            }
        }
        let tp = &variables[Variable::Tp.index()];
        if let Some((d, p)) = tp.iter().find_map(|(d, v)| v.filter(|p| *p < 0.0).map(|p| (d, p))) {
            return Err(Error::domain(format!("negative precipitation {p} on {d}")));
        }
        Ok(Self {
            source,
            lead_time_days,
            variables: variables.into(),
        })
    }

    pub fn source(&self) -> ForcingSource {
        self.source
    }

    pub fn lead_time_days(&self) -> u32 {
        self.lead_time_days
    }

    pub fn get(&self, v: Variable) -> &DailySeries {
        &self.variables[v.index()]
    }

    pub fn start(&self) -> chrono::NaiveDate {
        self.variables[0].start()
    }

    pub fn len(&self) -> usize {
        self.variables[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, &DailySeries)> {
        Variable::ALL.into_iter().zip(self.variables.iter())
    }

    pub fn slice(&self, from: chrono::NaiveDate, to: chrono::NaiveDate) -> ForcingSeries {
        ForcingSeries {
            source: self.source,
            lead_time_days: self.lead_time_days,
            variables: self.variables.iter().map(|s| s.slice(from, to)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn series(vals: &[f64]) -> DailySeries {
        DailySeries::from_dense(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), vals.iter().copied())
    }

    fn five(tp: &[f64]) -> [DailySeries; 5] {
        let other = series(&vec![1.0; tp.len()]);
        [other.clone(), other.clone(), other.clone(), other, series(tp)]
    }

    #[test]
    fn lead_time_must_match_source() {
        assert!(ForcingSeries::new(ForcingSource::Reanalysis, 0, five(&[1.0])).is_ok());
        assert!(ForcingSeries::new(ForcingSource::Reanalysis, 1, five(&[1.0])).is_err());
        assert!(ForcingSeries::new(ForcingSource::ForecastControl, 0, five(&[1.0])).is_err());
        assert!(ForcingSeries::new(ForcingSource::ForecastControl, 3, five(&[1.0])).is_ok());
    }

    #[test]
    fn negative_precipitation_rejected() {
        assert!(ForcingSeries::new(ForcingSource::Reanalysis, 0, five(&[1.0, -0.1])).is_err());
    }

    #[test]
    fn ragged_variables_rejected() {
        let mut v = five(&[1.0, 2.0]);
        v[0] = series(&[1.0]);
        assert!(ForcingSeries::new(ForcingSource::Reanalysis, 0, v).is_err());
    }

    #[test]
    fn variable_names_parse_back() {
        for v in Variable::ALL {
            assert_eq!(v.name().parse::<Variable>().unwrap(), v);
        }
        assert!("PET".parse::<Variable>().is_err());
    }
}
