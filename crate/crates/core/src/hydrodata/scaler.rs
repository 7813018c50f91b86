use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ForcingSeries, StationRecord, Variable};
use crate::error::{Error, Result};

/// Population mean and standard deviation of one input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Zero-variance feature; scales to 0 instead of dividing by `std`.
    pub constant: bool,
}

impl FeatureStats {
    /// Two-pass population moments.
    pub fn fit<I>(name: impl Into<String>, values: I) -> Result<Self>
    where
        I: Iterator<Item = f64> + Clone,
    {
        let name = name.into();
        let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        if n == 0 {
            return Err(Error::EmptyFeature(name));
        }
        let mean = sum / n as f64;
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / n as f64).sqrt();
        let constant = std <= 1e-12 * mean.abs().max(1.0);
        Ok(Self {
            name,
            mean,
            std: if constant { 0.0 } else { std },
            constant,
        })
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }

    pub fn unscale(&self, z: f64) -> f64 {
        if self.constant {
            self.mean
        } else {
            z * self.std + self.mean
        }
    }
}

/// Normalization statistics fitted on the pre-training period and reused
/// unchanged for every forcing product afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub dynamic: Vec<FeatureStats>,
    pub statics: Vec<FeatureStats>,
    /// Pooled specific discharge statistics; model targets live in this space.
    pub target: FeatureStats,
    /// Population std of each basin's observed specific discharge (mm/d)
    /// over the fitting period.
    pub basin_sigma: BTreeMap<String, f64>,
}

/// Names for the static input vector: attribute columns plus the UTC offset.
pub fn static_input_names(attr_names: &[String]) -> Vec<String> {
    let mut names = attr_names.to_vec();
    names.push("utc_offset_hours".to_string());
    names
}

/// Fits the scaler on `stations[i]` paired with `forcings[i]` over
/// `[period.0, period.1]`.
pub fn fit_scaler(
    stations: &[StationRecord],
    forcings: &[&ForcingSeries],
    period: (NaiveDate, NaiveDate),
    static_names: &[String],
) -> Result<ScalerStats> {
    if period.0 > period.1 {
        return Err(Error::domain(format!(
            "empty fitting period {} .. {}",
            period.0, period.1
        )));
    }
    if stations.len() != forcings.len() {
        return Err(Error::Shape {
            what: "forcings per station".into(),
            expected: stations.len(),
            got: forcings.len(),
        });
    }
    let n_static = stations.first().map_or(0, |s| s.static_inputs().len());
    if static_names.len() != n_static {
        return Err(Error::Shape {
            what: "static input names".into(),
            expected: n_static,
            got: static_names.len(),
        });
    }
    for s in stations {
        if s.static_inputs().len() != n_static {
            return Err(Error::Shape {
                what: format!("static attributes of {}", s.station_id),
                expected: n_static,
                got: s.static_inputs().len(),
            });
        }
    }

    let sliced: Vec<ForcingSeries> = forcings.iter().map(|f| f.slice(period.0, period.1)).collect();
    let dynamic = Variable::ALL
        .iter()
        .map(|&v| {
            let vals = sliced.iter().flat_map(move |f| f.get(v).values().iter().flatten().copied());
            FeatureStats::fit(v.name(), vals)
        })
        .collect::<Result<Vec<_>>>()?;

    let statics = static_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            FeatureStats::fit(name.clone(), stations.iter().map(move |s| {
                if j < s.static_attrs.len() {
                    s.static_attrs[j]
                } else {
                    s.utc_offset_hours
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let obs: Vec<_> = stations
        .iter()
        .map(|s| s.discharge.slice(period.0, period.1))
        .collect();
    let target = FeatureStats::fit(
        "specific_discharge",
        obs.iter().flat_map(|o| o.values().iter().flatten().copied()),
    )?;

    let mut basin_sigma = BTreeMap::new();
    for (s, o) in stations.iter().zip(&obs) {
        if let Some(sigma) = population_std(&o.observed()) {
            basin_sigma.insert(s.station_id.clone(), sigma);
        }
    }

    Ok(ScalerStats {
        dynamic,
        statics,
        target,
        basin_sigma,
    })
}

pub(crate) fn population_std(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    Some((x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt())
}

impl ScalerStats {
    fn dynamic_stats(&self, v: Variable) -> Result<&FeatureStats> {
        self.dynamic
            .iter()
            .find(|f| f.name == v.name())
            .ok_or_else(|| Error::UnknownVariable(v.name().to_string()))
    }

    /// Scales a forcing series day by day. A day with any missing variable is `None`.
    ///
    /// The same statistics apply to every source and lead time.
    pub fn apply(&self, forcing: &ForcingSeries) -> Result<Vec<Option<[f64; 5]>>> {
        let stats: Vec<&FeatureStats> = Variable::ALL
            .iter()
            .map(|&v| self.dynamic_stats(v))
            .collect::<Result<_>>()?;
        let n = forcing.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = [0.0; 5];
            let mut ok = true;
            for (k, (v, s)) in forcing.iter().enumerate() {
                match s.values()[i] {
                    Some(x) => row[k] = stats[v.index()].scale(x),
                    None => ok = false,
                }
            }
            out.push(ok.then_some(row));
        }
        Ok(out)
    }

    pub fn scale_static(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        if inputs.len() != self.statics.len() {
            return Err(Error::Shape {
                what: "static inputs".into(),
                expected: self.statics.len(),
                got: inputs.len(),
            });
        }
        Ok(inputs.iter().zip(&self.statics).map(|(x, s)| s.scale(*x)).collect())
    }

    /// Basin discharge std expressed in target (normalized) units.
    pub fn normalized_sigma(&self, station_id: &str) -> Option<f64> {
        let sigma = *self.basin_sigma.get(station_id)?;
        Some(if self.target.constant {
            0.0
        } else {
            sigma / self.target.std
        })
    }

    /// Stable digest of the statistics, used to prove they were not modified.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("scaler serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Scales one forcing series with the given statistics.
pub fn apply_scaler(stats: &ScalerStats, forcing: &ForcingSeries) -> Result<Vec<Option<[f64; 5]>>> {
    stats.apply(forcing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydrodata::{DailySeries, ForcingSource};

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn forcing(start: NaiveDate, cols: [&[f64]; 5], source: ForcingSource, lt: u32) -> ForcingSeries {
        let vars = cols.map(|c| DailySeries::from_dense(start, c.iter().copied()));
        ForcingSeries::new(source, lt, vars).unwrap()
    }

    #[test]
    fn pooled_population_moments() {
        let f = FeatureStats::fit("x", [1.0, 2.0, 3.0].into_iter()).unwrap();
        assert_eq!(f.mean, 2.0);
        assert!((f.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let c = FeatureStats::fit("c", [5.0, 5.0, 5.0].into_iter()).unwrap();
        assert!(c.constant);
        assert_eq!(c.std, 0.0);
        assert_eq!(c.scale(7.0), 0.0);
        assert!(matches!(
            FeatureStats::fit("e", std::iter::empty()),
            Err(Error::EmptyFeature(n)) if n == "e"
        ));
    }

    #[test]
    fn basin_sigma_and_reuse_across_sources() {
        let s0 = date(2020, 1, 1);
        let st = StationRecord::new(
            "A",
            10.0,
            DailySeries::new(s0, vec![Some(0.0), Some(2.0), None]).unwrap(),
            vec![3.0],
            1.0,
        )
        .unwrap();
        let st2 = StationRecord::new(
            "B",
            10.0,
            DailySeries::from_dense(s0, [1.0, 1.0, 1.0]),
            vec![5.0],
            2.0,
        )
        .unwrap();
        let re = forcing(
            s0,
            [&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &[9.0, 9.0, 9.0], &[0.0, 1.0, 2.0], &[0.0, 2.0, 4.0]],
            ForcingSource::Reanalysis,
            0,
        );
        let names = static_input_names(&["elev".to_string()]);
        let stats = fit_scaler(&[st, st2], &[&re, &re], (s0, date(2020, 1, 3)), &names).unwrap();
        assert_eq!(stats.basin_sigma["A"], 1.0);
        assert_eq!(stats.basin_sigma["B"], 0.0);
        assert!(stats.dynamic[1].constant);

        let tp = &stats.dynamic[Variable::Tp.index()];
        let fc = forcing(
            s0,
            [&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &[9.0, 9.0, 9.0], &[0.0, 1.0, 2.0], &[tp.mean, tp.mean + tp.std, 0.0]],
            ForcingSource::ForecastControl,
            1,
        );
        let scaled = stats.apply(&fc).unwrap();
        assert_eq!(scaled[0].unwrap()[4], 0.0);
        assert!((scaled[1].unwrap()[4] - 1.0).abs() < 1e-15);
        assert_eq!(scaled[0].unwrap()[1], 0.0);
    }

    #[test]
    fn unknown_variable_is_error() {
        let s0 = date(2020, 1, 1);
        let mut stats = ScalerStats {
            dynamic: Variable::ALL
                .iter()
                .map(|v| FeatureStats { name: v.name().into(), mean: 0.0, std: 1.0, constant: false })
                .collect(),
            statics: vec![],
            target: FeatureStats { name: "q".into(), mean: 0.0, std: 1.0, constant: false },
            basin_sigma: BTreeMap::new(),
        };
        stats.dynamic[4].name = "PRECIP".into();
        let f = forcing(s0, [&[1.0], &[1.0], &[1.0], &[1.0], &[1.0]], ForcingSource::Reanalysis, 0);
        assert!(matches!(stats.apply(&f), Err(Error::UnknownVariable(v)) if v == "TP"));
    }

    #[test]
    fn entirely_missing_feature_is_named() {
        let s0 = date(2020, 1, 1);
        let st = StationRecord::new("A", 1.0, DailySeries::from_dense(s0, [1.0, 2.0]), vec![], 0.0).unwrap();
        let missing = DailySeries::new(s0, vec![None, None]).unwrap();
        let ok = DailySeries::from_dense(s0, [1.0, 2.0]);
        let f = ForcingSeries::new(
            ForcingSource::Reanalysis,
            0,
            [ok.clone(), ok.clone(), missing, ok.clone(), ok],
        )
        .unwrap();
        let names = static_input_names(&[]);
        let err = fit_scaler(&[st], &[&f], (s0, date(2020, 1, 2)), &names).unwrap_err();
        assert!(matches!(err, Error::EmptyFeature(n) if n == "SP"));
    }
}
