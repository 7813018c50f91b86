//! Synthetic basins with known dynamics: a wet/dry precipitation chain
//! feeding a linear reservoir, optionally through a degree-day snowpack.

use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::curation::BasinGeometry;
use crate::error::{Error, Result};
use crate::hydrodata::{DailySeries, ForcingSeries, ForcingSource, StationRecord, Variable};
use crate::metrics::WET_DAY_THRESHOLD_MM;

/// Static attribute columns written for synthetic stations.
pub const SYNTH_STATIC_NAMES: [&str; 4] = ["storage_k", "log_area", "degree_day_factor", "mean_precip"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowSpec {
    /// Melt per degree above zero, mm/(degC d).
    pub degree_day_factor: f64,
}

/// How forecast forcing departs from reanalysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingShift {
    /// Multiplier on precipitation of wet days.
    pub wet_bias: f64,
    /// Added to 2 m temperature, degC.
    pub temp_offset: f64,
    /// Std of the lognormal precipitation noise per day of lead time.
    #[serde(default)]
    pub noise_per_lead_day: f64,
}

impl Default for ForcingShift {
    fn default() -> Self {
        Self { wet_bias: 1.3, temp_offset: 0.0, noise_per_lead_day: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBasinSpec {
    pub station_id: String,
    /// Reservoir outflow coefficient, per day.
    pub k: f64,
    pub snow: Option<SnowSpec>,
    pub area_km2: f64,
    pub shift: ForcingShift,
    pub start: NaiveDate,
    /// Mean daily temperature, degC.
    #[serde(default = "default_mean_temp")]
    pub mean_temp: f64,
}

fn default_mean_temp() -> f64 {
    8.0
}

impl SyntheticBasinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::domain(format!("storage coefficient {} outside (0, 1)", self.k)));
        }
        if !(self.area_km2 > 0.0 && self.area_km2.is_finite()) {
            return Err(Error::domain("area must be positive"));
        }
        if !(self.shift.wet_bias > 0.0) || !self.shift.temp_offset.is_finite() || self.shift.noise_per_lead_day < 0.0 {
            return Err(Error::domain("invalid forcing shift"));
        }
        if let Some(s) = &self.snow {
            if !(s.degree_day_factor > 0.0) {
                return Err(Error::domain("degree-day factor must be positive"));
            }
        }
        Ok(())
    }
}

/// Reservoir recursion `S[t+1] = (1 - k) S[t] + P[t]`, `Q[t] = k S[t]`.
/// Returns the discharge and the final storage `S[n]`.
pub fn linear_reservoir(inflow: &[f64], k: f64, s0: f64) -> (Vec<f64>, f64) {
    let mut s = s0;
    let q = inflow
        .iter()
        .map(|p| {
            let q = k * s;
            s = (1.0 - k) * s + p;
            q
        })
        .collect();
    (q, s)
}

/// Rain plus melt reaching the reservoir. Precipitation below 0 degC is stored as snow.
pub fn snow_routing(precip: &[f64], temp: &[f64], ddf: f64) -> Vec<f64> {
    let mut swe = 0.0;
    precip
        .iter()
        .zip(temp)
        .map(|(&p, &t)| {
            if t < 0.0 {
                swe += p;
                0.0
            } else {
                let melt = (ddf * t).min(swe);
                swe -= melt;
                p + melt
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticBasin {
    pub record: StationRecord,
    pub reanalysis: ForcingSeries,
    pub forecast: ForcingSeries,
    /// Final reservoir storage, mm.
    pub final_storage: f64,
}

struct Weather {
    ssr: Vec<f64>,
    strd: Vec<f64>,
    sp: Vec<f64>,
    t2m: Vec<f64>,
    tp: Vec<f64>,
}

fn weather(spec: &SyntheticBasinSpec, n: usize, rng: &mut ChaCha8Rng) -> Weather {
    let light = Gamma::new(0.8, 4.0).expect("valid gamma");
    let heavy = Gamma::new(2.0, 10.0).expect("valid gamma");
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut w = Weather { ssr: vec![], strd: vec![], sp: vec![], t2m: vec![], tp: vec![] };
    let mut wet = false;
    let mut t_anom = 0.0;
    for i in 0..n {
        let date = spec.start + Days::new(i as u64);
        let phase = 2.0 * PI * (date.ordinal() as f64 - 200.0) / 365.25;
        let season = phase.cos();
        let p_wet = if wet { 0.65 } else { 0.25 + 0.1 * season };
        wet = rng.random::<f64>() < p_wet;
        let p = if !wet {
            0.0
        } else if rng.random::<f64>() < 0.8 {
            light.sample(rng)
        } else {
            heavy.sample(rng)
        };
        t_anom = 0.7 * t_anom + 2.0 * unit.sample(rng);
        let t = spec.mean_temp + 10.0 * season + t_anom;
        let cloud = if wet { 0.5 } else { 1.0 };
        w.ssr.push((150.0 + 100.0 * season) * cloud + 5.0 * unit.sample(rng));
        w.strd.push(300.0 + 3.0 * t + 5.0 * unit.sample(rng));
        w.sp.push(95_000.0 + 300.0 * unit.sample(rng));
        w.t2m.push(t);
        w.tp.push(p);
    }
    w
}

fn forcing(start: NaiveDate, source: ForcingSource, lt: u32, w: &Weather) -> Result<ForcingSeries> {
    let col = |v: &[f64]| DailySeries::from_dense(start, v.iter().copied());
    ForcingSeries::new(source, lt, [col(&w.ssr), col(&w.strd), col(&w.sp), col(&w.t2m), col(&w.tp)])
}

/// Forecast forcing at `lead_time` derived from reanalysis by `shift`.
pub fn derive_forecast(reanalysis: &ForcingSeries, shift: &ForcingShift, lead_time: u32, seed: u64) -> Result<ForcingSeries> {
    if lead_time == 0 {
        return Err(Error::domain("forecast lead time must be at least 1 day"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (lead_time as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let sd = shift.noise_per_lead_day * lead_time as f64;
    let noise = Normal::new(0.0, sd.max(0.0)).expect("valid normal");
    let vars = Variable::ALL.map(|v| {
        let s = reanalysis.get(v);
        let values = s
            .values()
            .iter()
            .map(|x| {
                x.map(|x| match v {
                    Variable::Tp if x > WET_DAY_THRESHOLD_MM => {
                        let f = if sd > 0.0 { noise.sample(&mut rng).exp() } else { 1.0 };
                        x * shift.wet_bias * f
                    }
                    Variable::T2m => x + shift.temp_offset,
                    _ => x,
                })
            })
            .collect();
        DailySeries::new(s.start(), values)
    });
    let [a, b, c, d, e] = vars;
    ForcingSeries::new(ForcingSource::ForecastControl, lead_time, [a?, b?, c?, d?, e?])
}

/// Generates one basin: its observed discharge, reanalysis forcing and LT1
/// forecast forcing. Everything is reproducible from `seed`.
pub fn generate_synthetic(spec: &SyntheticBasinSpec, n_days: usize, seed: u64) -> Result<SyntheticBasin> {
    spec.validate()?;
    if n_days < 2 {
        return Err(Error::domain("need at least two days"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = weather(spec, n_days, &mut rng);
    let inflow = match &spec.snow {
        Some(s) => snow_routing(&w.tp, &w.t2m, s.degree_day_factor),
        None => w.tp.clone(),
    };
    let (q, final_storage) = linear_reservoir(&inflow, spec.k, 0.0);
    let mean_precip = w.tp.iter().sum::<f64>() / n_days as f64;
    let attrs = vec![
        spec.k,
        spec.area_km2.ln(),
        spec.snow.as_ref().map_or(0.0, |s| s.degree_day_factor),
        mean_precip,
    ];
    let record = StationRecord::new(
        spec.station_id.clone(),
        spec.area_km2,
        DailySeries::from_dense(spec.start, q),
        attrs,
        0.0,
    )?;
    let reanalysis = forcing(spec.start, ForcingSource::Reanalysis, 0, &w)?;
    let forecast = derive_forecast(&reanalysis, &spec.shift, 1, rng.random())?;
    Ok(SyntheticBasin { record, reanalysis, forecast, final_storage })
}

/// Settings for a whole synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_basins: usize,
    pub n_days: usize,
    pub start: NaiveDate,
    pub shift: ForcingShift,
    /// Fraction of basins with a snowpack.
    pub snow_fraction: f64,
    /// Adds a near-copy of the first basin and a flatlined gauge so the
    /// curation stage has something to remove.
    pub with_defects: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub basins: Vec<SyntheticBasin>,
    pub geometries: Vec<BasinGeometry>,
    pub specs: Vec<SyntheticBasinSpec>,
}

/// Regular polygon of `sides` vertices around `center` (degrees).
fn blob(id: &str, center: (f64, f64), radius: f64, sides: usize, rng: &mut ChaCha8Rng) -> Result<BasinGeometry> {
    let ring: Vec<(f64, f64)> = (0..sides)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / sides as f64;
            let r = radius * rng.random_range(0.75..1.0);
            (center.0 + r * a.cos(), center.1 + r * a.sin())
        })
        .collect();
    BasinGeometry::new(id, vec![ring])
}

pub fn generate_network(spec: &NetworkSpec, seed: u64) -> Result<SyntheticNetwork> {
    if spec.n_basins == 0 {
        return Err(Error::domain("network needs at least one basin"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SyntheticNetwork { basins: vec![], geometries: vec![], specs: vec![] };
    let side = (spec.n_basins as f64).sqrt().ceil() as usize;
    for i in 0..spec.n_basins {
        let area_km2 = 10f64.powf(rng.random_range(2.0..4.7));
        let snow = (rng.random::<f64>() < spec.snow_fraction).then(|| SnowSpec { degree_day_factor: rng.random_range(2.0..5.0) });
        let bs = SyntheticBasinSpec {
            station_id: format!("S{:04}", i + 1),
            k: rng.random_range(0.08..0.4),
            mean_temp: if snow.is_some() { rng.random_range(-2.0..4.0) } else { rng.random_range(6.0..14.0) },
            snow,
            area_km2,
            shift: spec.shift.clone(),
            start: spec.start,
        };
        let basin = generate_synthetic(&bs, spec.n_days, rng.random())?;
        let center = ((i % side) as f64 * 2.0, (i / side) as f64 * 2.0);
        out.geometries.push(blob(&bs.station_id, center, 0.8, 12, &mut rng)?);
        out.basins.push(basin);
        out.specs.push(bs);
    }
    if spec.with_defects {
        let src = &out.basins[0];
        let id = format!("S{:04}", spec.n_basins + 1);
        let q = src.record.discharge.map(|v| v * 1.01)?;
        let record = StationRecord::new(id.clone(), src.record.area_km2 * 1.02, q, src.record.static_attrs.clone(), 0.0)?;
        let g = &out.geometries[0];
        let ring: Vec<(f64, f64)> = g.exterior().iter().map(|&(x, y)| (x + 0.02, y + 0.01)).collect();
        out.geometries.push(BasinGeometry::new(&id, vec![ring])?);
        out.basins.push(SyntheticBasin { record, ..src.clone() });
        let mut s = out.specs[0].clone();
        s.station_id = id;
        out.specs.push(s);

        let src = &out.basins[1 % spec.n_basins];
        let id = format!("S{:04}", spec.n_basins + 2);
        let flat = DailySeries::from_dense(spec.start, std::iter::repeat(1.5).take(spec.n_days));
        let record = StationRecord::new(id.clone(), 500.0, flat, src.record.static_attrs.clone(), 0.0)?;
        out.geometries.push(blob(&id, (-3.0, -3.0), 0.5, 8, &mut rng)?);
        out.basins.push(SyntheticBasin { record, ..src.clone() });
        let mut s = out.specs[1 % spec.n_basins].clone();
        s.station_id = id;
        out.specs.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: f64) -> SyntheticBasinSpec {
        SyntheticBasinSpec {
            station_id: "x".into(),
            k,
            snow: None,
            area_km2: 100.0,
            shift: ForcingShift::default(),
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            mean_temp: 8.0,
        }
    }

    #[test]
    fn unit_pulse() {
        let (q, _) = linear_reservoir(&[1.0, 0.0, 0.0, 0.0], 0.5, 0.0);
        assert_eq!(q, vec![0.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn recession_is_geometric() {
        let (q, _) = linear_reservoir(&[0.0; 20], 0.2, 10.0);
        for w in q.windows(2) {
            assert!((w[1] - 0.8 * w[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_balance() {
        let b = generate_synthetic(&spec(0.15), 3000, 4).unwrap();
        let sum_q: f64 = b.record.discharge.observed().iter().sum();
        let sum_p: f64 = b.reanalysis.get(Variable::Tp).observed().iter().sum();
        assert!((sum_q - (sum_p - b.final_storage)).abs() < 1e-9);
    }

    #[test]
    fn snow_conserves_water() {
        let b = generate_synthetic(&SyntheticBasinSpec { snow: Some(SnowSpec { degree_day_factor: 3.0 }), mean_temp: 0.0, ..spec(0.2) }, 2000, 9).unwrap();
        let p: f64 = b.reanalysis.get(Variable::Tp).observed().iter().sum();
        let q: f64 = b.record.discharge.observed().iter().sum();
        assert!(q <= p + 1e-9);
    }

    #[test]
    fn forecast_shift_and_reproducibility() {
        let a = generate_synthetic(&spec(0.3), 500, 1).unwrap();
        let b = generate_synthetic(&spec(0.3), 500, 1).unwrap();
        assert_eq!(a.record, b.record);
        let r = a.reanalysis.get(Variable::Tp).observed();
        let f = a.forecast.get(Variable::Tp).observed();
        for (x, y) in r.iter().zip(&f) {
            if *x > WET_DAY_THRESHOLD_MM {
                assert!((y - 1.3 * x).abs() < 1e-12);
            } else {
                assert_eq!(x, y);
            }
        }
        assert!(generate_synthetic(&spec(1.0), 500, 1).is_err());
    }

    #[test]
    fn network_with_defects() {
        let net = generate_network(
            &NetworkSpec {
                n_basins: 4,
                n_days: 400,
                start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
                shift: ForcingShift::default(),
                snow_fraction: 0.5,
                with_defects: true,
            },
            3,
        )
        .unwrap();
        assert_eq!(net.basins.len(), 6);
        assert_eq!(net.geometries.len(), 6);
    }
}
