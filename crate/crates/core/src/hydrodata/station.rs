use serde::{Deserialize, Serialize};

use super::DailySeries;
use crate::error::{Error, Result};

/// Seconds per day x mm per m / m^2 per km^2.
const M3S_PER_KM2_TO_MM_PER_DAY: f64 = 86_400.0 * 1_000.0 / 1_000_000.0;

/// Converts a volumetric discharge (m^3/s) into specific discharge (mm/d)
/// over a catchment of `area_km2`.
pub fn to_specific_discharge(q_m3s: f64, area_km2: f64) -> Result<f64> {
    if !(area_km2 > 0.0) || !area_km2.is_finite() {
        return Err(Error::domain(format!(
            "drainage area must be positive, got {area_km2}"
        )));
    }
    Ok(q_m3s * M3S_PER_KM2_TO_MM_PER_DAY / area_km2)
}

/// Converts a whole m^3/s series. Missing slots stay missing.
pub fn series_to_specific_discharge(q: &DailySeries, area_km2: f64) -> Result<DailySeries> {
    to_specific_discharge(0.0, area_km2)?;
    q.map(|v| v * M3S_PER_KM2_TO_MM_PER_DAY / area_km2)
}

/// One gauge of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub station_id: String,
    pub area_km2: f64,
    /// Observed specific discharge, mm/d.
    pub discharge: DailySeries,
    pub static_attrs: Vec<f64>,
    pub utc_offset_hours: f64,
}

impl StationRecord {
    pub fn new(
        station_id: impl Into<String>,
        area_km2: f64,
        discharge: DailySeries,
        static_attrs: Vec<f64>,
        utc_offset_hours: f64,
    ) -> Result<Self> {
        let station_id = station_id.into();
        if !(area_km2 > 0.0) || !area_km2.is_finite() {
            return Err(Error::domain(format!(
                "station {station_id}: drainage area must be positive, got {area_km2}"
            )));
        }
        if let Some(i) = static_attrs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "station {station_id} static attribute {i}"
            )));
        }
        Ok(Self {
            station_id,
            area_km2,
            discharge,
            static_attrs,
            utc_offset_hours,
        })
    }

    /// Static model inputs: the attribute vector followed by the UTC offset.
    pub fn static_inputs(&self) -> Vec<f64> {
        let mut v = self.static_attrs.clone();
        v.push(self.utc_offset_hours);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_conversion_examples() {
        // 1 m3/s over 86.4 km2: 86400 * 1000 / 86.4e6 mm/d
        let oracle = 1.0 * 86_400.0 * 1_000.0 / (86.4 * 1.0e6);
        assert!((to_specific_discharge(1.0, 86.4).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 1.0).abs() < 1e-12);
        assert_eq!(to_specific_discharge(0.0, 500.0).unwrap(), 0.0);
        let q = to_specific_discharge(55.0, 182.0).unwrap();
        assert!((q - 26.11).abs() < 5e-3, "{q}");
    }

    #[test]
    fn non_positive_area_is_domain_error() {
        assert!(matches!(to_specific_discharge(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(to_specific_discharge(1.0, -3.0), Err(Error::Domain(_))));
        assert!(to_specific_discharge(1.0, f64::NAN).is_err());
    }

    #[test]
    fn missing_stays_missing() {
        let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let s = DailySeries::new(start, vec![Some(86.4), None]).unwrap();
        let out = series_to_specific_discharge(&s, 86.4).unwrap();
        assert_eq!(out.values()[1], None);
        assert!((out.values()[0].unwrap() - 86.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn conversion_is_linear_in_flow_and_inverse_in_area(
            q in 0.0f64..1e5, area in 1e-2f64..1e6
        ) {
            let base = to_specific_discharge(q, area).unwrap();
            let dq = to_specific_discharge(2.0 * q, area).unwrap();
            let da = to_specific_discharge(q, 2.0 * area).unwrap();
            prop_assert!((dq - 2.0 * base).abs() <= 1e-12 * base.abs().max(1.0));
            prop_assert!((da - base / 2.0).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }
}
