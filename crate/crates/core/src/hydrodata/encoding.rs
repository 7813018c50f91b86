use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};

/// Length of the day-of-year cycle.
pub const YEAR_PERIOD_DAYS: f64 = 365.25;

/// Number of seasonal features produced by [`encode_seasonality`].
pub const N_SEASONAL: usize = 4;

/// Day-of-year and month as points on the unit circle:
/// `[sin doy, cos doy, sin month, cos month]`.
pub fn encode_seasonality(date: NaiveDate) -> [f64; N_SEASONAL] {
    encode_day_month(date.ordinal() as f64, date.month() as f64)
}

pub(crate) fn encode_day_month(doy: f64, month: f64) -> [f64; N_SEASONAL] {
    let (ds, dc) = (2.0 * PI * doy / YEAR_PERIOD_DAYS).sin_cos();
    let (ms, mc) = (2.0 * PI * month / 12.0).sin_cos();
    [ds, dc, ms, mc]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quarter_period_peaks_sine() {
        let e = encode_day_month(YEAR_PERIOD_DAYS * 0.25, 1.0);
        assert!((e[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn december_is_full_month_period() {
        let e = encode_seasonality(NaiveDate::from_ymd_opt(2021, 12, 15).unwrap());
        assert!(e[2].abs() < 1e-15);
        assert!((e[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn january_first() {
        let e = encode_seasonality(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        let w = 2.0 * PI / 365.25;
        let expected = [w.sin(), w.cos(), (PI / 6.0).sin(), (PI / 6.0).cos()];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn components_lie_on_unit_circle(days in 0i64..60_000) {
            let date = NaiveDate::from_ymd_opt(1900, 1, 1).unwrap() + chrono::Duration::days(days);
            let e = encode_seasonality(date);
            prop_assert!((e[0] * e[0] + e[1] * e[1] - 1.0).abs() < 1e-12);
            prop_assert!((e[2] * e[2] + e[3] * e[3] - 1.0).abs() < 1e-12);
            prop_assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
