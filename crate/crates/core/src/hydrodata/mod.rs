//! Data model shared by every other module: daily series, station records,
//! forcing tables, seasonal encodings and normalization statistics.

mod encoding;
mod forcing;
pub mod io;
mod scaler;
mod series;
mod station;

pub use encoding::{encode_seasonality, N_SEASONAL, YEAR_PERIOD_DAYS};
pub use forcing::{ForcingSeries, ForcingSource, Variable};
pub use scaler::{apply_scaler, fit_scaler, static_input_names, FeatureStats, ScalerStats};
pub(crate) use scaler::population_std;
pub use series::{align, Aligned, DailySeries};
pub use station::{series_to_specific_discharge, to_specific_discharge, StationRecord};
