//! Gumbel return-period thresholds from annual maxima and dual-threshold
//! flood-event verification.

mod events;
mod gumbel;

pub use events::{aggregate_tallies, dual_threshold_verify, extract_exceedances, match_events, Counts, EventTally};
pub use gumbel::{
    annual_maxima, fit_thresholds, gumbel_fit, return_level, sample_l_moments, AnnualMaxima, GumbelThresholds,
    ReturnLevel, ThresholdConfig, ThresholdSource, Unfitted, EULER_MASCHERONI, STANDARD_RETURN_PERIODS,
};
