//! Deterministic skill scores and the wet-day Wasserstein forcing-shift diagnostic.

mod skill;
mod summary;
mod wasserstein;

pub use skill::{decompose, kge2009, kge_prime, nse, Components, SkillReport};
pub use summary::{ecdf, median, quantile_sorted, Summary};
pub use wasserstein::{
    normalized_w1, w1_distance, wet_day_filter, WassersteinReport, WetDayMode, WET_DAY_THRESHOLD_MM,
};
