//! Network curation: polygon overlap between catchments, duplicate
//! resolution driven by discharge agreement, and time-series quality control.

mod clip;
mod dedup;
mod geometry;
mod qc;

pub use clip::{intersection_area, overlap_fraction};
pub use dedup::{
    candidate_pairs, classify_pair, evaluate_pairs, pairwise_kge, resolve_duplicates, DedupConfig,
    PairVerdict, RemovalEntry, RemovalReason, Resolution, Verdict,
};
pub use geometry::{parse_geojson, polygon_area, read_geojson, to_geojson, BBox, BasinGeometry, Point};
pub use qc::{check_station, flatline_ratio, qc_filter, QcConfig, QcOutcome, QcReason, QcRejection};
