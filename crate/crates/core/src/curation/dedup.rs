use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clip::overlap_fraction;
use super::geometry::BasinGeometry;
use crate::error::{Error, Result};
use crate::hydrodata::{align, DailySeries, StationRecord};
use crate::metrics::kge2009;

/// Thresholds of the duplicate decision table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub overlap_min: f64,
    pub duplicate_kge: f64,
    pub discard_kge: f64,
    /// Minimum number of jointly observed days for a pairwise KGE.
    pub min_overlap_days: usize,
    /// Observations from this date on count towards survivor selection.
    pub retention_since: NaiveDate,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            overlap_min: 0.7,
            duplicate_kge: 0.95,
            discard_kge: 0.6,
            min_overlap_days: 365,
            retention_since: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Distinct,
    StrictDuplicate,
    DiscardBoth,
    RetainBothNested,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Distinct => "distinct",
            Verdict::StrictDuplicate => "strict_duplicate",
            Verdict::DiscardBoth => "discard_both",
            Verdict::RetainBothNested => "retain_both_nested",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Verdict::Distinct,
            Verdict::StrictDuplicate,
            Verdict::DiscardBoth,
            Verdict::RetainBothNested,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| Error::domain(format!("unknown verdict `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub id_a: String,
    pub id_b: String,
    pub overlap_fraction: f64,
    pub kge: Option<f64>,
    pub verdict: Verdict,
}

/// KGE (2009 form) between two gauges over their jointly observed days.
///
/// `None` below `min_overlap_days` shared observations or when either
/// series is constant on the overlap.
pub fn pairwise_kge(a: &DailySeries, b: &DailySeries, min_overlap_days: usize) -> Option<f64> {
    let al = align(a, b);
    if al.len() < min_overlap_days.max(2) {
        return None;
    }
    kge2009(&al.a, &al.b)
}

pub fn classify_pair(overlap: f64, kge: Option<f64>, cfg: &DedupConfig) -> Verdict {
    if overlap < cfg.overlap_min {
        return Verdict::Distinct;
    }
    match kge {
        Some(k) if k >= cfg.duplicate_kge => Verdict::StrictDuplicate,
        Some(k) if k >= cfg.discard_kge => Verdict::RetainBothNested,
        // Low agreement, or no usable overlap to certify either gauge.
        _ => Verdict::DiscardBoth,
    }
}

/// Index pairs whose bounding boxes intersect, found by a sweep over sorted
/// minimum longitudes.
pub fn candidate_pairs(geoms: &[BasinGeometry]) -> Vec<(usize, usize)> {
    let boxes: Vec<_> = geoms.iter().map(BasinGeometry::bbox).collect();
    let mut order: Vec<usize> = (0..geoms.len()).collect();
    order.sort_by(|&i, &j| boxes[i].min.0.total_cmp(&boxes[j].min.0).then(i.cmp(&j)));
    let mut out = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].min.0 > boxes[i].max.0 {
                break;
            }
            if boxes[i].intersects(&boxes[j]) {
                out.push((i.min(j), i.max(j)));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Computes overlap (and, for overlapping pairs, KGE) for every candidate
/// pair. Pairs with zero overlap are omitted.
pub fn evaluate_pairs(
    geoms: &[BasinGeometry],
    discharge: &BTreeMap<String, DailySeries>,
    cfg: &DedupConfig,
) -> Result<Vec<PairVerdict>> {
    let pairs = candidate_pairs(geoms);
    let verdicts = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Option<PairVerdict>> {
            let (a, b) = (&geoms[i], &geoms[j]);
            let overlap = overlap_fraction(a, b)?;
            if overlap <= 0.0 {
                return Ok(None);
            }
            let kge = if overlap >= cfg.overlap_min {
                match (discharge.get(&a.station_id), discharge.get(&b.station_id)) {
                    (Some(qa), Some(qb)) => pairwise_kge(qa, qb, cfg.min_overlap_days),
                    _ => None,
                }
            } else {
                None
            };
            let (id_a, id_b) = if a.station_id <= b.station_id {
                (a.station_id.clone(), b.station_id.clone())
            } else {
                (b.station_id.clone(), a.station_id.clone())
            };
            Ok(Some(PairVerdict {
                id_a,
                id_b,
                overlap_fraction: overlap,
                kge,
                verdict: classify_pair(overlap, kge, cfg),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(verdicts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalReason {
    /// Lost the survivor selection inside a duplicate component.
    StrictDuplicate,
    /// Endpoint of a low-agreement overlapping pair.
    DiscardBoth,
    /// Would be discarded, but already kept as a duplicate-component survivor.
    /// The station is retained and flagged for manual review.
    ConflictRetained,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::StrictDuplicate => "strict_duplicate",
            RemovalReason::DiscardBoth => "discard_both",
            RemovalReason::ConflictRetained => "conflict_retained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEntry {
    pub station_id: String,
    pub reason: RemovalReason,
    /// Survivor of the component, or the other pair endpoint.
    pub related: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Resolution {
    pub retained: BTreeSet<String>,
    pub log: Vec<RemovalEntry>,
}

impl Resolution {
    pub fn removed(&self) -> BTreeSet<&str> {
        self.log
            .iter()
            .filter(|e| e.reason != RemovalReason::ConflictRetained)
            .map(|e| e.station_id.as_str())
            .collect()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Keeps one station per strict-duplicate component and drops both ends of
/// low-agreement pairs.
///
/// The survivor of a component has the most observations on or after
/// `cfg.retention_since`; ties go to the smallest station id.
pub fn resolve_duplicates(
    verdicts: &[PairVerdict],
    records: &[StationRecord],
    cfg: &DedupConfig,
) -> Resolution {
    let ids: Vec<&str> = records.iter().map(|r| r.station_id.as_str()).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let recent: Vec<usize> = records
        .iter()
        .map(|r| r.discharge.count_observed_since(cfg.retention_since))
        .collect();

    let mut ds = DisjointSet::new(records.len());
    for v in verdicts.iter().filter(|v| v.verdict == Verdict::StrictDuplicate) {
        if let (Some(&a), Some(&b)) = (index.get(v.id_a.as_str()), index.get(v.id_b.as_str())) {
            ds.union(a, b);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..records.len() {
        components.entry(ds.find(i)).or_default().push(i);
    }

    let mut removed: BTreeSet<usize> = BTreeSet::new();
    let mut protected: BTreeSet<usize> = BTreeSet::new();
    let mut log = Vec::new();
    for members in components.values().filter(|m| m.len() > 1) {
        let survivor = *members
            .iter()
            .max_by(|&&x, &&y| recent[x].cmp(&recent[y]).then_with(|| ids[y].cmp(ids[x])))
            .expect("non-empty component");
        protected.insert(survivor);
        let mut losers: Vec<usize> = members.iter().copied().filter(|&m| m != survivor).collect();
        losers.sort_by_key(|&m| ids[m]);
        for m in losers {
            removed.insert(m);
            log.push(RemovalEntry {
                station_id: ids[m].to_string(),
                reason: RemovalReason::StrictDuplicate,
                related: ids[survivor].to_string(),
            });
        }
    }

    for v in verdicts.iter().filter(|v| v.verdict == Verdict::DiscardBoth) {
        let (Some(&a), Some(&b)) = (index.get(v.id_a.as_str()), index.get(v.id_b.as_str())) else {
            continue;
        };
        for (x, other) in [(a, b), (b, a)] {
            if removed.contains(&x) {
                continue;
            }
            let reason = if protected.contains(&x) {
                RemovalReason::ConflictRetained
            } else {
                removed.insert(x);
                RemovalReason::DiscardBoth
            };
            log.push(RemovalEntry {
                station_id: ids[x].to_string(),
                reason,
                related: ids[other].to_string(),
            });
        }
    }

    let retained = (0..records.len())
        .filter(|i| !removed.contains(i))
        .map(|i| ids[i].to_string())
        .collect();
    Resolution { retained, log }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn rec(id: &str, n_recent: usize) -> StationRecord {
        let vals: Vec<f64> = (0..n_recent).map(|i| i as f64).collect();
        StationRecord::new(id, 1.0, DailySeries::from_dense(date(2016, 1, 1), vals), vec![], 0.0).unwrap()
    }

    fn pair(a: &str, b: &str, v: Verdict) -> PairVerdict {
        PairVerdict {
            id_a: a.into(),
            id_b: b.into(),
            overlap_fraction: 0.9,
            kge: None,
            verdict: v,
        }
    }

    #[test]
    fn decision_table() {
        let c = DedupConfig::default();
        assert_eq!(classify_pair(0.8, Some(0.97), &c), Verdict::StrictDuplicate);
        assert_eq!(classify_pair(0.75, Some(0.50), &c), Verdict::DiscardBoth);
        assert_eq!(classify_pair(0.9, Some(0.80), &c), Verdict::RetainBothNested);
        assert_eq!(classify_pair(0.5, Some(0.99), &c), Verdict::Distinct);
        assert_eq!(classify_pair(0.9, None, &c), Verdict::DiscardBoth);
        assert_eq!(classify_pair(0.5, None, &c), Verdict::Distinct);
    }

    #[test]
    fn pairwise_kge_rules() {
        let a = DailySeries::from_dense(date(2000, 1, 1), (0..400).map(|i| (i as f64 * 0.1).sin() + 2.0));
        assert_eq!(pairwise_kge(&a, &a, 365), Some(1.0));
        let shifted = a.map(|v| v + 0.5).unwrap();
        assert!(pairwise_kge(&a, &shifted, 365).unwrap() < 1.0);
        let later = DailySeries::from_dense(date(2010, 1, 1), [1.0, 2.0]);
        assert_eq!(pairwise_kge(&a, &later, 365), None);
        let short = a.slice(date(2000, 1, 1), date(2000, 6, 1));
        assert_eq!(pairwise_kge(&short, &short, 365), None);
    }

    #[test]
    fn longest_recent_record_survives() {
        let recs = vec![rec("A", 1000), rec("B", 500)];
        let res = resolve_duplicates(&[pair("A", "B", Verdict::StrictDuplicate)], &recs, &DedupConfig::default());
        assert_eq!(res.retained, BTreeSet::from(["A".to_string()]));
        assert_eq!(res.log[0].station_id, "B");
    }

    #[test]
    fn tie_keeps_smaller_id() {
        let recs = vec![rec("Z", 10), rec("M", 10)];
        let res = resolve_duplicates(&[pair("M", "Z", Verdict::StrictDuplicate)], &recs, &DedupConfig::default());
        assert_eq!(res.retained, BTreeSet::from(["M".to_string()]));
    }

    #[test]
    fn chains_collapse_to_one_survivor() {
        let recs = vec![rec("A", 5), rec("B", 50), rec("C", 7), rec("D", 1)];
        let v = [pair("A", "B", Verdict::StrictDuplicate), pair("B", "C", Verdict::StrictDuplicate)];
        let res = resolve_duplicates(&v, &recs, &DedupConfig::default());
        assert_eq!(res.retained, BTreeSet::from(["B".to_string(), "D".to_string()]));
    }

    #[test]
    fn discard_both_and_conflicts() {
        let recs = vec![rec("A", 50), rec("B", 5), rec("C", 7), rec("D", 1), rec("E", 3)];
        let v = [
            pair("A", "B", Verdict::StrictDuplicate),
            pair("A", "C", Verdict::DiscardBoth),
            pair("D", "E", Verdict::DiscardBoth),
            pair("C", "E", Verdict::RetainBothNested),
        ];
        let res = resolve_duplicates(&v, &recs, &DedupConfig::default());
        assert_eq!(res.retained, BTreeSet::from(["A".to_string()]));
        assert!(res
            .log
            .iter()
            .any(|e| e.station_id == "A" && e.reason == RemovalReason::ConflictRetained));
        assert_eq!(res.removed(), BTreeSet::from(["B", "C", "D", "E"]));
    }

    #[test]
    fn sweep_finds_box_overlaps_only() {
        let sq = |id: &str, x: f64| {
            BasinGeometry::new(id, vec![vec![(x, 0.0), (x + 1.0, 0.0), (x + 1.0, 1.0), (x, 1.0)]]).unwrap()
        };
        let gs = vec![sq("a", 0.0), sq("b", 0.5), sq("c", 3.0), sq("d", 3.9)];
        assert_eq!(candidate_pairs(&gs), vec![(0, 1), (2, 3)]);
    }
}
