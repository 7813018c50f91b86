//! Paired comparison of two models' per-station skill tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrodata::io::{create, format_value, open, parse_value};
use crate::metrics::{median, SkillReport, Summary};

/// One row of a per-station skill table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSkill {
    pub station_id: String,
    pub area_km2: f64,
    pub skill: SkillReport,
}

const SKILL_HEADER: [&str; 10] = ["station_id", "area_km2", "n", "nse", "kge2009", "kge_prime", "r", "alpha", "beta", "gamma"];

pub fn write_skill_csv(path: &Path, rows: &[StationSkill]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SKILL_HEADER)?;
    for r in rows {
        let mut rec = vec![r.station_id.clone(), r.area_km2.to_string(), r.skill.n.to_string()];
        rec.extend(SkillReport::METRICS.iter().map(|m| format_value(r.skill.get(m))));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_skill_csv(path: &Path) -> Result<Vec<StationSkill>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column `{name}`")))
    };
    let idx: Vec<usize> = SKILL_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::parse(path, format!("row {}: bad {what}", line + 2));
        let num = |k: usize| parse_value(&rec[idx[k]]).map_err(|e| Error::parse(path, format!("row {}: {e}", line + 2)));
        let area = num(1)?.ok_or_else(|| bad("area_km2"))?;
        let n = rec[idx[2]].trim().parse::<usize>().map_err(|_| bad("n"))?;
        let skill = SkillReport {
            nse: num(3)?,
            kge2009: num(4)?,
            kge_prime: num(5)?,
            r: num(6)?,
            alpha: num(7)?,
            beta: num(8)?,
            gamma: num(9)?,
            n,
        };
        out.push(StationSkill { station_id: rec[idx[0]].to_string(), area_km2: area, skill });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Tie,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::A => "a",
            Winner::B => "b",
            Winner::Tie => "tie",
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Winner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Winner::A),
            "b" => Ok(Winner::B),
            "tie" => Ok(Winner::Tie),
            _ => Err(Error::domain(format!("unknown winner `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub station_id: String,
    pub area_km2: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `a - b`; undefined when either side is.
    pub delta: Option<f64>,
    pub winner: Winner,
}

/// Drainage-area class bounds in km^2, lower bound inclusive.
pub const AREA_CLASSES: [(&str, f64, f64); 3] = [
    ("<1000", 0.0, 1_000.0),
    ("1000-10000", 1_000.0, 10_000.0),
    (">10000", 10_000.0, f64::INFINITY),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaClassSummary {
    pub class: String,
    pub count: usize,
    pub median_a: Option<f64>,
    pub median_b: Option<f64>,
    pub iqr_a: Option<f64>,
    pub iqr_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMedians {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: Option<f64>,
}

/// Cross-tabulation of stations with negative KGE' under either model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureCrossTab {
    pub both: usize,
    pub only_a: usize,
    pub only_b: usize,
    pub neither: usize,
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub metric: String,
    pub n_joined: usize,
    pub only_in_a: usize,
    pub only_in_b: usize,
    pub medians: BTreeMap<String, MetricMedians>,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub win_fraction_a: f64,
    pub win_fraction_b: f64,
    pub tie_fraction: f64,
    pub kge_prime_negative: FailureCrossTab,
    pub area_classes: Vec<AreaClassSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
}

fn area_class(area: f64) -> usize {
    AREA_CLASSES.iter().position(|&(_, lo, hi)| area >= lo && area < hi).unwrap_or(0)
}

/// Joins two skill tables on station id and compares them on `metric`
/// (higher is better).
pub fn benchmark_compare(a: &[StationSkill], b: &[StationSkill], metric: &str) -> Result<BenchmarkResult> {
    if !SkillReport::METRICS.contains(&metric) {
        return Err(Error::domain(format!("unknown metric `{metric}`")));
    }
    let index_b: BTreeMap<&str, &StationSkill> = b.iter().map(|s| (s.station_id.as_str(), s)).collect();
    let mut joined: Vec<(&StationSkill, &StationSkill)> = a
        .iter()
        .filter_map(|sa| index_b.get(sa.station_id.as_str()).map(|sb| (sa, *sb)))
        .collect();
    if joined.is_empty() {
        return Err(Error::domain("the two result tables share no station"));
    }
    joined.sort_by(|x, y| x.0.station_id.cmp(&y.0.station_id));
    let n = joined.len();

    let rows: Vec<BenchmarkRow> = joined
        .iter()
        .map(|(sa, sb)| {
            let (va, vb) = (sa.skill.get(metric), sb.skill.get(metric));
            let delta = va.zip(vb).map(|(x, y)| x - y);
            let winner = match delta {
                Some(d) if d > 0.0 => Winner::A,
                Some(d) if d < 0.0 => Winner::B,
                _ => Winner::Tie,
            };
            BenchmarkRow { station_id: sa.station_id.clone(), area_km2: sa.area_km2, a: va, b: vb, delta, winner }
        })
        .collect();

    let mut medians = BTreeMap::new();
    for m in SkillReport::METRICS {
        let col = |f: &dyn Fn(&(&StationSkill, &StationSkill)) -> Option<f64>| -> Vec<f64> { joined.iter().filter_map(f).collect() };
        let ma = col(&|p| p.0.skill.get(m));
        let mb = col(&|p| p.1.skill.get(m));
        let md = col(&|p| p.0.skill.get(m).zip(p.1.skill.get(m)).map(|(x, y)| x - y));
        medians.insert(m.to_string(), MetricMedians { a: median(&ma), b: median(&mb), delta: median(&md) });
    }

    let count = |w: Winner| rows.iter().filter(|r| r.winner == w).count();
    let (wins_a, wins_b, ties) = (count(Winner::A), count(Winner::B), count(Winner::Tie));

    let mut cross = FailureCrossTab::default();
    for (sa, sb) in &joined {
        match (sa.skill.kge_prime, sb.skill.kge_prime) {
            (Some(x), Some(y)) => match (x < 0.0, y < 0.0) {
                (true, true) => cross.both += 1,
                (true, false) => cross.only_a += 1,
                (false, true) => cross.only_b += 1,
                (false, false) => cross.neither += 1,
            },
            _ => cross.undefined += 1,
        }
    }

    let area_classes = AREA_CLASSES
        .iter()
        .enumerate()
        .map(|(k, &(label, _, _))| {
            let members: Vec<&BenchmarkRow> = rows.iter().filter(|r| area_class(r.area_km2) == k).collect();
            let sa = Summary::of(&members.iter().map(|r| r.a).collect::<Vec<_>>());
            let sb = Summary::of(&members.iter().map(|r| r.b).collect::<Vec<_>>());
            AreaClassSummary {
                class: label.to_string(),
                count: members.len(),
                median_a: sa.median,
                median_b: sb.median,
                iqr_a: sa.iqr(),
                iqr_b: sb.iqr(),
            }
        })
        .collect();

    let summary = BenchmarkSummary {
        metric: metric.to_string(),
        n_joined: n,
        only_in_a: a.len() - n,
        only_in_b: b.len() - n,
        medians,
        wins_a,
        wins_b,
        ties,
        win_fraction_a: wins_a as f64 / n as f64,
        win_fraction_b: wins_b as f64 / n as f64,
        tie_fraction: ties as f64 / n as f64,
        kge_prime_negative: cross,
        area_classes,
    };
    Ok(BenchmarkResult { rows, summary })
}

const ROW_HEADER: [&str; 6] = ["station_id", "area_km2", "a", "b", "delta", "winner"];

pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.station_id.clone(),
            r.area_km2.to_string(),
            format_value(r.a),
            format_value(r.b),
            format_value(r.delta),
            r.winner.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_benchmark_csv(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    if rdr.headers()?.iter().ne(ROW_HEADER.iter().copied()) {
        return Err(Error::parse(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let err = |e: String| Error::parse(path, format!("row {}: {e}", line + 2));
        let num = |k: usize| parse_value(&rec[k]).map_err(err);
        out.push(BenchmarkRow {
            station_id: rec[0].to_string(),
            area_km2: num(1)?.ok_or_else(|| err("missing area".into()))?,
            a: num(2)?,
            b: num(3)?,
            delta: num(4)?,
            winner: rec[5].parse().map_err(|e: Error| err(e.to_string()))?,
        });
    }
    Ok(out)
}
