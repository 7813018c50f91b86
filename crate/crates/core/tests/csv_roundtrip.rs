use chrono::NaiveDate;
use floodcast::benchmark::{read_benchmark_csv, read_skill_csv, write_benchmark_csv, write_skill_csv, BenchmarkRow, StationSkill, Winner};
use floodcast::hydrodata::io::{read_forcing_csv, read_series_csv, write_forcing_csv, write_series_csv};
use floodcast::hydrodata::{DailySeries, ForcingSeries, ForcingSource};
use floodcast::metrics::SkillReport;
use proptest::prelude::*;

fn value() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 4 => (-1e6f64..1e6).prop_map(Some), 1 => any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Some)]
}

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 3, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_roundtrip(mut vals in prop::collection::vec(value(), 1..200)) {
        // Leading/trailing gaps are not representable: the file starts and ends on observed rows.
        vals[0] = Some(1.0);
        *vals.last_mut().unwrap() = Some(2.0);
        let s = DailySeries::new(day0(), vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_series_csv(&p, &s).unwrap();
        prop_assert_eq!(read_series_csv(&p).unwrap(), s);
    }

    #[test]
    fn forcing_roundtrip(cols in prop::collection::vec(prop::collection::vec(0f64..1e4, 30), 5)) {
        let vars: Vec<DailySeries> = cols.into_iter().map(|c| DailySeries::from_dense(day0(), c)).collect();
        let f = ForcingSeries::new(ForcingSource::ForecastControl, 3, vars.try_into().unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_forcing_csv(&p, &f).unwrap();
        prop_assert_eq!(read_forcing_csv(&p, ForcingSource::ForecastControl, 3).unwrap(), f);
    }

    #[test]
    fn skill_and_benchmark_roundtrip(rows in prop::collection::vec((1e-3f64..1e6, 0usize..10_000, prop::collection::vec(value(), 7)), 1..30)) {
        let skills: Vec<StationSkill> = rows
            .iter()
            .enumerate()
            .map(|(i, (area, n, m))| StationSkill {
                station_id: format!("st{i}"),
                area_km2: *area,
                skill: SkillReport { nse: m[0], kge2009: m[1], kge_prime: m[2], r: m[3], alpha: m[4], beta: m[5], gamma: m[6], n: *n },
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("skill.csv");
        write_skill_csv(&p, &skills).unwrap();
        prop_assert_eq!(read_skill_csv(&p).unwrap(), skills.clone());

        let bench: Vec<BenchmarkRow> = skills
            .iter()
            .map(|s| BenchmarkRow {
                station_id: s.station_id.clone(),
                area_km2: s.area_km2,
                a: s.skill.nse,
                b: s.skill.kge_prime,
                delta: s.skill.r,
                winner: [Winner::A, Winner::B, Winner::Tie][s.skill.n % 3],
            })
            .collect();
        let p = dir.path().join("rows.csv");
        write_benchmark_csv(&p, &bench).unwrap();
        prop_assert_eq!(read_benchmark_csv(&p).unwrap(), bench);
    }
}
