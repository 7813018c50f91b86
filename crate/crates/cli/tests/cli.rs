use std::path::Path;
use std::process::Command;

fn floodcast() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_floodcast"));
    c.env("RUST_LOG", "warn");
    c
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let st = floodcast()
        .args(["synth", "--basins", "3", "--no-defects", "--seed", "5", "--dir"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(st.success());
    dir.join("manifest.toml")
}

#[test]
fn missing_manifest_is_validation_error() {
    let st = floodcast().args(["curate", "--manifest", "/does/not/exist.toml"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = floodcast().arg("curate").status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn malformed_input_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(&tmp.path().join("data"));
    let q = tmp.path().join("data/discharge/S0001.csv");
    let text = std::fs::read_to_string(&q).unwrap().replacen("2009-01-03,", "2009-01-03,abc", 1);
    std::fs::write(&q, text).unwrap();
    let st = floodcast().arg("curate").arg("--manifest").arg(&m).arg("--out-dir").arg(tmp.path().join("out")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn failing_stage_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(&tmp.path().join("data"));
    // QC that rejects every gauge leaves curation with nothing to retain.
    let text = std::fs::read_to_string(&m).unwrap();
    let text = text.replace("min_variance = 0.00000001", "min_variance = 1e12");
    assert!(text.contains("1e12"), "qc section not found");
    std::fs::write(&m, text).unwrap();
    let out = floodcast().arg("curate").arg("--manifest").arg(&m).arg("--out-dir").arg(tmp.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("curate"));
}

#[test]
fn standalone_benchmark_and_curate() {
    let tmp = tempfile::tempdir().unwrap();
    let m = synth(&tmp.path().join("data"));
    let out = tmp.path().join("out");
    let st = floodcast().arg("curate").arg("--manifest").arg(&m).arg("--out-dir").arg(&out).status().unwrap();
    assert!(st.success());
    assert!(out.join("curate/retained.csv").exists());

    let a = tmp.path().join("a.csv");
    std::fs::write(&a, "station_id,area_km2,n,nse,kge2009,kge_prime,r,alpha,beta,gamma\nX,10,5,0.5,0.5,0.6,0.9,1,1,1\nY,2000,5,0.1,0.2,0.3,0.5,1,1,1\n").unwrap();
    let bench = tmp.path().join("bench");
    let st = floodcast()
        .args(["benchmark", "--a"])
        .arg(&a)
        .arg("--b")
        .arg(&a)
        .arg("--out-dir")
        .arg(&bench)
        .output()
        .unwrap();
    assert!(st.status.success());
    let rows = std::fs::read_to_string(bench.join("rows.csv")).unwrap();
    assert_eq!(rows.matches(",tie").count(), 2, "{rows}");
}
