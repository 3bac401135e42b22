use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("mini")
}

fn geopattern(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geopattern"))
        .arg("--config")
        .arg(mini().join("config.txt"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn second_run_is_fully_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let first = geopattern(tmp.path(), &["run-all"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stderr(&first).contains("cached"));
    let second = geopattern(tmp.path(), &["run-all"]);
    assert!(second.status.success());
    let lines: Vec<String> = stderr(&second).lines().filter(|l| !l.is_empty()).map(String::from).collect();
    assert_eq!(lines.len(), 7, "{lines:?}");
    assert!(lines.iter().all(|l| l.ends_with("cached")), "{lines:?}");
}

#[test]
fn tampered_upstream_artifact_names_the_producer() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(geopattern(tmp.path(), &["ingest"]).status.success());
    assert!(geopattern(tmp.path(), &["extract-relations"]).status.success());
    let rel = tmp.path().join("relations.csv");
    let mut bytes = std::fs::read(&rel).unwrap();
    bytes.extend_from_slice(b"junk\n");
    std::fs::write(&rel, bytes).unwrap();
    let o = geopattern(tmp.path(), &["build-forest"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("digest mismatch"), "{msg}");
    assert!(msg.contains("geopattern extract-relations"), "{msg}");
}

#[test]
fn printed_config_reloads_to_the_same_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = geopattern(tmp.path(), &["--set", "d_thresh_m=250", "--seed", "9", "--print-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = tmp.path().join("effective.txt");
    std::fs::write(&saved, &o.stdout).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_geopattern"))
        .arg("--config")
        .arg(&saved)
        .arg("--print-config")
        .output()
        .unwrap();
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(o.stdout, again.stdout);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("d_thresh_m = 250"), "{text}");
    assert!(text.contains("rng_seed = 9"), "{text}");
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = geopattern(tmp.path(), &["--set", "d_thresh_m=-5", "ingest"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = geopattern(tmp.path(), &["--set", "no_such_key=1", "ingest"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = geopattern(tmp.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_export_and_have_six_tests_per_bucket() {
    let tmp = tempfile::tempdir().unwrap();
    let o = geopattern(tmp.path(), &["report"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("has not run"), "{}", stderr(&o));
    assert!(geopattern(tmp.path(), &["run-all"]).status.success());
    let o = geopattern(tmp.path(), &["report", "--kind", "clusters", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["k"].as_u64().unwrap() >= 2);
    assert!(v["assignment"].as_object().unwrap().len() >= 2);

    let o = geopattern(tmp.path(), &["report", "--kind", "short_patterns", "--format", "json"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!rows.as_array().unwrap().is_empty());

    let mut rdr = csv::Reader::from_path(tmp.path().join("reports").join("longterm.csv")).unwrap();
    let mut per_bucket: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        per_bucket.entry((rec[0].to_string(), rec[1].to_string())).or_default().push(rec[2].to_string());
    }
    assert!(!per_bucket.is_empty());
    for (bucket, tests) in &per_bucket {
        assert_eq!(tests, &["T1", "T2", "T3", "T4", "T5", "T6"], "{bucket:?}");
    }
}
