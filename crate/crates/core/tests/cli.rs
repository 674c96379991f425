use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A scratch directory holding the sample source plus `config` (edited by `edit`).
fn workspace(config: &str, edit: impl FnOnce(&mut Value)) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for f in ["source.bin", "source.bin.json", "grid.json"] {
        std::fs::copy(configs().join(f), dir.path().join(f)).unwrap();
    }
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(configs().join(config)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    (dir, path)
}

fn physrand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_physrand")).args(args).output().unwrap()
}

fn extract(config: &Path) -> Output {
    physrand(&["extract", "--config", config.to_str().unwrap()])
}

fn report(dir: &Path, v: &Value) -> Value {
    let rel = v["output"]["report_path"].as_str().unwrap();
    serde_json::from_str(&std::fs::read_to_string(dir.join(rel)).unwrap()).unwrap()
}

fn config_value(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn honest_run_accepts_and_writes_output() {
    let (dir, cfg) = workspace("honest.json", |_| {});
    let out = extract(&cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = config_value(&cfg);
    let r = report(dir.path(), &v);
    assert_eq!(r["accepted"], true);
    let l = v["master"]["seeded"]["output_len"].as_u64().unwrap() as usize;
    let z = std::fs::read(dir.path().join(v["output"]["z_path"].as_str().unwrap())).unwrap();
    assert_eq!(z.len(), l.div_ceil(8));
    assert_eq!(r["output_len"], l);
}

#[test]
fn deterministic_cheater_is_rejected() {
    let (dir, cfg) = workspace("deterministic.json", |_| {});
    let out = extract(&cfg);
    assert_eq!(out.status.code(), Some(2));
    let v = config_value(&cfg);
    let r = report(dir.path(), &v);
    assert_eq!(r["accepted"], false);
    assert_eq!(r["output_hex"], Value::Null);
    assert!(r["rejects"].as_u64().unwrap() >= r["reject_threshold"].as_u64().unwrap());
    assert!(!dir.path().join(v["output"]["z_path"].as_str().unwrap()).exists());
}

#[test]
fn truncated_source_is_an_error() {
    let (dir, cfg) = workspace("honest.json", |_| {});
    std::fs::write(dir.path().join("source.bin"), [0xAB; 4]).unwrap();
    let out = extract(&cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("declared_n"));
}

#[test]
fn malformed_configs_name_the_field() {
    let cases: Vec<(Box<dyn Fn(&mut Value)>, &str)> = vec![
        (Box::new(|v: &mut Value| v["trials"] = "many".into()), "trials"),
        (Box::new(|v: &mut Value| v["master"]["eta"] = Value::Null), "master.eta"),
        (Box::new(|v: &mut Value| v["gallery"] = serde_json::json!({"kind": "nonexistent"})), "gallery"),
        (Box::new(|v: &mut Value| v.as_object_mut().unwrap().remove("seeds").map(|_| ()).unwrap()), "seeds"),
        (Box::new(|v: &mut Value| v["master"]["seeded"]["rounds"] = 7.into()), "master"),
        (Box::new(|v: &mut Value| v["schema_version"] = 2.into()), "schema_version"),
    ];
    for (edit, field) in cases {
        let (_dir, cfg) = workspace("honest.json", edit);
        let out = extract(&cfg);
        let err = String::from_utf8_lossy(&out.stderr).to_string();
        assert_eq!(out.status.code(), Some(1), "{err}");
        assert!(err.contains(field), "expected `{field}` in {err}");
    }
}

#[test]
fn reports_follow_the_published_schema() {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("../schemas/extract-report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for (config, timing) in [("honest.json", false), ("deterministic.json", true)] {
        let (dir, cfg) = workspace(config, |v| v["report"]["include_timing"] = timing.into());
        extract(&cfg);
        let r = report(dir.path(), &config_value(&cfg));
        let errors: Vec<String> = validator.iter_errors(&r).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{config}: {errors:?}");
        assert_eq!(r.get("timing").is_some(), timing);
    }
    let mut bad = serde_json::json!({"schema": "physrand.extract-report"});
    assert!(!validator.is_valid(&bad));
    bad["schema_version"] = 2.into();
    assert!(!validator.is_valid(&bad));
}

#[test]
fn identical_configs_give_identical_reports() {
    let read = || {
        let (dir, cfg) = workspace("honest.json", |_| {});
        extract(&cfg);
        let v = config_value(&cfg);
        (
            std::fs::read(dir.path().join(v["output"]["report_path"].as_str().unwrap())).unwrap(),
            std::fs::read(dir.path().join(v["output"]["z_path"].as_str().unwrap())).unwrap(),
        )
    };
    assert_eq!(read(), read());
}

#[test]
fn stats_command_on_short_and_long_input() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.bin");
    std::fs::write(&short, [0u8; 15]).unwrap();
    assert_eq!(physrand(&["stats", "--input", short.to_str().unwrap()]).status.code(), Some(1));
    let zeros = dir.path().join("zeros.bin");
    std::fs::write(&zeros, [0u8; 64]).unwrap();
    let out = physrand(&["stats", "--input", zeros.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["header"].as_str().unwrap().contains("certifies nothing"));
    assert_eq!(r["tests"][0]["name"], "monobit");
    assert_eq!(r["tests"][0]["pass"], false);
}

#[test]
fn sweep_rows_are_ordered_and_consistent() {
    let (dir, cfg) = workspace("honest.json", |v| v["trials"] = 30.into());
    let grid = dir.path().join("grid.json");
    let out = physrand(&["sweep", "--config", cfg.to_str().unwrap(), "--grid", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_rel = config_value(&cfg)["output"]["csv_path"].as_str().unwrap().to_string();
    let text = std::fs::read_to_string(dir.path().join(csv_rel)).unwrap();
    assert!(!text.contains('\r'));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let f = |r: &csv::StringRecord, name: &str| r[col(name)].parse::<f64>().unwrap();
    let order: Vec<(f64, f64)> = rows.iter().map(|r| (f(r, "eta"), f(r, "noise"))).collect();
    assert_eq!(order, vec![(0.25, 0.0), (0.25, 0.1), (0.5, 0.0), (0.5, 0.1)]);
    for pair in rows.chunks(2) {
        assert!(f(&pair[0], "accept_rate") >= f(&pair[1], "accept_rate"));
    }
    for r in &rows {
        assert!(f(r, "probe_distance") <= f(r, "soundness_bound"));
    }
}

#[test]
fn sweep_over_cap_is_a_resource_error() {
    let (dir, cfg) = workspace("honest.json", |v| v["grid_cap"] = 3.into());
    let grid = dir.path().join("grid.json");
    let out = physrand(&["sweep", "--config", cfg.to_str().unwrap(), "--grid", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resource limit"));
}
