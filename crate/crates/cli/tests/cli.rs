mod common;

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kpz-renorm"));
    c.env_remove("KPZ_RENORM_SEED");
    c
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = common::tiny_config(&dir.join("out"));
    let path = dir.join("tiny.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path
}

fn summary(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn resolution_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "qv", "--n", "1024", "--points", "256", "--steps", "100", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("M/(4L)") && err.contains("qv.levels"), "{err}");
    assert!(!dir.path().join("qv.json").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "master_seed = 1\nreplica_count = 3\n").unwrap();
    let o = bin().arg("qv").arg("--config").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replica_count"), "{}", stderr(&o));
}

#[test]
fn seed_precedence_file_env_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.arg("qv").arg("--config").arg(&cfg);
        if let Some(e) = env {
            c.env("KPZ_RENORM_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        let o = c.output().unwrap();
        assert!(
            o.status.code() == Some(0) || o.status.code() == Some(1),
            "{}",
            stderr(&o)
        );
        summary(&out, "qv.json")["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None, None), 42);
    assert_eq!(run(Some("5"), None), 5);
    assert_eq!(run(Some("5"), Some("6")), 6);
}

#[test]
fn single_experiment_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = bin()
        .arg("section")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let out = dir.path().join("out");
    let s = summary(&out, "section.json");
    assert_eq!(s["experiment"], "section");
    let pass = s["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"].as_bool().unwrap());
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 1 }));
    let csv = std::fs::read_to_string(out.join("section.csv")).unwrap();
    assert!(csv.starts_with("eps_steps,eps,value,standard_error,target,error,ratio\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn dump_flag_writes_reloadable_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = bin()
        .arg("ito")
        .arg("--config")
        .arg(&cfg)
        .args(["--replicas", "1", "--dump"])
        .output()
        .unwrap();
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let dumps = dir.path().join("out/dumps");
    let noise = kpz_core::dump::read_noise_dump(&dumps.join("ladder_noise_r0.bin")).unwrap();
    let fresh = kpz_core::sample_white_noise(noise.grid(), noise.seed(), 0);
    assert_eq!(noise.increments(), fresh.increments());
    let (meta, values) = kpz_core::dump::read_dump(&dumps.join("ladder_h_r0.bin")).unwrap();
    assert_eq!(meta.kind, "field_path");
    assert_eq!(values.len(), meta.rows * meta.cols);
}

#[test]
fn all_is_reproducible_and_matches_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let mut snapshots = Vec::new();
    for threads in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path());
        let o = bin()
            .arg("all")
            .arg("--config")
            .arg(&cfg)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
        let out = dir.path().join("out");
        let s = summary(&out, "summary.json");
        assert_eq!(s["experiments"].as_array().unwrap().len(), 7);
        let mut bad = s.clone();
        bad["seed"] = serde_json::json!("forty-two");
        assert!(!validator.is_valid(&bad));
        for entry in std::fs::read_dir(&out).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "json") {
                let v: serde_json::Value =
                    serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
                let errors: Vec<String> =
                    validator.iter_errors(&v).map(|e| e.to_string()).collect();
                assert!(errors.is_empty(), "{}: {errors:?}", p.display());
            }
        }
        snapshots.push(common::snapshot(&out));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn desk_toml_lists_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../desk.toml");
    let cfg = kpz_renorm::ExperimentConfig::from_toml_file(&path).unwrap();
    assert_eq!(cfg, kpz_renorm::ExperimentConfig::default());
}
