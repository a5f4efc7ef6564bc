use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SUBCOMMANDS: [&str; 8] = ["fetch", "verify", "featurize", "train", "evaluate", "sweep", "analyze", "synth"];

fn handmove(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handmove"))
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = handmove(cwd, args);
    assert!(
        out.status.success(),
        "handmove {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file below `root` with its contents.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

/// Ten small synthetic subjects and their feature store, built once per test.
struct Fixture {
    root: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path();
        ok(dir, &["synth", "--subjects", "10", "--trials-per-run", "4", "--seed", "3", "--out", "data"]);
        ok(dir, &["featurize", "--data", "data", "--out", "feat"]);
        Fixture { root }
    }

    fn path(&self) -> &Path {
        self.root.path()
    }
}

#[test]
fn help_matches_golden() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let cwd = std::env::temp_dir();
    let mut cases = vec![("handmove".to_string(), vec!["--help"])];
    for s in SUBCOMMANDS {
        cases.push((s.to_string(), vec![s, "--help"]));
    }
    for (name, args) in cases {
        let out = ok(&cwd, &args);
        let text = String::from_utf8(out.stdout).unwrap();
        let file = golden.join(format!("{name}.txt"));
        if update {
            std::fs::create_dir_all(&golden).unwrap();
            std::fs::write(&file, &text).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&file)
            .unwrap_or_else(|_| panic!("missing {}; rerun with UPDATE_GOLDEN=1", file.display()));
        assert_eq!(text, want, "{name} --help changed; rerun with UPDATE_GOLDEN=1 if intended");
    }
}

#[test]
fn featurize_writes_seven_by_297_tensors() {
    let fx = Fixture::new();
    let summary: Value = serde_json::from_slice(&std::fs::read(fx.path().join("feat/features.json")).unwrap()).unwrap();
    assert_eq!(summary["n_steps"], 7);
    assert_eq!(summary["dim"], 297);
    assert_eq!(summary["pairs"].as_array().unwrap().len(), 27);
    assert_eq!(summary["subjects"].as_array().unwrap().len(), 10);
    assert_eq!(summary["n_tensors"], 10 * 3 * 4);
}

#[test]
fn train_is_deterministic_and_stays_in_out() {
    let fx = Fixture::new();
    let dir = fx.path();
    let before = snapshot(dir);
    let args = |out: &'static str| {
        vec![
            "train", "--features", "feat/features.bin", "--scheme", "cross", "--seed", "7", "--epochs", "2",
            "--hidden", "8", "--out", out,
        ]
    };
    ok(dir, &args("run1"));
    ok(dir, &args("run2"));
    let a = std::fs::read(dir.join("run1/metrics.json")).unwrap();
    let b = std::fs::read(dir.join("run2/metrics.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(dir.join("run1/roc.csv")).unwrap(), std::fs::read(dir.join("run2/roc.csv")).unwrap());

    let after = snapshot(dir);
    for (path, bytes) in &after {
        if path.starts_with("run1") || path.starts_with("run2") {
            continue;
        }
        assert_eq!(before.get(path), Some(bytes), "{} written outside --out", path.display());
    }
    let m: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(m["scheme"], "cross");
    assert_eq!(m["folds"].as_array().unwrap().len(), 10);
    let cfg: Value = serde_json::from_slice(&std::fs::read(dir.join("run1/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["model"]["hidden"], 8);
}

#[test]
fn saved_model_evaluates() {
    let fx = Fixture::new();
    let dir = fx.path();
    ok(
        dir,
        &[
            "train", "--features", "feat/features.bin", "--method", "lstm", "--epochs", "1", "--hidden", "4",
            "--save-model", "--out", "tr",
        ],
    );
    ok(dir, &["evaluate", "--checkpoint", "tr/model.ckpt", "--features", "feat/features.bin", "--out", "ev"]);
    let m: Value = serde_json::from_slice(&std::fs::read(dir.join("ev/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["n"], 120);
    let preds = std::fs::read_to_string(dir.join("ev/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 121);
}

#[test]
fn sweep_writes_one_row_per_size() {
    let fx = Fixture::new();
    let dir = fx.path();
    let out = ok(dir, &["sweep", "--data", "data", "--sizes", "0.25,2.0", "--method", "logreg", "--out", "sw"]);
    let table: Value = serde_json::from_slice(&std::fs::read(dir.join("sw/sweep.json")).unwrap()).unwrap();
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["segment_len"], 0.25);
    assert_eq!(rows[1]["segment_len"], 2.0);
    let md = String::from_utf8(out.stdout).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| 0.25") || l.starts_with("| 2")).count(), 2);
    assert!(dir.join("sw/segment_0.25/metrics.json").is_file());
    assert_eq!(std::fs::read_to_string(dir.join("sw/sweep.csv")).unwrap().lines().count(), 3);
}

#[test]
fn analyze_writes_reports() {
    let fx = Fixture::new();
    let dir = fx.path();
    ok(dir, &["analyze", "--features", "feat/features.bin", "--trees", "5", "--top-k", "10", "--out", "an"]);
    for f in ["importance.json", "top_features.json", "sensor_ranking.csv", "quartiles.json"] {
        assert!(dir.join("an").join(f).is_file(), "{f}");
    }
    let ranking = std::fs::read_to_string(dir.join("an/sensor_ranking.csv")).unwrap();
    assert_eq!(ranking.lines().next(), Some("pair,count"));
    assert_eq!(ranking.lines().count(), 28);
}

#[test]
fn config_file_and_flag_precedence() {
    let fx = Fixture::new();
    let dir = fx.path();
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"seed": 11, "experiment": {"scheme": "cross", "model": {"hidden": 5, "epochs": 1}}}"#,
    )
    .unwrap();
    ok(dir, &["train", "--config", "cfg.json", "--features", "feat/features.bin", "--hidden", "6", "--out", "c"]);
    let cfg: Value = serde_json::from_slice(&std::fs::read(dir.join("c/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 11);
    assert_eq!(cfg["model"]["hidden"], 6);
    assert_eq!(cfg["model"]["epochs"], 1);
}

#[test]
fn verify_and_fetch_dry_run() {
    let fx = Fixture::new();
    let dir = fx.path();
    ok(dir, &["verify", "--data", "data", "--out", "v"]);
    let v: Value = serde_json::from_slice(&std::fs::read(dir.join("v/verify.json")).unwrap()).unwrap();
    assert!(v["missing"].as_array().unwrap().is_empty());
    std::fs::write(dir.join("data/S001/S001R03.edf"), b"0       truncated").unwrap();
    let out = handmove(dir, &["verify", "--data", "data", "--out", "v2"]);
    assert!(!out.status.success());

    let out = ok(dir, &["fetch", "--dry-run", "--out", "raw"]);
    let urls = String::from_utf8(out.stdout).unwrap();
    assert_eq!(urls.lines().count(), 109 * 3);
    assert!(urls.lines().next().unwrap().ends_with("/S001/S001R03.edf"));
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = handmove(d, &["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--no-such-flag"));

    let out = handmove(d, &["train", "--features", "missing.bin", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.bin"));

    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    let out = handmove(d, &["featurize", "--config", "bad.json", "--data", ".", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));

    std::fs::write(d.join("unknown.json"), r#"{"trainer": {}}"#).unwrap();
    let out = handmove(d, &["featurize", "--config", "unknown.json", "--data", ".", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));

    let out = handmove(d, &["train", "--features", "x", "--scheme", "diagonal"]);
    assert_eq!(out.status.code(), Some(2));
}
