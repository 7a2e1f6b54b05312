use std::path::Path;
use std::process::{Command, Output};

fn driveguard(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driveguard"))
        .args(args)
        .current_dir(dir)
        .env_remove("DRIVEGUARD_CONFIG")
        .env_remove("DRIVEGUARD_SEED")
        .env_remove("DRIVEGUARD_FOLDS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = driveguard(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty(), "stderr on success: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_of(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn write_spec(dir: &Path, epsilon: f64) -> String {
    let spec = serde_json::json!({ "subjects": 1, "trials_per_task": 25, "epsilon": epsilon });
    let path = dir.join("bench.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    path.display().to_string()
}

#[test]
fn stats_table5_prints_exact_result() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["stats", "--fixtures", "table5"]);
    assert!(text.contains("W=0 p=6.1035e-5"), "{text}");
}

#[test]
fn stats_json_reports_friedman() {
    let dir = tempfile::tempdir().unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["stats", "--fixtures", "all", "--format", "json"])).unwrap();
    let chi2 = v["table6"]["friedman"]["statistic"].as_f64().unwrap();
    assert!((chi2 - 34.54).abs() < 0.5);
    assert_eq!(v["table6"]["friedman"]["df"], 13);
    assert_eq!(v["table6"]["posthoc"].as_array().unwrap().len(), 3);
    assert_eq!(v["table5"]["statistic"], 0.0);
}

#[test]
fn synth_then_ingest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 1.5);
    ok(dir.path(), &["synth", "--spec", &spec, "--seed", "4", "--out", "a"]);
    ok(dir.path(), &["synth", "--spec", &spec, "--seed", "4", "--out", "b"]);
    for f in ["S01_Text.csv", "S01_Text.json", "S01_Text.bin", "suite.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let csv: serde_json::Value = serde_json::from_str(&ok(dir.path(), &["ingest", "a/S01_Text.csv", "--out", "store"])).unwrap();
    assert_eq!(csv["trials"], 25);
    assert_eq!(
        std::fs::read(dir.path().join("store/S01_Text.csv")).unwrap(),
        std::fs::read(dir.path().join("a/S01_Text.csv")).unwrap()
    );
    let bin: serde_json::Value =
        serde_json::from_str(&ok(dir.path(), &["ingest", "a/S01_Text.bin", "--task", "Text"])).unwrap();
    assert_eq!(bin["samples"], csv["samples"]);
    assert_eq!(bin["corrupt_frames"], 0);
}

#[test]
fn train_eval_separates_large_epsilon_synth() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 3.0);
    ok(dir.path(), &["synth", "--spec", &spec, "--out", "s"]);
    let sessions: Vec<String> = ["Base", "Read", "Text", "Call", "Snapshot"].iter().map(|t| format!("s/S01_{t}.csv")).collect();
    let mut args = vec!["train-eval", "--classes", "two", "--format", "json"];
    args.extend(sessions.iter().map(String::as_str));
    let v: serde_json::Value = serde_json::from_str(&ok(dir.path(), &args)).unwrap();
    assert!(v["overall"]["accuracy_pct"].as_f64().unwrap() >= 95.0, "{}", v["overall"]);

    let mut feat = vec!["features", "--arff", "s1.arff"];
    feat.extend(sessions.iter().map(String::as_str));
    ok(dir.path(), &feat);
    let arff = std::fs::read_to_string(dir.path().join("s1.arff")).unwrap();
    assert_eq!(arff.lines().filter(|l| l.starts_with("@attribute")).count(), 6);
    let text = ok(dir.path(), &["train-eval", "s1.arff", "--classifier", "mlp", "--classes", "five", "--epochs", "200"]);
    assert!(text.starts_with("mlp | 10-fold | 125 instances"), "{text}");
}

#[test]
fn config_overlay_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 3.0);
    ok(dir.path(), &["synth", "--spec", &spec, "--out", "s"]);
    ok(dir.path(), &["features", "s/S01_Base.csv", "s/S01_Text.csv", "--arff", "two.arff"]);
    std::fs::write(dir.path().join("c.toml"), "folds = 4\nseed = 9\n").unwrap();
    let folds = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_driveguard"));
        cmd.current_dir(dir.path())
            .args(["train-eval", "two.arff", "--format", "json"])
            .args(extra)
            .env_remove("DRIVEGUARD_FOLDS")
            .env_remove("DRIVEGUARD_SEED");
        if let Some(k) = env {
            cmd.env("DRIVEGUARD_FOLDS", k);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (v["folds"].as_u64().unwrap(), v["seed"].as_u64().unwrap())
    };
    assert_eq!(folds(&[], None), (10, 0));
    assert_eq!(folds(&["--config", "c.toml"], None), (4, 9));
    assert_eq!(folds(&["--config", "c.toml"], Some("3")), (3, 9));
    assert_eq!(folds(&["--config", "c.toml", "--k", "5", "--seed", "1"], Some("3")), (5, 1));
}

#[test]
fn calibrate_then_stream_packets_and_csv_agree() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 3.0);
    ok(dir.path(), &["synth", "--spec", &spec, "--out", "s"]);
    ok(dir.path(), &["calibrate", "s/S01_Base.csv", "s/S01_Text.csv", "--out", "p.json"]);
    let profile: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(profile["subject_id"], "S01");
    let from_bin = ok(dir.path(), &["stream", "s/S01_Text.bin", "--profile", "p.json", "--trace", "trace.csv"]);
    let from_csv = ok(dir.path(), &["stream", "s/S01_Text.csv", "--profile", "p.json"]);
    assert_eq!(from_bin, from_csv);
    let alerts: Vec<serde_json::Value> = from_bin.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!alerts.is_empty());
    for w in alerts.windows(2) {
        assert!(w[1]["t"].as_f64().unwrap() - w[0]["t"].as_f64().unwrap() >= 10.0 - 1e-9);
    }
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,delta,theta,alpha,beta,gamma,di\n"));
    assert!(ok(dir.path(), &["stream", "s/S01_Base.csv", "--profile", "p.json"]).is_empty());
}

#[test]
fn index_and_spectrogram_write_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 3.0);
    ok(dir.path(), &["synth", "--spec", &spec, "--out", "s"]);
    let csv = ok(
        dir.path(),
        &["index", "s/S01_Base.csv", "s/S01_Read.csv", "s/S01_Text.csv", "s/S01_Call.csv", "s/S01_Snapshot.csv", "--out", "idx"],
    );
    assert!(csv.starts_with("task,mean_di,trials,rank\n"));
    assert_eq!(csv.lines().count(), 6);
    let trials = std::fs::read_to_string(dir.path().join("idx/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 125);
    ok(dir.path(), &["spectrogram", "s/S01_Call.csv", "--window", "1.0", "--overlap", "0.5", "--out", "spec"]);
    assert!(std::fs::read_to_string(dir.path().join("spec/spectrogram_points.csv")).unwrap().starts_with("freq_hz,t_s,db\n"));
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let usage = driveguard(dir.path(), &["stats", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_of(&usage)["error"], "usage");
    let missing = driveguard(dir.path(), &["ingest", "missing.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_of(&missing)["error"], "io");
    std::fs::write(dir.path().join("bad.arff"), "@relation x\n@attribute a numeric\n@data\n1\n").unwrap();
    let schema = driveguard(dir.path(), &["train-eval", "bad.arff"]);
    assert!(error_of(&schema)["message"].as_str().is_some());
    let trial = driveguard(dir.path(), &["stats", "--alpha", "2"]);
    assert!(error_of(&trial)["error"].is_string());
}
