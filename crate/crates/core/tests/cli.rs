mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mppcausal"))
        .args(args)
        .output()
        .unwrap()
}

fn simulate(config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = common::config_path(config);
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn simulate_writes_identical_tables_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common_args = ["--n", "400", "--seed", "5", "--dump-weights"];
    let out_a = simulate(
        "triggered_treatment.json",
        &a,
        &[&common_args[..], &["--threads", "1"]].concat(),
    );
    let out_b = simulate(
        "triggered_treatment.json",
        &b,
        &[&common_args[..], &["--threads", "4"]].concat(),
    );
    assert!(
        out_a.status.success(),
        "{}",
        String::from_utf8_lossy(&out_a.stderr)
    );
    assert!(out_b.status.success());
    for f in ["events.csv", "summary.csv", "weights.csv"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
    let weights = fs::read_to_string(a.join("weights.csv")).unwrap();
    assert!(weights.starts_with("subject_id,t,Lambda_c,Lambda_atoms_logprod,W\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["n"], 400);
    assert_eq!(manifest["scenario_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn zero_subjects_give_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate("two_period.json", dir.path(), &["--n", "0"]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(dir.path().join("events.csv")).unwrap(),
        "subject_id,arm,t,mark\n"
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("summary.csv")).unwrap(),
        "subject_id,tau_J,Y_T,W_T\n"
    );
}

#[test]
fn estimate_reports_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config_path("two_period.json");
    for method in ["ipw", "gformula", "joint"] {
        let out = run(&[
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--method",
            method,
            "--n",
            "20000",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        for key in [
            "method",
            "estimand",
            "value",
            "se",
            "n",
            "seed",
            "scenario_hash",
        ] {
            assert!(report.get(key).is_some(), "{method}: missing {key}");
        }
        let (v, se) = (
            report["value"].as_f64().unwrap(),
            report["se"].as_f64().unwrap(),
        );
        assert!((v - 0.6).abs() <= 4.0 * se, "{method}: {v} ± {se}");
        let saved: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap())
                .unwrap();
        assert_eq!(saved, report);
        let csv = fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
        assert!(csv.starts_with("method,estimand,value,se,n,seed,scenario_hash\n"));
    }
}

#[test]
fn oracle_checks_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let path = |name: &str| common::config_path(name).to_str().unwrap().to_string();

    let ok = run(&[
        "oracle",
        "--config",
        &path("two_period.json"),
        "--out",
        out_dir,
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!((report["g_formula"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(report["cross_check"]["ok"], true);

    let continuous = run(&[
        "oracle",
        "--config",
        &path("triggered_treatment.json"),
        "--out",
        out_dir,
    ]);
    assert_eq!(continuous.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&continuous.stderr).contains("discrete"));

    let shared = run(&[
        "oracle",
        "--config",
        &path("shared_atom.json"),
        "--out",
        out_dir,
    ]);
    assert_eq!(shared.status.code(), Some(1));
    let check = run(&[
        "check",
        "--config",
        &path("shared_atom.json"),
        "--out",
        out_dir,
    ]);
    assert_eq!(check.status.code(), Some(1));

    let positivity = run(&[
        "estimate",
        "--config",
        &path("static_unsupported.json"),
        "--n",
        "50",
        "--out",
        out_dir,
    ]);
    assert_eq!(positivity.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&positivity.stderr).contains("positivity"));

    let good = run(&[
        "check",
        "--config",
        &path("triggered_treatment.json"),
        "--n",
        "200",
        "--out",
        out_dir,
    ]);
    assert_eq!(good.status.code(), Some(0));

    let bad_method = run(&[
        "estimate",
        "--config",
        &path("two_period.json"),
        "--method",
        "magic",
    ]);
    assert_eq!(bad_method.status.code(), Some(2));
    let missing = run(&[
        "estimate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        out_dir,
    ]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn weights_command_summarises_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config_path("triggered_treatment.json");
    let out = run(&[
        "weights",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "5000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let (m, se) = (
        s["mean_w_t"].as_f64().unwrap(),
        s["se_w_t"].as_f64().unwrap(),
    );
    assert!((m - 1.0).abs() <= 4.0 * se, "{m} ± {se}");
    assert_eq!(s["n"], 5000);
}
