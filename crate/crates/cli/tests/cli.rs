use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn chcon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chcon")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn jsonl(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn analyze_depolarizing_reports_p1() {
    let out = chcon(&["analyze", data("depolarizing_0.2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((r["p_constant"]["p1"].as_f64().unwrap() - 0.3).abs() < 1e-6);
    assert_eq!(r["p_constant"]["certification"], "exact_p1");
    assert_eq!(r["validation"]["passed"], true);
    assert!((r["eta_tr"]["value"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert_eq!(r["choi_spectrum"].as_array().unwrap().len(), 4);
    assert_eq!(r["unital"], true);
}

#[test]
fn analyze_identity_notes_unitary_channel() {
    let out = chcon(&["analyze", data("identity.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["p_constant"].is_null());
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("unitary channel")));
    assert_eq!(r["eta_tr"]["value"].as_f64().unwrap(), 1.0);
    assert_eq!(r["unitary"], true);
}

#[test]
fn analyze_explicit_kraus_list() {
    let out = chcon(&["analyze", data("kraus_dephasing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let m = &r["bloch"]["matrix"];
    assert!((m[0][0].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert!((m[2][2].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_json_exits_2_with_position() {
    let out = chcon(&["analyze", data("malformed.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(chcon(&["analyze", "/nonexistent/channel.json"]).status.code(), Some(2));
    assert_eq!(chcon(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bound_depolarizing_above_one_third_is_impossible() {
    let out = chcon(&["bound", data("depolarizing_0.4.json").to_str().unwrap(), "--n", "10", "--t", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["impossible"], true);
    assert_eq!(r["overhead"]["bound"]["kind"], "impossible");
    assert_eq!(r["overhead"]["bracket"]["upper"].as_f64().unwrap(), 0.0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("IMPOSSIBLE"));
}

#[test]
fn bound_from_p_gives_log_term_ten() {
    let out = chcon(&["bound", "--p", "0.5", "--n", "1", "--t", "2^40"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["overhead"]["alpha"].as_f64().unwrap(), 0.25);
    assert_eq!(r["overhead"]["bound"]["log_term"].as_f64().unwrap(), 10.0);
    assert_eq!(r["overhead"]["bound"]["value"].as_f64().unwrap(), 10.0);
    assert_eq!(r["memory_time"]["threshold"].as_f64().unwrap(), 16.0);
    assert_eq!(chcon(&["bound", "--n", "1", "--t", "5"]).status.code(), Some(2));
}

#[test]
fn bound_amplitude_damping_pipeline() {
    let out = chcon(&["bound", data("amplitude_damping_0.3.json").to_str().unwrap(), "--n", "4", "--t", "1e6"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["overhead"]["bound"]["kind"], "bound");
    assert!(r["overhead"]["bound"]["value"].as_f64().unwrap() >= 4.0);
    assert!(r["overhead"]["bracket"]["lower"].as_f64().unwrap() > 0.0);
    assert_eq!(r["p_constant"]["certification"], "certified_lower_bound");
    assert!(r["notes"].as_array().unwrap().len() >= 2);
}

#[test]
fn simulate_doubled_streams_steps() {
    let out = chcon(&["simulate", "--doubled", data("depolarizing_0.25.json").to_str().unwrap(), "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = jsonl(&out);
    assert_eq!(recs.len(), 12);
    for r in &recs[1..11] {
        assert_eq!(r["record"], "step");
        if let Some(ratio) = r["ratio"].as_f64() {
            assert!(ratio <= 1.0 - 0.375f64.powi(2) + 1e-3);
        }
    }
    let summary = &recs[11];
    assert_eq!(summary["record"], "summary");
    assert_eq!(summary["passed"], true);
    assert!(summary["endgame_dsep"].as_f64().unwrap() <= 0.25 + 1e-3);
}

#[test]
fn simulate_doubled_refuses_oversized_memory() {
    let out = chcon(&["simulate", "--doubled", data("depolarizing_0.25.json").to_str().unwrap(), "--qubits", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn simulate_circuit_file_with_flags() {
    let f = data("bell_measure.json");
    let out = chcon(&["simulate", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let recs = jsonl(&out);
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[5]["trailing_noise"], false);
    // measuring one side of the pair leaves classical correlations only
    assert!(recs[2]["chisep"].as_f64().unwrap() < 1e-9);

    let out = chcon(&["simulate", f.to_str().unwrap(), "--noise-order", "layer-first", "--trailing-noise", "on", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = jsonl(&out);
    let summary = recs.last().unwrap();
    assert_eq!(summary["order"], "layer-first");
    assert_eq!(summary["trailing_noise"], true);
    assert_eq!(summary["length"], 2);

    let out = chcon(&["simulate", f.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("blocks,chisep,"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn verify_unknown_suite_lists_names() {
    let out = chcon(&["verify", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tr-dist-chi2") && err.contains("sep-contraction"));
}

#[test]
fn verify_is_deterministic_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_chcon"))
            .args(["verify", "eta-upper-bound", "--trials", "12", "--seed", "9"])
            .env("CHCON_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["passed"], true);
    let bad = Command::new(env!("CARGO_BIN_EXE_chcon")).args(["verify", "overhead"]).env("CHCON_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn violations_dump_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("report.json");
    let out = chcon(&["verify", "tr-dist-chi2", "--trials", "4", "--tol", "-5", "--seed", "3", "--out", dump.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    let v = &report["violations"][0];
    assert!(v["witness"]["rho"].is_array() && v["witness"]["sigma"].is_array());
    assert_eq!(v["seed"], 3);

    let out = chcon(&["verify", "--replay", dump.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let replays: Value = json(&out);
    let first = if replays.is_array() { replays[0].clone() } else { replays };
    assert_eq!(first["reproduced"], true);
    assert_eq!(first["violations"][0]["lhs"], v["lhs"]);
}

#[test]
fn verify_csv_has_one_row_per_suite() {
    let out = chcon(&["verify", "overhead", "--trials", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("overhead"));
}
