mod common;

use std::process::{Command, Output};

use common::*;
use physfoley::velocity::TracksDocument;

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

const SUBCOMMANDS: [&str; 6] = ["velocity", "adapter-check", "toy-train", "toy-eval", "apcc", "report"];

#[test]
fn help_exits_zero_everywhere() {
    assert_eq!(code(&run(&["--help"])), 0);
    for sub in SUBCOMMANDS {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"), "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["velocity", "--bogus"],
        vec!["frobnicate"],
        vec!["velocity"],
        vec!["toy-train", "--conditioned", "maybe", "--out", "x.json"],
        vec![],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn domain_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("out.json");
    let o = run(&["velocity", "--trace", s(&missing), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert_eq!(error_json(&o)["error"]["kind"], "io");
    assert!(!out.exists());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"video_id\": 3").unwrap();
    let o = run(&["velocity", "--trace", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "parse");
    assert!(e["error"]["line"].is_number());
}

#[test]
fn velocity_on_rigid_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (fps, delta) = TRAJECTORIES[2];
    let trace = rigid_trace(fps, delta).write_to_dir(dir.path(), "clip").unwrap();
    let out = dir.path().join("tracks.json");
    let o = run(&["velocity", "--trace", s(&trace), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: TracksDocument = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let expected = norm(delta) * fps;
    for v in &doc.tracks[0].velocities {
        assert!((v.unwrap() - expected).abs() / expected < 1e-4);
    }
}

#[test]
fn adapter_check_passes_at_init() {
    let o = run(&["adapter-check", "--seeds", "0", "--trials", "10", "--sampled", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["max_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn apcc_and_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let f = apcc_fixture(dir.path());
    let (out, csv) = (dir.path().join("report.json"), dir.path().join("events.csv"));
    let o = run(&apcc_args(&f, &out, &csv));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(r["classes"].as_array().unwrap().len(), 1);
    assert_eq!(r["events"].as_array().unwrap().len(), 4);
    let events = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(events.lines().count(), 5);

    let (classes, json) = (dir.path().join("classes.csv"), dir.path().join("again.json"));
    let o = run(&["report", "--input", s(&out), "--out", s(&classes), "--json", s(&json)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(&out).unwrap());
    assert!(std::fs::read_to_string(&classes).unwrap().starts_with("class_label,rho_gt"));
}

#[test]
fn repeat_runs_are_byte_identical() {
    for (sub, result) in determinism_battery() {
        let files = result.unwrap_or_else(|e| panic!("{sub}: {e}"));
        assert!(files > 0, "{sub}");
    }
}

#[test]
fn report_loss_csv_matches_training_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (model, direct, again) = (dir.path().join("m.json"), dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = run(&["toy-train", "--steps", "6", "--samples", "20", "--conditioned", "off", "--out", s(&model), "--loss-csv", s(&direct)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["report", "--input", s(&model), "--out", s(&again)])), 0);
    let text = std::fs::read_to_string(&direct).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "steps = 3\nsamples = 20\nout = \"from_config.json\"\nconditioned = \"off\"\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    let o = run(&["--config", s(&cfg), "toy-train"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("from_config.json")).unwrap()).unwrap();
    assert_eq!(m["loss_curve"].as_array().unwrap().len(), 3);
    assert_eq!(m["conditioned"], false);

    let flag_out = dir.path().join("flag.json");
    let o = run(&["--config", s(&cfg), "toy-train", "--steps", "2", "--out", s(&flag_out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&flag_out).unwrap()).unwrap();
    assert_eq!(m["loss_curve"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, "stepz = 3\n").unwrap();
    let o = run(&["--config", s(&cfg), "toy-train", "--out", s(&flag_out)]);
    assert_eq!(code(&o), 1);
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["line"], 1);
}

#[test]
fn log_variable_controls_verbosity() {
    let dir = tempfile::tempdir().unwrap();
    let trace = rigid_trace(30.0, [0.01, 0.0, 0.0]).write_to_dir(dir.path(), "clip").unwrap();
    let out = dir.path().join("t.json");
    let quiet = run(&["velocity", "--trace", s(&trace), "--out", s(&out)]);
    assert!(quiet.stderr.is_empty());
    let loud = Command::new(env!("CARGO_BIN_EXE_physfoley"))
        .args(["velocity", "--trace", s(&trace), "--out", s(&out)])
        .env("PHYSFOLEY_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("wrote 1 tracks"));
}
