use std::path::Path;
use std::process::Command;

use emg_core::ingest::{tick_window_end, Recording, SampleSource};

fn emgctl(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_emgctl")).args(args).output().expect("spawn emgctl");
    assert!(
        out.status.success(),
        "emgctl {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn record_train_evaluate_and_decode() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    emgctl(&["cues", "--seed", "2", "--preset", "recalibration", "--out", &p("cues.json")]);
    std::fs::write(p("synth.json"), r#"{"seed": 5}"#).unwrap();
    emgctl(&["synth", "--config", &p("synth.json"), "--cues", &p("cues.json"), "--out", &p("rec.emg")]);
    std::fs::write(
        p("bundle-config.json"),
        r#"{"components": 12, "train": {"epochs": 40, "hidden": [48]}}"#,
    )
    .unwrap();
    emgctl(&[
        "train", "--recording", &p("rec.emg"), "--cues", &p("cues.json"), "--out", &p("bundle.json"),
        "--seed", "3", "--config", &p("bundle-config.json"),
    ]);

    let info: serde_json::Value = serde_json::from_str(&emgctl(&["pipeline-info", &p("bundle.json")])).unwrap();
    assert_eq!(info["components"], 12);
    assert_eq!(info["accepted"], 64);
    assert_eq!(info["filter"]["order"], 4);
    assert_eq!(info["filter"]["cutoff_hz"], 120.0);
    let explained = info["explained_variance"].as_f64().unwrap();
    assert!(explained > 0.0 && explained <= 1.0);

    emgctl(&[
        "eval", "--bundle", &p("bundle.json"), "--recording", &p("rec.emg"), "--cues", &p("cues.json"),
        "--report", &p("acc.json"),
    ]);
    let acc = json(Path::new(&p("acc.json")));
    assert_eq!(acc["windows"], 400);
    assert!(acc["accuracy"].as_f64().unwrap() > 0.9, "{acc}");
    let confusion = acc["confusion"].as_array().unwrap();
    assert_eq!(confusion.len(), 10);
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 400);

    emgctl(&["decode", "--bundle", &p("bundle.json"), "--source", &p("rec.emg"), "--out", &p("events.jsonl")]);
    let events = std::fs::read_to_string(p("events.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = events.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let len = Recording::read(p("rec.emg")).unwrap().len();
    let expected = (0..).take_while(|&k| tick_window_end(k, 1000, 4000.0, 6.0) <= len).count();
    assert_eq!(lines.len(), expected);
    for (k, e) in lines.iter().enumerate() {
        assert_eq!(e["tick"], k as u64);
        assert_eq!(e["probabilities"].as_array().unwrap().len(), 10);
    }

    emgctl(&["eval", "snr", "--recording", &p("rec.emg"), "--cues", &p("cues.json"), "--report", &p("snr.json")]);
    let snr = json(Path::new(&p("snr.json")))["snr"]["snr"].as_f64().unwrap();
    assert!((4.5..7.0).contains(&snr), "snr {snr}");

    emgctl(&[
        "eval", "heatmaps", "--recording", &p("rec.emg"), "--cues", &p("cues.json"), "--report", &p("maps.json"),
        "--csv-dir", &p("maps"),
    ]);
    assert_eq!(json(Path::new(&p("maps.json"))).as_array().unwrap().len(), 10);
    assert!(Path::new(&p("maps/fingers_closed.csv")).exists());

    emgctl(&[
        "eval", "matrix", "--a-recording", &p("rec.emg"), "--a-cues", &p("cues.json"), "--b-recording",
        &p("rec.emg"), "--b-cues", &p("cues.json"), "--metric", "euclidean", "--csv", &p("m.csv"),
    ]);
    let csv = std::fs::read_to_string(p("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);

    emgctl(&[
        "eval", "rt-accuracy", "--bundle", &p("bundle.json"), "--source", &p("rec.emg"), "--cues", &p("cues.json"),
        "--report", &p("rt.json"),
    ]);
    let rt = json(Path::new(&p("rt.json")));
    assert_eq!(rt["cues"].as_array().unwrap().len(), 50);

    std::fs::write(p("groups.json"), "[[1, 2, 3], [4, 5, 6], [7, 8, 9]]").unwrap();
    let stats: serde_json::Value =
        serde_json::from_str(&emgctl(&["eval", "stats", "--groups", &p("groups.json")])).unwrap();
    assert!((stats["kruskal_wallis"]["statistic"].as_f64().unwrap() - 7.2).abs() < 1e-9);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_emgctl"))
        .args(["pipeline-info", "/nonexistent/bundle.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/bundle.json"));
    let out = Command::new(env!("CARGO_BIN_EXE_emgctl")).args(["eval"]).output().unwrap();
    assert!(!out.status.success());
}
