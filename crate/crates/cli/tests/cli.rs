use std::path::Path;
use std::process::{Command, Output};

fn strokeloc(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strokeloc"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .env_remove("STROKELOC_WORKSPACE")
        .output()
        .unwrap()
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let out = strokeloc(ws, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const STAGES: &[&[&str]] = &[
    &["synth", "--videos", "8", "--frames", "1500"],
    &["extract", "--feature", "gray-hist", "--jobs", "3"],
    &["train-sbd", "--trees", "30"],
    &["detect-cuts"],
    &["eval-sbd", "--tolerance", "0"],
    &["extract", "--feature", "hog"],
    &["train-cam", "--which", "cam1"],
    &["train-cam", "--which", "cam2"],
    &["localize"],
    &["filter"],
    &["eval-tiou"],
    &["sweep", "--T-list", "0,10,...,100"],
    &["plot"],
];

fn run_all(ws: &Path) {
    for args in STAGES {
        ok(ws, args);
    }
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if rel == "runs" {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn stage_by_stage_run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    run_all(a.path());

    let sbd: serde_json::Value = serde_json::from_str(&ok(a.path(), &["eval-sbd"])).unwrap();
    assert!(sbd["f_score"].as_f64().unwrap() >= 0.99, "{sbd}");
    let tiou: serde_json::Value = serde_json::from_str(&ok(a.path(), &["eval-tiou"])).unwrap();
    assert!(tiou["weighted_mean_tiou"].as_f64().unwrap() >= 0.95, "{tiou}");

    let tsv = std::fs::read_to_string(a.path().join("reports/sweep.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 12);
    assert_eq!(tsv.lines().next(), Some("T\tweighted_mean_tiou"));

    let b = tempfile::tempdir().unwrap();
    run_all(b.path());
    ok(b.path(), &["eval-sbd"]);
    ok(b.path(), &["eval-tiou"]);
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_strokeloc")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    for args in [
        &["frobnicate"][..],
        &["filter", "--bogus"],
        &["train-cam"],
        &["train-cam", "--which", "cam3"],
        &["sweep", "--T-list", "0,...,10"],
    ] {
        assert_eq!(strokeloc(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn operational_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--videos", "2", "--frames", "300"]);
    for args in [&["detect-cuts"][..], &["localize"], &["plot"], &["eval-cam", "--which", "cam1"]] {
        let out = strokeloc(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn workspace_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_strokeloc"))
        .args(["synth", "--videos", "1", "--frames", "200"])
        .env("STROKELOC_WORKSPACE", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("videos/synth_000.gry").exists());
}

#[test]
fn preprocess_plan_only_prints_decoder_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["preprocess", "--plan-only", "--width", "320", "--height", "240", "a.mp4", "b c.mp4"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("ffmpeg ") && lines[0].contains("scale=320:240"));
    assert!(lines[1].contains("'b c.mp4'"));
    assert!(!dir.path().join("videos").exists());
}

#[test]
fn annotations_feed_eval_tiou_directly() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ok(ws, &["synth", "--videos", "1", "--frames", "300", "--test-fraction", "1"]);
    // A record as the annotation service stores it.
    std::fs::write(
        ws.join("annotations/synth_000.segments.json"),
        r#"{"format_version":"1","video_id":"synth_000","segments":[[10,89]],"revision":1,"updated_at":"2026-01-01T00:00:00.000Z"}"#,
    )
    .unwrap();
    std::fs::write(
        ws.join("predictions/synth_000.filtered.json"),
        r#"{"format_version":"1","video_id":"synth_000","segments":[[10,89]]}"#,
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(ws, &["eval-tiou"])).unwrap();
    assert_eq!(v["weighted_mean_tiou"], 1.0);
}
