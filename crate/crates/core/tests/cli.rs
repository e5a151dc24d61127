use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use escape::label::{LabelRecord, LabelStore, LABELS_FILE};
use escape::synth::{two_speaker_clips, usage_fixture, write_archive};

fn escape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escape"))
        .args(args)
        .env_remove("ESCAPE_COOKIE")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// 24 synthetic clips, all labeled by hand.
fn labeled_archive(root: &Path) {
    let clips = two_speaker_clips(24, 5);
    write_archive(root, &clips).unwrap();
    let mut store = LabelStore::open(root.join(LABELS_FILE)).unwrap();
    for c in &clips {
        let mut r = LabelRecord::manual(&c.clip.id, &c.speaker);
        r.labeled_at = None;
        store.put(r).unwrap();
    }
}

#[test]
fn evaluate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    labeled_archive(root);
    let a = root.to_str().unwrap();
    let out = escape(&["features", "--archive", a]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    let derived = root.join("derived");
    let files = ["evaluation.csv", "evaluation.json", "evaluation.csv.meta.json", "similarity.bin"];
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let out = escape(&["--jobs", jobs, "evaluate", "--archive", a, "--splits", "6", "--seed", "7"]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        runs.push(files.map(|f| fs::read(derived.join(f)).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
    let csv = text(&runs[0][0]);
    assert_eq!(csv.lines().count(), 7);
    let meta: serde_json::Value = serde_json::from_slice(&runs[0][2]).unwrap();
    assert_eq!(meta["config"]["seed"], 7);
    assert_eq!(meta["config"]["splits"], 6);
    assert_eq!(meta["command"], "evaluate");

    let other = escape(&["evaluate", "--archive", a, "--splits", "6", "--seed", "8"]);
    assert!(other.status.success());
    assert_ne!(fs::read(derived.join("evaluation.csv.meta.json")).unwrap(), runs[0][2]);
}

#[test]
fn corrupt_wav_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let clips = two_speaker_clips(4, 2);
    let archive = write_archive(root, &clips).unwrap();
    let broken = &archive.records()[2];
    fs::write(archive.audio_path(broken).unwrap(), b"RIFF\x10\0\0\0WAVEnot really").unwrap();
    let a = root.to_str().unwrap();

    let out = escape(&["features", "--archive", a]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stderr).contains(&broken.id));
    assert!(text(&out.stdout).contains("3 clips processed, 1 failed"));
    assert!(root.join("derived/features.bin").exists());
    assert!(root.join("derived/features.bin.meta.json").exists());

    let strict = escape(&["features", "--archive", a, "--strict"]);
    assert_eq!(strict.status.code(), Some(escape::cli::EXIT_PARTIAL));

    let validate = escape(&["validate", "--archive", a]);
    assert_eq!(validate.status.code(), Some(1));
    assert!(text(&validate.stderr).contains(&broken.id));
}

#[test]
fn report_csv_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    usage_fixture(dir.path()).unwrap();
    let a = dir.path().to_str().unwrap();

    let out = escape(&["report", "--archive", a, "--format", "csv"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("FAULT,3\nSUCCESS,7\n"), "{stdout}");
    assert!(stdout.contains("DEVICE-A,Living Room,6\nDEVICE-B,Kitchen,4\n"), "{stdout}");

    let csv_dir = dir.path().join("csv");
    let out = escape(&[
        "report", "--archive", a, "--speaker", "Male", "--format", "csv", "--out-dir",
        csv_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::read_to_string(csv_dir.join("status.csv")).unwrap(), "status,count\nFAULT,3\nSUCCESS,7\n");
    let intents = fs::read_to_string(csv_dir.join("intent.csv")).unwrap();
    // Male clips: timer, music, weather, error (no transcript), timer
    assert!(intents.contains("Timer,2\n") && intents.contains("Music,1\n"), "{intents}");
    assert!(intents.contains("Weather,1\n") && intents.contains("Error,1\n"), "{intents}");

    let table = escape(&["report", "--archive", a]);
    assert!(text(&table.stdout).contains("Living Room (DEVICE-A)"));

    let unknown = escape(&["report", "--archive", a, "--speaker", "Robot"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(text(&unknown.stderr).contains("unknown speaker label"));
}

#[test]
fn label_then_classify_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let clips = two_speaker_clips(20, 11);
    write_archive(root, &clips).unwrap();
    let a = root.to_str().unwrap();
    assert!(escape(&["features", "--archive", a]).status.success());

    // without a manual label everything is queued
    let out = escape(&["label", "--archive", a, "--propagate-only"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("20 of 20 clips queued"));

    // one manual label per speaker from the truth, then several more
    let mut args = vec!["label".to_string(), "--archive".into(), a.into()];
    for c in clips.iter().take(10) {
        args.push("--assign".into());
        args.push(format!("{}={}", c.clip.id, c.speaker));
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = escape(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let store = LabelStore::open(root.join(LABELS_FILE)).unwrap();
    assert_eq!(store.manual().count(), 10);

    let out = escape(&["classify", "--archive", a, "--seed", "3"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let classified = fs::read_to_string(root.join("derived/classified.jsonl")).unwrap();
    let n_unlabeled = clips.len() - store.len();
    assert_eq!(classified.lines().count(), n_unlabeled);
    let model: serde_json::Value = serde_json::from_slice(&fs::read(root.join("derived/classifier.json")).unwrap()).unwrap();
    assert_eq!(model["chosen_alpha"], model["model"]["alpha"]);
    assert_eq!(model["model"]["column_ids"].as_array().unwrap().len(), store.len());
    assert!(root.join("derived/classifier.json.meta.json").is_file());
    // labels.jsonl is untouched by classify
    assert_eq!(LabelStore::open(root.join(LABELS_FILE)).unwrap().len(), store.len());

    let out = escape(&["report", "--archive", a, "--speaker", "Female", "--format", "csv"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
}

#[test]
fn usage_errors() {
    let out = escape(&["features", "--archive", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("does not exist"));

    let out = escape(&["features", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let out = escape(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    usage_fixture(dir.path()).unwrap();
    let out = escape(&["evaluate", "--archive", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("run `features` first"));

    let out = escape(&["scrape", "--archive", dir.path().to_str().unwrap(), "--base-url", "http://127.0.0.1:9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("ESCAPE_COOKIE"));
}

#[test]
fn scrape_via_cli() {
    use escape::ingest::mock::{MockFixture, MockServer};
    let fixture = MockFixture::three_activities();
    let cookie = fixture.cookie.clone();
    let server = MockServer::start(fixture).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive");
    let cookie_file = dir.path().join("cookie.txt");
    fs::write(&cookie_file, format!("{cookie}\n")).unwrap();
    let args = [
        "scrape",
        "--archive",
        archive.to_str().unwrap(),
        "--base-url",
        &server.base_url(),
        "--cookie-file",
        cookie_file.to_str().unwrap(),
    ];
    let out = escape(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("3 new records"));
    let out = escape(&args);
    assert!(text(&out.stdout).contains("0 new records"));

    fs::write(&cookie_file, "stale").unwrap();
    let out = escape(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("cookie has probably expired"));
}
