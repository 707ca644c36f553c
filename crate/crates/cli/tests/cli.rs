use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_depbias");

fn depbias(out: &Path, args: &[&str]) -> Output {
    depbias_env(out, args, &[])
}

fn depbias_env(out: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg("--out").arg(out).args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = depbias(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const TINY: &[&str] = &["--preset", "tiny", "--duration-min", "5", "--duration-max", "7"];

fn tiny_corpus(out: &Path) {
    ok(out, &[TINY, &["synth"]].concat());
    ok(out, &["features"]);
}

#[test]
fn full_pipeline_is_byte_identical_across_reruns() {
    let mut reports = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        tiny_corpus(out);
        for gb in ["off", "on"] {
            ok(out, &["--epochs", "2", "--gender-balance", gb, "train"]);
        }
        ok(out, &["eval", "--compare", "depaudionet-l2-c1-ub-s0", "depaudionet-l2-c1-gb-s0"]);
        ok(out, &["--gender-balance", "on", "eval"]);
        let table = ok(out, &["report"]);
        assert!(table.contains("F1 Total Average"));
        let read = |p: &str| fs::read(out.join(p)).unwrap();
        let paired = read("reports/depaudionet-l2-c1-ub-s0--depaudionet-l2-c1-gb-s0.json");
        let doc: serde_json::Value = serde_json::from_slice(&paired).unwrap();
        assert_eq!(doc["runs"].as_array().unwrap().len(), 2);
        assert!(doc["runs"][0]["diff_percent"].is_number());
        for key in ["F", "M", "All"] {
            assert!(doc["runs"][0]["per_gender"][key]["f1_avg"].is_number());
        }
        reports.push((
            paired,
            read("report.json"),
            read("runs/depaudionet-l2-c1-gb-s0/metrics.log"),
            read("runs/depaudionet-l2-c1-gb-s0/checkpoint.dbck"),
        ));
    }
    assert!(reports[0] == reports[1], "reruns differ");
}

#[test]
fn features_are_idempotent_and_follow_the_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &[TINY, &["synth"]].concat());
    assert!(ok(out, &["features"]).contains("12 extracted, 0 up to date"));
    assert!(ok(out, &["features"]).contains("0 extracted, 12 up to date"));

    let raw = ok(out, &["--feature-kind", "raw", "--model", "rawaudio", "features"]);
    assert!(raw.contains("12 extracted"));
    let desc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("features/raw-per-signal/300.json")).unwrap()).unwrap();
    assert_eq!(desc["rows"], 1);
    let mel: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("features/mel-per-signal/300.json")).unwrap()).unwrap();
    assert_eq!(mel["rows"], 40);

    // a missing feature file is recomputed on its own
    fs::remove_file(out.join("features/mel-per-signal/301.f32")).unwrap();
    assert!(ok(out, &["features"]).contains("1 extracted, 11 up to date"));
}

#[test]
fn missing_audio_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &[TINY, &["synth"]].concat());
    fs::remove_file(out.join("audio/302.wav")).unwrap();
    let o = depbias(out, &["features"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("302"));
    // the remaining files were still written
    assert!(out.join("features/mel-per-signal/303.f32").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(depbias(out, &["--lambda", "x", "synth"]).status.code(), Some(2));
    assert_eq!(depbias(out, &["--model", "rawaudio", "--feature-kind", "mel", "train"]).status.code(), Some(2));
    assert_eq!(depbias(out, &["features"]).status.code(), Some(3));
    assert_eq!(depbias(out, &["report"]).status.code(), Some(3));

    let cfg = out.join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(depbias(out, &["--config", cfg.to_str().unwrap(), "synth"]).status.code(), Some(2));

    tiny_corpus(out);
    ok(out, &["--epochs", "1", "train"]);
    fs::remove_file(out.join("runs/depaudionet-l2-c1-ub-s0/checkpoint.dbck")).unwrap();
    let o = depbias(out, &["eval"]);
    assert_ne!(o.status.code(), Some(0));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn flags_override_env_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    tiny_corpus(out);
    let cfg = out.join("run.cfg");
    fs::write(&cfg, "# experiment\nepochs = 1\nseed = 5\nlambda = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = depbias_env(out, &["--config", cfg, "--lambda", "4", "train"], &[("DEPBIAS_SEED", "6")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stored = fs::read_to_string(out.join("runs/depaudionet-l4-c1-ub-s6/run.cfg")).unwrap();
    assert!(stored.contains("epochs = 1"));
}

#[test]
fn gender_balanced_training_selects_56_files_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let synth = ok(out, &["--duration-min", "4", "--duration-max", "4.5", "synth"]);
    assert!(synth.contains("142 interviews (107 train, 35 validation)"), "{synth}");
    ok(out, &["features"]);
    ok(out, &["--epochs", "2", "--gender-balance", "on", "train"]);
    let log = fs::read_to_string(out.join("runs/depaudionet-l2-c1-gb-s0/metrics.log")).unwrap();
    let epochs: Vec<&str> = log.lines().filter(|l| l.starts_with("epoch=")).collect();
    assert_eq!(epochs.len(), 2);
    assert!(epochs.iter().all(|l| l.contains(" files=56 ")), "{log}");
}

#[test]
fn rawaudio_trains_on_the_default_corpus_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let raw = ["--feature-kind", "raw", "--model", "rawaudio", "--lambda", "3", "--conv-filters", "2"];
    let start = std::time::Instant::now();
    ok(out, &["synth"]);
    ok(out, &[&raw[..], &["features"]].concat());
    ok(out, &[&raw[..], &["train"]].concat());
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "took {secs:.0}s");
    let log = fs::read_to_string(out.join("runs/rawaudio-l3-c2-ub-s0/metrics.log")).unwrap();
    assert!(log.lines().last().unwrap().starts_with("best_epoch="));
}
