use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
    "seed": 3,
    "dataset": {"kind": "synthetic", "group_proportions": [0.7, 0.3], "spurious_strength": 0.9,
                "cue_groups": [0], "train_size": 120, "test_size": 80},
    "model": {"hidden": [8], "timesteps": 2},
    "training": {"epochs": 2},
    "evaluation": {"positive_class": 1},
    "deployment": {"profiles": [{"timesteps": 2}, {"timesteps": 1, "membrane_bits": 4}]}
}"#;

fn spikefair(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikefair"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_reports_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.json"), SMALL).unwrap();
    assert_eq!(code(&spikefair(&["validate", "ok.json", "--quiet"], dir.path())), 0);
    assert_eq!(code(&spikefair(&["validate", "shortcut", "--quiet"], dir.path())), 0);

    fs::write(
        dir.path().join("bad.json"),
        r#"{"seed": 1, "dataset": {"kind": "synthetic", "group_proportions": [0.6, 0.3], "spurious_strength": 0.5},
            "model": {"timesteps": 0}}"#,
    )
    .unwrap();
    let o = spikefair(&["validate", "bad.json"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("dataset.group_proportions"), "{err}");
    assert!(err.contains("model.timesteps"), "{err}");

    assert_eq!(code(&spikefair(&["validate", "missing.json"], dir.path())), 2);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    let o = spikefair(&["run", "small.json", "--out", "r", "--seed", "9", "--quiet"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let resolved = fs::read_to_string(dir.path().join("r/config.resolved.json")).unwrap();
    assert!(resolved.contains("\"seed\": 9"));

    let csv = spikefair(&["report", "r", "--format", "csv"], dir.path());
    assert_eq!(code(&csv), 0);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("positive_class,delta_sp"));
    assert_eq!(text.lines().count(), 2);

    let json = spikefair(&["report", "r"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["degradation"]["rows"].as_array().unwrap().len(), 2);

    // The directory is taken now.
    assert_eq!(code(&spikefair(&["run", "small.json", "--out", "r"], dir.path())), 3);
    assert_eq!(code(&spikefair(&["report", "nowhere"], dir.path())), 3);
}

#[test]
fn tampered_run_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    assert_eq!(code(&spikefair(&["run", "small.json", "--out", "r", "--quiet"], dir.path())), 0);
    fs::write(dir.path().join("r/trajectory.csv"), "epoch,group,accuracy\n").unwrap();
    assert_eq!(code(&spikefair(&["report", "r"], dir.path())), 3);
}

#[test]
fn sweep_writes_one_run_per_value() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    let o = spikefair(
        &["sweep", "small.json", "--vary", "dataset.spurious_strength=0.5,0.9", "--out", "s"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("s/point_000/manifest.json").is_file());
    assert!(dir.path().join("s/point_001/manifest.json").is_file());
    let summary = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let bad = spikefair(&["sweep", "small.json", "--vary", "dataset.spurious_strength=2", "--out", "t"], dir.path());
    assert_eq!(code(&bad), 2);
    assert_eq!(code(&spikefair(&["sweep", "small.json", "--vary", "oops"], dir.path())), 2);
}
