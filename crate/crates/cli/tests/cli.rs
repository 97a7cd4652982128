//! CLI surface tests: exit codes, the machine-parsable error line, stage
//! dependency checks, and artifact layout at a miniature scale.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_guidetrain"))
}

fn write_tiny_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    let text = format!(
        r#"schema_version = 1
seed = 11
out_dir = "{}"

[dataset]
episodes = 12
train_users = 2
episode_steps_min = 30
episode_steps_max = 45

[vae]
epochs = 2
hidden = 24
frame_subsample = 300

[hppn]
robot_epochs = 3
human_epochs = 2
stride = 8
persistence_gate = 1000.0

[baseline]
epochs = 2
stride = 8

[es]
population = 8
episodes_per_candidate = 2
max_generations = 2
checkpoint_every = 0
plateau_window = 0

[evaluation]
users = 1
trials = 1
"#,
        out.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn missing_upstream_artifact_fails_fast_with_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_tiny_config(tmp.path(), &out);
    let output = bin().args(["--config", cfg.to_str().unwrap(), "train-hppn"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    let line = stderr.lines().find(|l| l.starts_with("error: ")).expect("error line");
    assert!(line.contains("kind=missing-artifact"), "{line}");
    assert!(line.contains("dataset"), "{line}");
}

#[test]
fn bad_config_is_rejected_with_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\nnot_a_key = true\n").unwrap();
    let output = bin().args(["--config", cfg.to_str().unwrap(), "datagen"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error: kind=config"), "{stderr}");
}

#[test]
fn stagewise_pipeline_produces_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_tiny_config(tmp.path(), &out);
    let cfg = cfg.to_str().unwrap();

    for stage in ["datagen", "train-vae", "train-hppn", "train-baseline"] {
        let output = bin().args(["--config", cfg, stage]).output().unwrap();
        assert!(
            output.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    for reward in ["g-only", "g-plus-h"] {
        let output = bin()
            .args(["--config", cfg, "train-policy", "--reward", reward])
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    for stage in ["evaluate", "report"] {
        let output = bin().args(["--config", cfg, stage]).output().unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }

    // Dataset: 12 episode files plus manifest and profiles.
    let manifest = std::fs::read_to_string(out.join("dataset/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 13);
    assert!(manifest.lines().nth(1).unwrap().contains("train-000"));

    for file in [
        "vae.ckpt",
        "vae_loss.csv",
        "hppn.ckpt",
        "hppn_holdout.csv",
        "hppn_eval.csv",
        "baseline.ckpt",
        "policy_g_only.ckpt",
        "policy_g_only_history.csv",
        "policy_g_plus_h.ckpt",
        "evaluation/episodes.csv",
        "evaluation/summary.csv",
        "evaluation/deceleration.csv",
        "report/box_frechet.svg",
        "report/box_completion_time.svg",
        "report/box_sal.svg",
        "report/deceleration_robot.svg",
        "report/box_stats.csv",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }

    // History CSV has the pinned column header and one row per generation.
    let history = std::fs::read_to_string(out.join("policy_g_only_history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next().unwrap(), "generation,best,mean,worst,sigma");
    assert_eq!(lines.count(), 2);

    // Policy checkpoints carry the reward tag.
    let g_only = std::fs::read_to_string(out.join("policy_g_only.ckpt")).unwrap();
    assert_eq!(g_only.lines().next().unwrap(), "linear-policy");
    assert_eq!(g_only.lines().nth(1).unwrap(), "g-only");
    assert_eq!(g_only.lines().count(), 3 + 531);

    // One evaluation row per policy x path x user x trial.
    let episodes = std::fs::read_to_string(out.join("evaluation/episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 1 + 3 * 7);

    // An overlay exists for every (path, policy) pair.
    for path in ["c0", "c1", "c1m", "c2", "c2m", "c3", "c3m"] {
        for policy in ["baseline", "g-only", "g-plus-h"] {
            let f = out.join(format!("report/overlay_{path}_{policy}.svg"));
            assert!(f.exists(), "missing overlay {f:?}");
        }
    }
}

#[test]
fn report_regeneration_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_tiny_config(tmp.path(), &out);
    let cfg = cfg.to_str().unwrap();
    for args in [
        vec!["datagen"],
        vec!["train-vae"],
        vec!["train-hppn"],
        vec!["train-baseline"],
        vec!["train-policy", "--reward", "g-only"],
        vec!["train-policy", "--reward", "g-plus-h"],
        vec!["evaluate"],
        vec!["report"],
    ] {
        let mut full = vec!["--config", cfg];
        full.extend(args);
        let output = bin().args(&full).output().unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    }
    let snapshot = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect()
    };
    let first = snapshot(&out.join("report"));
    let output = bin().args(["--config", cfg, "report"]).output().unwrap();
    assert!(output.status.success());
    let second = snapshot(&out.join("report"));
    assert_eq!(first.len(), second.len());
    for ((n1, b1), (n2, b2)) in first.iter().zip(&second) {
        assert_eq!(n1, n2);
        assert_eq!(b1, b2, "report file {n1} changed across regenerations");
    }
}

#[test]
fn seed_override_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg = write_tiny_config(tmp.path(), &out_a);
    let cfg = cfg.to_str().unwrap();
    assert!(bin().args(["--config", cfg, "datagen"]).output().unwrap().status.success());
    assert!(bin()
        .args(["--config", cfg, "--seed", "999", "--out", out_b.to_str().unwrap(), "datagen"])
        .output()
        .unwrap()
        .status
        .success());
    let a = std::fs::read(out_a.join("dataset/ep00000.csv")).unwrap();
    let b = std::fs::read(out_b.join("dataset/ep00000.csv")).unwrap();
    assert_ne!(a, b);
}
