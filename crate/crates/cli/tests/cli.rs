use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gaide(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_gaide"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GAIDE_SEED")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "gaide {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn pipeline_from_scenes_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaide(&["gen-scenes", "--out", "scenes", "--per-family", "1", "--seed", "3"], d);
    assert_eq!(fs::read_dir(d.join("scenes")).unwrap().count(), 4);

    gaide(&["gen-data", "--scenes", "scenes", "--paths-per-scene", "2", "--out", "data.jsonl"], d);
    let data = fs::read_to_string(d.join("data.jsonl")).unwrap();
    assert!(data.lines().count() >= 2);

    gaide(
        &[
            "train", "--data", "data.jsonl", "--scenes", "scenes", "--steps", "3", "--batch-size", "2", "--hidden",
            "8", "--val-fraction", "0", "--eval-every", "0", "--out", "m.ckpt", "--loss-log", "loss.csv",
        ],
        d,
    );
    let log = fs::read_to_string(d.join("loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    gaide(
        &["gen-suite", "--out", "suite.json", "--scenes-per-family", "1", "--problems-per-scene", "1", "--trials", "2"],
        d,
    );
    for out in ["a", "b"] {
        gaide(
            &[
                "bench", "--suite", "suite.json", "--planners", "gaide,random,birrt", "--checkpoint", "gaide=m.ckpt",
                "--out", out, "--workers", "2",
            ],
            d,
        );
    }
    // trials.jsonl and timing.csv carry wall-clock times.
    for f in ["results.csv", "costs.csv"] {
        assert!(fs::read(d.join("a").join(f)).unwrap() == fs::read(d.join("b").join(f)).unwrap(), "{f} differs");
    }

    gaide(&["report", "--in", "a", "--out", "c"], d);
    for f in ["results.csv", "costs.csv", "timing.csv", "success.svg"] {
        assert!(fs::read(d.join("a").join(f)).unwrap() == fs::read(d.join("c").join(f)).unwrap(), "{f} differs");
    }

    let scene = fs::read_dir(d.join("scenes")).unwrap().next().unwrap().unwrap().path();
    let out = gaide(
        &["plan", "--scene", scene.to_str().unwrap(), "--start", "0.1,-0.2", "--goal", "0.1,-0.2"],
        d,
    );
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["success"], true);
    assert_eq!(result["cost"], 0.0);
}

#[test]
fn seed_override_changes_trial_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaide(
        &["gen-suite", "--out", "suite.json", "--scenes-per-family", "1", "--problems-per-scene", "1", "--trials", "1", "--families", "table"],
        d,
    );
    let run = |seed: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaide"));
        cmd.args(["bench", "--suite", "suite.json", "--planners", "birrt", "--out", out]).current_dir(d);
        match seed {
            Some(s) => cmd.env("GAIDE_SEED", s),
            None => cmd.env_remove("GAIDE_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(d.join(out).join("costs.csv")).unwrap()
    };
    let base = run(None, "base");
    assert_eq!(run(Some("77"), "x"), run(Some("77"), "y"));
    assert_ne!(base, run(Some("77"), "z"));

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaide"));
    cmd.args(["bench", "--suite", "suite.json", "--planners", "birrt", "--out", "bad"])
        .current_dir(d)
        .env("GAIDE_SEED", "not-a-number");
    assert!(!cmd.output().unwrap().status.success());
}

#[test]
fn learned_planner_without_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gaide(&["gen-suite", "--out", "suite.json", "--scenes-per-family", "1", "--problems-per-scene", "1", "--families", "table"], d);
    let out = Command::new(env!("CARGO_BIN_EXE_gaide"))
        .args(["bench", "--suite", "suite.json", "--planners", "gaide", "--out", "o"])
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!d.join("o").exists());
}
