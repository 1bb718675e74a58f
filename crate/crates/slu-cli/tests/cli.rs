//! Exit-code and surface contracts of the `slu` binary.

use std::process::Command;

fn slu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slu"))
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = slu().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "no usage text in: {text}");
}

#[test]
fn help_exits_zero() {
    let out = slu().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "simulate",
        "recombine",
        "build-vocab",
        "train",
        "evaluate",
        "attention-trace",
        "reproduce",
    ] {
        assert!(text.contains(sub), "help is missing `{sub}`");
    }
}

#[test]
fn missing_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = slu()
        .args(["evaluate", "--checkpoint", "no-such.ckpt", "--data"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("no-such.ckpt"), "unhelpful message: {text}");
}

#[test]
fn bad_config_value_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "encoder=transformer\n").unwrap();
    let out = slu()
        .args(["train", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_six_splits_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d1 = dir.path().join("a");
    let d2 = dir.path().join("b");
    for d in [&d1, &d2] {
        let out = slu()
            .args(["simulate", "--seed", "7", "--scale", "200", "--data"])
            .arg(d)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<String> = std::fs::read_dir(&d1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        let a = std::fs::read(d1.join(&name)).unwrap();
        let b = std::fs::read(d2.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical seeds");
    }
}
