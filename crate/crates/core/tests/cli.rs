use std::path::Path;
use std::process::{Command, Output};

fn invadapt(args: &[&str], env: &[(&str, &str)], dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_invadapt"));
    cmd.args(args).current_dir(dir).env("RUST_LOG", "error");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&invadapt(&[], &[], dir.path())), 2);
    assert_eq!(code(&invadapt(&["frobnicate"], &[], dir.path())), 2);
    assert_eq!(code(&invadapt(&["run", "missing.cfg"], &[], dir.path())), 2);
    std::fs::write(dir.path().join("bad.cfg"), "no_such_key = 1\n").unwrap();
    assert_eq!(code(&invadapt(&["run", "bad.cfg"], &[], dir.path())), 2);
    std::fs::write(dir.path().join("ok.cfg"), "experiment = uniform\n").unwrap();
    assert_eq!(code(&invadapt(&["run", "ok.cfg"], &[("INVADAPT_TAU", "zero")], dir.path())), 2);
    assert_eq!(code(&invadapt(&["eoc", "missing.csv"], &[], dir.path())), 2);
}

#[test]
fn eoc_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("t.csv"),
        "dofs,l2_error,wall_seconds\n11439,0.0863209,1\n78945,0.0047541,2\n",
    )
    .unwrap();
    let out = invadapt(&["eoc", "t.csv"], &[], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("4.50"), "{text}");
    assert!(text.contains("1.50"), "{text}");
    std::fs::write(dir.path().join("one.csv"), "dofs,l2_error,wall_seconds\n10,0.1,1\n").unwrap();
    assert_eq!(code(&invadapt(&["eoc", "one.csv"], &[], dir.path())), 2);
    std::fs::write(dir.path().join("junk.csv"), "dofs,l2_error\nx,y\n").unwrap();
    assert_eq!(code(&invadapt(&["eoc", "junk.csv"], &[], dir.path())), 2);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("u.cfg"),
        "experiment = uniform\nroot_n = 2\nlevels = 0, 3\nreference_level = 3\nt_final = 0.02\noutput_dir = out\n",
    )
    .unwrap();
    let out = invadapt(&["run", "u.cfg"], &[("INVADAPT_OUTPUT_DIR", "elsewhere")], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("elsewhere/convergence.csv").exists());
    assert!(dir.path().join("elsewhere/manifest.json").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn failed_check_exits_1() {
    // Equal step sizes leave the temporal order undefined, so the check fails.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("t.cfg"),
        "experiment = mms-temporal\nroot_n = 2\nlevels = 0\ntaus = 0.02, 0.02\nt_final = 0.04\n",
    )
    .unwrap();
    let out = invadapt(&["run", "t.cfg"], &[], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = invadapt(&["verify"], &[], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
