use std::process::Command;

fn vf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vf"))
}

const SCENARIO: &str = r#"
[sim]
dt = 0.001
duration = 0.5

[[fixtures]]
type = "constant"
id = "push"
slots = [0]
mean = [2.0]
cov = [0.01]
"#;

#[test]
fn run_then_eval_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.toml");
    std::fs::write(&s, SCENARIO).unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = vf().args(["run", s.to_str().unwrap(), "--out", trace.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 500);

    let pass = dir.path().join("pass.toml");
    std::fs::write(&pass, "[[check]]\nkind = \"time_monotone\"\n[[check]]\nkind = \"finite\"\n").unwrap();
    let out = vf().args(["eval", trace.to_str().unwrap(), "--check", pass.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let fail = dir.path().join("fail.toml");
    std::fs::write(&fail, "[[check]]\nkind = \"final_speed_below\"\nmax = 1e-6\n").unwrap();
    let out = vf().args(["eval", trace.to_str().unwrap(), "--check", fail.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));
}

#[test]
fn bad_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.toml");
    std::fs::write(&s, "[sim]\ndt = 0.001\nduration = 1.0\nbogus = 3\n").unwrap();
    let out = vf().args(["run", s.to_str().unwrap(), "--out", dir.path().join("t").to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");
}

#[test]
fn dt_above_limit_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.toml");
    std::fs::write(&s, SCENARIO).unwrap();
    let out = vf()
        .args(["run", s.to_str().unwrap(), "--out", dir.path().join("t").to_str().unwrap(), "--dt", "0.05"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
