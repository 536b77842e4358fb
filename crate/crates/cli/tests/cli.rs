use std::process::Command;

fn conelab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conelab"))
}

fn write_config(dir: &std::path::Path, json: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
  "barrier": {"n_r": 64, "n_y": 64, "monotonicity_n": 32},
  "solver": {"n_sigma": 65, "n_y": 32},
  "glue": {"ladder_n_sigma": 33, "ladder_n_y": 16, "n_s": 48, "n_y": 32}
}"#;

#[test]
fn verify_all_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let st = conelab().args(["verify-all", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let o = conelab().arg("report").arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("metric.minimality"));
    assert!(out.join("f_minus_1.svg").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"eta": 0.5}"#);
    let st = conelab().args(["profile", "--config"]).arg(&bad).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(3));

    let beta = write_config(dir.path(), r#"{"beta": 0.0075, "barrier": {"n_r": 32, "n_y": 32, "monotonicity_n": 16}}"#);
    let st = conelab().args(["barriers", "--config"]).arg(&beta).arg("--out").arg(dir.path().join("b")).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let st = conelab().arg("report").arg("--out").arg(dir.path().join("nothing")).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = conelab().args(["profile", "--grid-scale", "0"]).status().unwrap();
    assert_eq!(st.code(), Some(3));
}
