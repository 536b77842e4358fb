use conelab::config::{BetaPolicy, RunConfig};
use conelab::error::Error;
use conelab::pipeline::{run_pipeline, Stage};
use conelab::plots::emit_plots;

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.barrier.n_r = 64;
    c.barrier.n_y = 64;
    c.barrier.monotonicity_n = 32;
    c.solver.n_sigma = 65;
    c.solver.n_y = 32;
    c.glue.ladder_n_sigma = 33;
    c.glue.ladder_n_y = 16;
    c.glue.n_s = 48;
    c.glue.n_y = 32;
    c
}

#[test]
fn small_full_run_passes_and_covers_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&small(), Stage::Metric, dir.path()).unwrap();
    eprintln!("{}", out.ledger.summary_table());
    assert!(out.ledger.missing().is_empty(), "{:?}", out.ledger.missing());
    assert!(out.ledger.pass);
    for f in ["profile_phi.csv", "barrier_residual.csv", "solution.csv", "glued.csv", "metric.csv", "ledger.json", "summary.json", "solution.snap"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let plots = emit_plots(dir.path()).unwrap();
    assert_eq!(plots.len(), 7);
    let svg = std::fs::read_to_string(dir.path().join("u_minus_r.svg")).unwrap();
    assert!(svg.contains("identically 0"));
}

#[test]
fn plots_need_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    match emit_plots(dir.path()) {
        Err(Error::MissingArtifacts(v)) => assert_eq!(v.len(), 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn profile_stage_alone() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_pipeline(&small(), Stage::Profile, dir.path()).unwrap();
    assert!(out.ledger.pass);
    assert!(out.summary.solver.is_none());
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn beta_above_threshold_fails_barrier_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.beta = BetaPolicy::Explicit(0.0075);
    let out = run_pipeline(&c, Stage::Barriers, dir.path()).unwrap();
    assert!(!out.ledger.pass);
    assert!(!out.ledger.entry("barrier.supersolution").unwrap().pass);
}

#[test]
fn invalid_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.eta = 0.5;
    let e = run_pipeline(&c, Stage::Profile, dir.path()).err().unwrap();
    assert_eq!(e.exit_code(), 3);
}
