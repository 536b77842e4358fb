//! Staged end-to-end run: profile, gap and barriers, continuation, glue, metric.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembler::{approximate_u1, certify_glued, sample_glued, CosineGap, FieldSurface, GlueDecay, GlueGrid, GluedSolution, LadderRun, ProfileSurface};
use crate::barrier::{beta_threshold, compute_b0, proof_constants_check, BarrierEvaluator};
use crate::certificate::{Cert, CertificateReport, Check};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gap::{build_h_unchecked, comparison_check, verify_h_beta, GapProfile};
use crate::ledger::CertificateLedger;
use crate::metric::{assemble_metric, refinement_check, verify_minimality, CharacteristicOptions, MetricFactor, MinimalityStats};
use crate::output::{write_csv, write_json};
use crate::profile::{check_asymptotics, check_profile_properties, check_rescaling, fit_asymptotics, gamma_exponent, ordering_check, solve_profile, supersolution_identity_check, ProfileSolution};
use crate::solver::{c2_closeness_diagnostic, continuation_run, derivative_decay_check, save_snapshot, DecayFit, Problem, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Profile,
    Barriers,
    Solve,
    Assemble,
    Metric,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Profile => "profile",
            Stage::Barriers => "barriers",
            Stage::Solve => "solve",
            Stage::Assemble => "assemble",
            Stage::Metric => "metric",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub gamma: f64,
    pub gamma_fit: f64,
    pub kappa_fit: f64,
    pub gamma_tilde: f64,
    pub b0: f64,
    pub b0_at: f64,
    pub beta: f64,
    pub beta_threshold: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BarrierSummary {
    pub n_r: usize,
    pub n_y: usize,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverSummary {
    pub n_sigma: usize,
    pub n_y: usize,
    pub steps: Vec<StepRecord>,
    pub lambda_min_final: f64,
    pub lambda_min_over_run: f64,
    pub start_deficit: f64,
    pub decay_fits: Vec<DecayFit>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GlueSummary {
    pub eps_ladder: Vec<f64>,
    pub cauchy_gaps: Vec<f64>,
    pub decay_coarse: Vec<GlueDecay>,
    pub decay_fine: Vec<GlueDecay>,
    pub synthetic_decay_coarse: Vec<GlueDecay>,
    pub synthetic_decay_fine: Vec<GlueDecay>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub coarse: MinimalityStats,
    pub fine: MinimalityStats,
    pub synthetic_coarse: Option<MinimalityStats>,
    pub synthetic_fine: Option<MinimalityStats>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub stage: String,
    pub profile: Option<ProfileSummary>,
    pub barrier: Option<BarrierSummary>,
    pub solver: Option<SolverSummary>,
    pub glue: Option<GlueSummary>,
    pub metric: Option<MetricSummary>,
}

pub struct PipelineOutcome {
    pub ledger: CertificateLedger,
    pub summary: RunSummary,
}

/// Prefix check names so a second case can share a registry entry.
fn prefixed(reps: Vec<CertificateReport>, prefix: &str) -> Vec<CertificateReport> {
    reps.into_iter()
        .map(|mut r| {
            for c in &mut r.checks {
                c.name = format!("{prefix}{}", c.name);
            }
            r
        })
        .collect()
}

/// Relative change of every decay constant between two resolutions; zero pairs count as stable.
fn decay_stability(a: &[GlueDecay], b: &[GlueDecay], tol: f64) -> Check {
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for (x, y) in a.iter().zip(b) {
        let rel = if x.constant == 0.0 && y.constant == 0.0 { 0.0 } else { (y.constant / x.constant - 1.0).abs() };
        if !(rel <= worst) {
            worst = rel;
            at = format!("k = {}, l = {}", x.k, x.ell);
        }
    }
    Check::margin("decay constants stable under refinement", tol - worst, None).with_note(format!("max relative change {worst:.4} ({at}), allowed {tol}"))
}

fn profile_rows(p: &ProfileSolution) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..p.nodes.len()).map(|i| vec![p.nodes[i], p.phi[i], p.dphi[i], p.ddphi[i], p.excess[i]])
}

fn glued_rows(g: &GluedSolution, grid: &GlueGrid) -> Result<Vec<Vec<f64>>> {
    let s = sample_glued(g, grid)?;
    let mut rows = Vec::with_capacity(s.jets.len());
    for j in 0..grid.y.len() {
        for i in 0..grid.s.len() {
            let jet = s.at(i, j);
            let mres = if jet.v() > 0.0 { jet.residual(g.m)? * jet.v() / g.m as f64 } else { 0.0 };
            rows.push(vec![jet.r, grid.y[j], jet.v(), jet.w, mres]);
        }
    }
    Ok(rows)
}

fn metric_rows(f: &MetricFactor) -> Vec<Vec<f64>> {
    let g = &f.grid;
    let mut rows = Vec::new();
    for j in 0..g.y.len() {
        for i in 0..g.s.len() {
            rows.push(vec![g.r(i, j), g.y[j], f.f_at(i, j), -f.fbar_at(i, j)]);
        }
    }
    rows
}

const GLUED_HEADER: [&str; 5] = ["r", "y", "u", "u_minus_r", "scaled_M"];
const METRIC_HEADER: [&str; 4] = ["r", "y", "f", "f_minus_1"];

/// Run every stage up to and including `last`, writing artifacts into `out`.
pub fn run_pipeline(cfg: &RunConfig, last: Stage, out: &Path) -> Result<PipelineOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), cfg)?;
    let mut ledger = CertificateLedger::new(last.label());
    let mut summary = RunSummary { stage: last.label().to_string(), ..Default::default() };
    let m = cfg.m;

    // profile
    let clock = Instant::now();
    let stage = Error::in_stage("profile");
    let (phi, phi_t, b0, beta) = (|| -> Result<_> {
        let phi = solve_profile(cfg.profile_params(0.0))?;
        let phi_t = solve_profile(cfg.profile_params(cfg.eta))?;
        let (b0, b0_at) = compute_b0(&phi_t)?;
        let beta = cfg.beta.resolve(cfg.eta, b0);
        let window = (cfg.profile.fit_window[0], cfg.profile.fit_window[1]);
        let fit = fit_asymptotics(&phi, window)?;
        let reps = vec![
            check_profile_properties(&phi),
            check_profile_properties(&phi_t),
            check_asymptotics(&phi, window, cfg.profile.fit_rel_tol)?,
            check_rescaling(&phi, &cfg.profile.rescale_taus)?,
            supersolution_identity_check(&phi_t, cfg.profile.identity_factor),
            ordering_check(cfg.eps, cfg.alpha, &phi, &phi_t, cfg.profile.ordering_samples)?,
        ];
        ledger.add_timed(reps, clock.elapsed().as_secs_f64());
        let header = ["r", "phi", "dphi", "ddphi", "phi_minus_r"];
        write_csv(&out.join("profile_phi.csv"), &header, profile_rows(&phi))?;
        write_csv(&out.join("profile_phi_tilde.csv"), &header, profile_rows(&phi_t))?;
        summary.profile = Some(ProfileSummary {
            gamma: gamma_exponent(m, 0.0)?,
            gamma_fit: fit.gamma,
            kappa_fit: fit.kappa,
            gamma_tilde: gamma_exponent(m, cfg.eta)?,
            b0,
            b0_at,
            beta,
            beta_threshold: beta_threshold(cfg.eta, b0),
            runtime_s: clock.elapsed().as_secs_f64(),
        });
        Ok((phi, phi_t, b0, beta))
    })()
    .map_err(stage)?;
    if last == Stage::Profile {
        return finish(out, ledger, summary);
    }

    // gap function and barriers
    let clock = Instant::now();
    let h = build_h_unchecked(cfg.singular_set(), beta).map_err(Error::in_stage("gap_function"))?;
    let params = cfg.barrier_params(beta, b0, cfg.eps);
    params.validate().map_err(Error::in_stage("barrier"))?;
    let ev = BarrierEvaluator::new(params, &h, &phi_t);
    (|| -> Result<()> {
        let b = &cfg.barrier;
        let mut reps = vec![verify_h_beta(&h, beta, cfg.eps, b.gap_samples), comparison_check(&h, beta, cfg.eps, b.comparison_pairs)];
        let sweep = ev.certify_supersolution(cfg.eps, b.n_r, b.n_y, b.dump_stride)?;
        reps.push(sweep.report);
        reps.push(sweep.ingredients);
        reps.push(ev.barrier_gap_check(b.n_r, b.n_y)?);
        reps.push(ev.monotonicity_check(&b.monotonicity_s, b.monotonicity_n, b.monotonicity_n)?);
        reps.push(proof_constants_check());
        ledger.add_timed(reps, clock.elapsed().as_secs_f64());
        write_csv(&out.join("barrier_residual.csv"), &["r", "y", "M_v"], sweep.samples.iter().map(|s| s.to_vec()))?;
        summary.barrier = Some(BarrierSummary { n_r: b.n_r, n_y: b.n_y, runtime_s: clock.elapsed().as_secs_f64() });
        Ok(())
    })()
    .map_err(Error::in_stage("barrier"))?;
    if last == Stage::Barriers {
        return finish(out, ledger, summary);
    }

    // continuation
    let clock = Instant::now();
    let scfg = cfg.solver_config();
    let pb = Problem::new(&ev, &phi, &scfg).map_err(Error::in_stage("sme_solver"))?;
    let run = continuation_run(&pb, &scfg).map_err(Error::in_stage("sme_solver"))?;
    (|| -> Result<()> {
        let state = &run.state;
        let mut reps = state.certificates.clone();
        let lam_min = run.steps.iter().map(|s| s.lambda_min).fold(f64::INFINITY, f64::min);
        if let Some(cond) = reps.iter_mut().find(|r| r.name == Cert::SolverConditions.name()) {
            cond.push(Check::strict("lambda_min > 0 at every accepted t", lam_min, None).with_note(format!("{} accepted values of t", run.steps.len())));
            cond.push(Check::margin("every accepted t passed all solver certificates", if run.steps.iter().all(|s| s.pass) { 0.0 } else { -1.0 }, None));
        }
        let g = &pb.grid;
        let y0 = *g.y.iter().max_by(|a, b| h.h(**a).total_cmp(&h.h(**b))).unwrap();
        reps.push(c2_closeness_diagnostic(&pb, state, y0, cfg.delta)?);
        let (decay_rep, fits) = derivative_decay_check(&pb, state, &cfg.diagnostics.decay_thetas);
        reps.push(decay_rep);
        ledger.add_timed(reps, clock.elapsed().as_secs_f64());
        let mut rows = Vec::with_capacity(g.n_sigma * g.n_y);
        for j in 0..g.n_y {
            for i in 0..g.n_sigma {
                let r = g.r(i, j);
                rows.push(vec![r, g.y[j], r + state.w.at(i, j), state.w.at(i, j)]);
            }
        }
        write_csv(&out.join("solution.csv"), &["r", "y", "u", "u_minus_r"], rows)?;
        write_csv(
            &out.join("continuation.csv"),
            &["t", "dt", "newton_iterations", "residual", "lambda_min"],
            run.steps.iter().map(|s| vec![s.t, s.dt, s.newton_iterations as f64, s.residual, s.lambda_min]),
        )?;
        save_snapshot(&out.join("solution.snap"), state.t, &state.w)?;
        summary.solver = Some(SolverSummary {
            n_sigma: g.n_sigma,
            n_y: g.n_y,
            steps: run.steps.clone(),
            lambda_min_final: state.lambda_min,
            lambda_min_over_run: lam_min,
            start_deficit: run.deficit,
            decay_fits: fits,
            runtime_s: clock.elapsed().as_secs_f64(),
        });
        Ok(())
    })()
    .map_err(Error::in_stage("sme_solver"))?;
    if last == Stage::Solve {
        return finish(out, ledger, summary);
    }

    // glue
    let clock = Instant::now();
    let gc = &cfg.glue;
    let mut ladder = Vec::new();
    for &eps_l in &gc.eps_ladder {
        let ev_l = BarrierEvaluator::new(cfg.barrier_params(beta, b0, eps_l), &h, &phi_t);
        let lcfg = crate::solver::SolverConfig { n_sigma: gc.ladder_n_sigma, n_y: gc.ladder_n_y, ..scfg };
        let pb_l = Problem::new(&ev_l, &phi, &lcfg).map_err(Error::in_stage("assembler"))?;
        let run_l = continuation_run(&pb_l, &lcfg).map_err(Error::in_stage("assembler"))?;
        ladder.push(LadderRun { eps: eps_l, surface: FieldSurface { grid: pb_l.grid.clone(), w: run_l.state.w } });
    }
    ladder.push(LadderRun { eps: cfg.eps, surface: FieldSurface { grid: pb.grid.clone(), w: run.state.w.clone() } });
    let approx = approximate_u1(ladder, &ev, gc.limit_n_r, gc.limit_n_y).map_err(Error::in_stage("assembler"))?;
    ledger.warnings.extend(approx.warnings.iter().cloned());
    let mut glued = GluedSolution::new(&approx.u1, &h, beta, m);
    glued.eps_ladder = approx.eps_ladder.clone();
    glued.cauchy_gaps = approx.cauchy_gaps.clone();
    let grid_c = GlueGrid::new(&h, gc.n_s, gc.n_y);
    let grid_f = GlueGrid::new(&h, 2 * gc.n_s, 2 * gc.n_y);
    let syn = gc.synthetic.clone().map(|sc| (CosineGap { h0: sc.h0, amp: sc.amp, half_period: cfg.half_period }, sc));
    let syn_u1 = syn.as_ref().map(|(_, sc)| ProfileSurface { profile: &phi, tau: sc.tau });
    let syn_glued = match (&syn, &syn_u1) {
        (Some((sh, sc)), Some(su)) => Some(GluedSolution::new(su, sh, sc.beta, m)),
        _ => None,
    };
    let syn_grids = syn.as_ref().map(|(sh, _)| (GlueGrid::new(sh, gc.n_s, gc.n_y), GlueGrid::new(sh, 2 * gc.n_s, 2 * gc.n_y)));
    let mut gsum = GlueSummary { eps_ladder: approx.eps_ladder.clone(), cauchy_gaps: approx.cauchy_gaps.clone(), ..Default::default() };
    (|| -> Result<()> {
        let tol = scfg.newton.tol;
        let (mut reps, dc) = certify_glued(&glued, &grid_c, tol)?;
        let (fine, df) = certify_glued(&glued, &grid_f, tol)?;
        reps[0].push(decay_stability(&dc, &df, gc.decay_stability));
        for (a, b) in reps.iter_mut().zip(&fine) {
            a.push(Check::info(format!("refined grid passes ({})", b.name), if b.pass() { 1.0 } else { 0.0 }, None));
        }
        reps.push(approx.report.clone());
        write_csv(&out.join("glued.csv"), &GLUED_HEADER, glued_rows(&glued, &grid_c)?)?;
        gsum.decay_coarse = dc;
        gsum.decay_fine = df;
        if let (Some(sg), Some((sgc, sgf))) = (&syn_glued, &syn_grids) {
            let (mut sreps, sdc) = certify_glued(sg, sgc, cfg.profile.tol)?;
            let (sfine, sdf) = certify_glued(sg, sgf, cfg.profile.tol)?;
            sreps[0].push(decay_stability(&sdc, &sdf, gc.decay_stability));
            for (a, b) in sreps.iter_mut().zip(&sfine) {
                a.push(Check::margin(format!("refined grid passes ({})", b.name), if b.pass() { 0.0 } else { -1.0 }, None));
            }
            reps.extend(prefixed(sreps, "synthetic: "));
            write_csv(&out.join("glued_synthetic.csv"), &GLUED_HEADER, glued_rows(sg, sgc)?)?;
            gsum.synthetic_decay_coarse = sdc;
            gsum.synthetic_decay_fine = sdf;
        }
        gsum.runtime_s = clock.elapsed().as_secs_f64();
        ledger.add_timed(reps, gsum.runtime_s);
        Ok(())
    })()
    .map_err(Error::in_stage("assembler"))?;
    summary.glue = Some(gsum);
    if last == Stage::Assemble {
        return finish(out, ledger, summary);
    }

    // metric
    let clock = Instant::now();
    let mc = &cfg.metric;
    let opts_c = CharacteristicOptions { rtol: mc.rtol, atol: mc.atol };
    let opts_f = CharacteristicOptions { rtol: mc.rtol / mc.tol_refinement, atol: mc.atol / mc.tol_refinement };
    (|| -> Result<()> {
        let run_case = |g: &GluedSolution, gc_: &GlueGrid, gf_: &GlueGrid| -> Result<(Vec<CertificateReport>, MinimalityStats, MinimalityStats, MetricFactor)> {
            let fc = assemble_metric(g, gc_, opts_c)?;
            let (mut reps, sc) = verify_minimality(g, &fc)?;
            let ff = assemble_metric(g, gf_, opts_f)?;
            let (fine, sf) = verify_minimality(g, &ff)?;
            let mini = reps.iter_mut().find(|r| r.name == Cert::MetricMinimality.name()).unwrap();
            mini.push(refinement_check(&sc, &sf));
            mini.push(Check::info("max scaled EL residual (refined)", sf.max_residual, None));
            for (a, b) in reps.iter_mut().zip(&fine) {
                a.push(Check::margin(format!("refined grid passes ({})", b.name), if b.pass() { 0.0 } else { -1.0 }, None));
            }
            Ok((reps, sc, sf, fc))
        };
        let (mut reps, sc, sf, fc) = run_case(&glued, &grid_c, &grid_f)?;
        write_csv(&out.join("metric.csv"), &METRIC_HEADER, metric_rows(&fc))?;
        let mut msum = MetricSummary { coarse: sc, fine: sf, ..Default::default() };
        if let (Some(sg), Some((sgc, sgf))) = (&syn_glued, &syn_grids) {
            let (sreps, ssc, ssf, sfc) = run_case(sg, sgc, sgf)?;
            reps.extend(prefixed(sreps, "synthetic: "));
            write_csv(&out.join("metric_synthetic.csv"), &METRIC_HEADER, metric_rows(&sfc))?;
            msum.synthetic_coarse = Some(ssc);
            msum.synthetic_fine = Some(ssf);
        }
        msum.runtime_s = clock.elapsed().as_secs_f64();
        ledger.add_timed(reps, msum.runtime_s);
        summary.metric = Some(msum);
        Ok(())
    })()
    .map_err(Error::in_stage("metric_builder"))?;
    finish(out, ledger, summary)
}

fn finish(out: &Path, ledger: CertificateLedger, summary: RunSummary) -> Result<PipelineOutcome> {
    write_json(&out.join("ledger.json"), &ledger)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(PipelineOutcome { ledger, summary })
}
