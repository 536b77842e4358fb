//! One pass/fail line per acceptance criterion. Tolerances are fixed here.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use conelab::barrier::{compute_b0, proof_constants_check, BarrierEvaluator};
use conelab::config::RunConfig;
use conelab::gap::build_h;
use conelab::ledger::CertificateLedger;
use conelab::metric::tail_value;
use conelab::pipeline::{run_pipeline, RunSummary, Stage};
use conelab::profile::{check_profile_properties, check_rescaling, fit_asymptotics, gamma_exponent, solve_profile, ProfileParams};
use conelab::solver::{Discretization, DomainGrid};

struct Line {
    ok: bool,
    text: String,
}

fn line(n: usize, ok: bool, text: String) -> Line {
    println!("criterion {n}: {} {text}", if ok { "PASS" } else { "FAIL" });
    Line { ok, text }
}

fn entry_pass(l: &CertificateLedger, name: &str) -> bool {
    l.entry(name).is_some_and(|e| e.pass)
}

fn check_pass(l: &CertificateLedger, entry: &str, check: &str) -> bool {
    l.entry(entry).and_then(|e| e.checks.iter().find(|c| c.name == check)).is_some_and(|c| c.pass)
}

fn criterion_1() -> Line {
    let t = Instant::now();
    let exact = gamma_exponent(3, 0.0).unwrap() == 2.0;
    let phi = solve_profile(ProfileParams::new(3, 0.0).with_r_max(1e3).with_tol(1e-10)).unwrap();
    let fit = fit_asymptotics(&phi, (50.0, 500.0)).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let rel = (fit.gamma / 2.0 - 1.0).abs();
    line(1, exact && rel <= 0.02 && secs < 1.0, format!("gamma(3,0) == 2: {exact}; fitted gamma {:.5} (rel err {rel:.2e} <= 0.02); {secs:.3}s < 1s", fit.gamma))
}

fn criterion_2() -> Line {
    let t = Instant::now();
    let mut ok = true;
    let mut fails = Vec::new();
    for eta in [0.0, 0.02] {
        let p = solve_profile(ProfileParams::new(3, eta).with_r_max(1e3).with_tol(1e-10)).unwrap();
        let rep = check_profile_properties(&p);
        ok &= rep.pass();
        fails.extend(rep.failures().iter().map(|c| format!("eta {eta}: {}", c.name)));
        if eta == 0.0 {
            let resc = check_rescaling(&p, &[0.1, 1.0, 10.0]).unwrap();
            ok &= resc.pass();
            fails.extend(resc.failures().iter().map(|c| c.name.clone()));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(2, ok && secs < 10.0, format!("profile properties for eta in {{0, 0.02}} and rescaling for tau in {{0.1, 1, 10}}; failures {fails:?}; {secs:.2}s < 10s"))
}

fn criterion_3() -> Line {
    let t = Instant::now();
    let cfg = RunConfig::default();
    let phi_t = solve_profile(cfg.profile_params(cfg.eta)).unwrap();
    let (b0, _) = compute_b0(&phi_t).unwrap();
    let beta = cfg.beta.resolve(cfg.eta, b0);
    let h = build_h(cfg.singular_set(), beta).unwrap();
    let ev = BarrierEvaluator::new(cfg.barrier_params(beta, b0, cfg.eps), &h, &phi_t);
    let sweep = ev.certify_supersolution(cfg.eps, 512, 512, 0).unwrap();
    let consts = proof_constants_check();
    let secs = t.elapsed().as_secs_f64();
    let worst = sweep.report.decisive().map_or(f64::NAN, |c| c.worst_margin);
    let ok = sweep.report.pass() && sweep.ingredients.pass() && consts.pass() && secs < 60.0;
    line(3, ok, format!("M(v_eps) < 0 and quantitative bound on 512x512 (worst relative margin {worst:.3e}), psi ingredients {}, constants {}; beta {beta:.4e}; {secs:.1}s < 60s", sweep.ingredients.pass(), consts.pass()))
}

fn criterion_4(l: &CertificateLedger, s: &RunSummary) -> Line {
    let sol = s.solver.as_ref().unwrap();
    let names = ["solver.ordering", "solver.excess_bound", "solver.ratio", "solver.conditions"];
    let ok = names.iter().all(|n| entry_pass(l, n)) && sol.steps.last().is_some_and(|st| st.t == 1.0) && sol.lambda_min_over_run > 0.0 && sol.runtime_s < 600.0 && sol.n_sigma == 256 && sol.n_y == 512;
    let ratio = l.entry("solver.ratio").map_or(f64::NAN, |e| e.worst_margin);
    line(
        4,
        ok,
        format!(
            "t = 1 reached on {}x{} in {} steps; ut-bds, ut-r-bd, ratio (margin {ratio:.3e}), uted-conds pass: {:?}; min lambda {:.4e}; {:.1}s < 600s",
            sol.n_sigma,
            sol.n_y,
            sol.steps.len() - 1,
            names.iter().map(|n| entry_pass(l, n)).collect::<Vec<_>>(),
            sol.lambda_min_over_run,
            sol.runtime_s
        ),
    )
}

fn criterion_5() -> Line {
    let rr = 3.0;
    let k = PI / rr;
    let wavy = move |y: f64| {
        let x = conelab::jet::Jet::var(y).scale(PI / rr);
        let v = x.value();
        x.compose([v.cos(), -v.sin(), -v.cos(), v.sin(), v.cos()]).scale(0.3).offset(1.0)
    };
    let exact = |r: f64, y: f64| {
        let v = 1.0 + r * r + 0.1 * (k * y).cos();
        let vy = -0.1 * k * (k * y).sin();
        let vyy = -0.1 * k * k * (k * y).cos();
        let den = 1.0 + 4.0 * r * r + vy * vy;
        ((1.0 + vy * vy) * 2.0 + (1.0 + 4.0 * r * r) * vyy) / den + 3.0 * (2.0 - 1.0 / v)
    };
    let mut errs = Vec::new();
    for scale in [1usize, 2, 4] {
        let g = DomainGrid::from_boundary(rr, 16 * scale + 1, 16 * scale, 10.0, wavy);
        let w = g.sample(|r, y| 1.0 + r * r + 0.1 * (k * y).cos() - r);
        let d = Discretization::new(&g, 3);
        let f = d.residual(&w).unwrap();
        let mut e: f64 = 0.0;
        for j in 0..g.n_y {
            for i in 0..g.n_sigma - 1 {
                e = e.max((f[d.unknown(i, j)] - exact(g.r(i, j), g.y[j])).abs());
            }
        }
        errs.push(e);
    }
    let orders: Vec<f64> = errs.windows(2).map(|p| (p[0] / p[1]).log2()).collect();
    let ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    line(5, ok, format!("manufactured residual errors {} at scales 1, 2, 4; orders {orders:.3?} within 2.0 +- 0.2", sci(&errs)))
}

fn criterion_6(l: &CertificateLedger, s: &RunSummary) -> Line {
    let g = s.glue.as_ref().unwrap();
    let core = check_pass(l, "glue.properties", "|M(u)| u/m <= 10 tol on r < h/2");
    let stable = check_pass(l, "glue.properties", "decay constants stable under refinement");
    let syn_stable = check_pass(l, "glue.properties", "synthetic: decay constants stable under refinement");
    let ok = entry_pass(l, "glue.properties") && entry_pass(l, "glue.extension") && core && stable && syn_stable;
    let rel: Vec<String> = g.synthetic_decay_coarse.iter().zip(&g.synthetic_decay_fine).map(|(a, b)| format!("C{}{}={:.3e}/{:.3e}", a.k, a.ell, a.constant, b.constant)).collect();
    let max_c = g.decay_coarse.iter().fold(0.0f64, |a, d| a.max(d.constant));
    line(
        6,
        ok,
        format!(
            "M(u) core bound {core}, u = r on r >= h and K {}, decay stable {stable} (max constant {max_c:.3e}, Cauchy gaps {}); synthetic case stable {syn_stable}: {}",
            entry_pass(l, "glue.extension"),
            sci(&g.cauchy_gaps),
            rel.join(" ")
        ),
    )
}

fn criterion_7(l: &CertificateLedger, s: &RunSummary) -> Line {
    let m = s.metric.as_ref().unwrap();
    let oracle = tail_value(0.01, 1.0, 2.0, 3).unwrap();
    let oracle_ok = (oracle - 0.00397).abs() <= 1e-5;
    let dec = check_pass(l, "metric.minimality", "EL residual decreasing under refinement");
    let syn_dec = check_pass(l, "metric.minimality", "synthetic: EL residual decreasing under refinement");
    let tail = check_pass(l, "metric.minimality", "scaled EL residual <= 1e-8 on r >= h") && check_pass(l, "metric.minimality", "synthetic: scaled EL residual <= 1e-8 on r >= h");
    let unit = check_pass(l, "metric.seams", "f = 1 exactly on r <= h/2") && check_pass(l, "metric.seams", "f = 1 exactly for y in K");
    let small = check_pass(l, "metric.decay", "max |f - 1| < 1/2") && check_pass(l, "metric.decay", "synthetic: max |f - 1| < 1/2");
    let ok = oracle_ok && dec && syn_dec && tail && unit && small && ["metric.minimality", "metric.seams", "metric.decay", "metric.non_degeneracy"].iter().all(|n| entry_pass(l, n)) && m.runtime_s < 300.0;
    let (sc, sf) = (m.synthetic_coarse.clone().unwrap_or_default(), m.synthetic_fine.clone().unwrap_or_default());
    line(
        7,
        ok,
        format!(
            "EL residual {:.3e} -> {:.3e} (synthetic {:.3e} -> {:.3e}); tail residual <= 1e-8 {tail} (max {:.1e}); f = 1 on core and K {unit}; tail oracle {oracle:.6} (want 0.00397 +- 1e-5); max|f-1| {:.3e} / synthetic {:.3e}; {:.1}s < 300s",
            m.coarse.max_residual, m.fine.max_residual, sc.max_residual, sf.max_residual, sc.max_tail.max(m.coarse.max_tail), m.coarse.max_f_minus_one, sc.max_f_minus_one, m.runtime_s
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).filter(|n| n.ends_with(".csv")).collect();
    v.sort();
    v
}

fn criterion_8(a: &Path, b: &Path) -> Line {
    let (fa, fb) = (csv_files(a), csv_files(b));
    let mut differ = Vec::new();
    for f in &fa {
        if std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() {
            differ.push(f.clone());
        }
    }
    line(8, fa == fb && differ.is_empty() && !fa.is_empty(), format!("{} CSV files compared byte for byte; differing {differ:?}", fa.len()))
}

fn main() {
    let mut lines = vec![criterion_1(), criterion_2(), criterion_3()];
    let cfg = RunConfig::default();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let first = run_pipeline(&cfg, Stage::Metric, dir_a.path());
    let secs = t.elapsed().as_secs_f64();
    match first {
        Ok(out) => {
            print!("{}", out.ledger.summary_table());
            println!("full run {secs:.1}s");
            lines.push(criterion_4(&out.ledger, &out.summary));
            lines.push(criterion_5());
            lines.push(criterion_6(&out.ledger, &out.summary));
            lines.push(criterion_7(&out.ledger, &out.summary));
            match run_pipeline(&cfg, Stage::Metric, dir_b.path()) {
                Ok(_) => lines.push(criterion_8(dir_a.path(), dir_b.path())),
                Err(e) => lines.push(line(8, false, format!("second run failed: {e}"))),
            }
        }
        Err(e) => {
            for n in [4, 6, 7, 8] {
                lines.push(line(n, false, format!("full run failed: {e}")));
            }
            lines.push(criterion_5());
        }
    }
    let failed: Vec<&Line> = lines.iter().filter(|l| !l.ok).collect();
    println!("acceptance: {} of {} criteria pass", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        for l in failed {
            eprintln!("failed: {}", l.text);
        }
        std::process::exit(1);
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}
