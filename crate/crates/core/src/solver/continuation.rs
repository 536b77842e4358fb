//! Method of continuity in t ∈ [0, 1] with certificates at every accepted state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::discretize::Discretization;
use super::eigen::smallest_eigenvalue;
use super::grid::{DomainGrid, Field2D};
use super::linear::SparseSolver;
use super::newton::{newton_solve, NewtonOptions, NewtonReport};
use crate::barrier::BarrierEvaluator;
use crate::certificate::{Cert, CertificateReport, Check, Location, Worst};
use crate::error::{Error, Result};
use crate::exec;
use crate::profile::ProfileSolution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n_sigma: usize,
    pub n_y: usize,
    /// Clustering toward the axis: the first radial spacing is 1/(1 + stretch) of uniform.
    pub stretch: f64,
    pub newton: NewtonOptions,
    pub dt0: f64,
    pub dt_min: f64,
    pub eig_tol: f64,
    pub sigma_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_sigma: 129,
            n_y: 64,
            stretch: 30.0,
            newton: NewtonOptions::default(),
            dt0: 0.1,
            dt_min: 1e-6,
            eig_tol: 1e-6,
            sigma_bound: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sigma < 8 || self.n_y < 8 {
            return Err(Error::invalid(format!("grid {}x{} too small (need 8x8)", self.n_sigma, self.n_y)));
        }
        if !(self.dt0 > 0.0 && self.dt0 <= 1.0 && self.dt_min > 0.0 && self.dt_min <= self.dt0) {
            return Err(Error::invalid("need 0 < dt_min <= dt0 <= 1"));
        }
        if !(self.stretch >= 0.0 && self.sigma_bound > 0.0 && self.newton.tol > 0.0) {
            return Err(Error::invalid("stretch, sigma_bound and newton.tol must be positive"));
        }
        Ok(())
    }

    /// Node counts multiplied by `k` in each direction, keeping the same node positions.
    pub fn refined(mut self, k: usize) -> Self {
        self.n_sigma = (self.n_sigma - 1) * k + 1;
        self.n_y *= k;
        self
    }
}

/// Everything the homotopy needs: the lower profile φ_{ε^α}, the barrier v_ε and the grid.
pub struct Problem<'a> {
    pub barrier: &'a BarrierEvaluator<'a>,
    pub profile: &'a ProfileSolution,
    pub grid: DomainGrid,
    pub tau: f64,
    /// Excess of φ_{ε^α} at every node.
    pub lower: Field2D,
    /// Excess of v_ε at every node.
    pub upper: Field2D,
}

impl<'a> Problem<'a> {
    pub fn new(barrier: &'a BarrierEvaluator<'a>, profile: &'a ProfileSolution, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let p = barrier.params;
        let grid = DomainGrid::new(barrier.h, p.eps, cfg.n_sigma, cfg.n_y, cfg.stretch);
        let tau = p.eps.powf(p.alpha);
        let cols = exec::map_range(grid.n_y, |j| {
            (0..grid.n_sigma)
                .map(|i| {
                    let r = grid.r(i, j);
                    Ok((profile.scaled(tau, r)?.excess, barrier.v_jet(p.eps, r, grid.y[j])?.w))
                })
                .collect::<Result<Vec<_>>>()
        });
        let (mut lower, mut upper) = (grid.field(), grid.field());
        for (j, c) in cols.into_iter().enumerate() {
            for (i, (a, b)) in c?.into_iter().enumerate() {
                lower.set(i, j, a);
                upper.set(i, j, b);
            }
        }
        Ok(Problem { barrier, profile, grid, tau, lower, upper })
    }

    pub fn disc(&self) -> Discretization<'_> {
        Discretization::new(&self.grid, self.barrier.params.m)
    }

    /// Boundary excess at column j: `(1−t)(φ_{ε^α} − r) + t(v_ε − r)` at r = h + √ε.
    fn boundary_excess(&self, t: f64, j: usize) -> f64 {
        let nb = self.grid.n_sigma - 1;
        (1.0 - t) * self.lower.at(nb, j) + t * self.upper.at(nb, j)
    }

    /// Dirichlet value of u at height y: `φ_{ε^α}(r_b) + t(v_ε(r_b, y) − φ_{ε^α}(r_b))`.
    pub fn dirichlet_data(&self, t: f64, y: f64) -> Result<f64> {
        let rb = self.barrier.boundary(y);
        let a = self.profile.scaled(self.tau, rb)?.excess;
        let b = self.barrier.v_jet(self.barrier.params.eps, rb, y)?.w;
        Ok(rb + (1.0 - t) * a + t * b)
    }

    pub fn set_boundary(&self, w: &mut Field2D, t: f64) {
        let nb = self.grid.n_sigma - 1;
        for j in 0..self.grid.n_y {
            w.set(nb, j, self.boundary_excess(t, j));
        }
    }

    /// `M(u)` inside, `u − g_t` on the boundary line.
    pub fn assemble_residual(&self, w: &Field2D, t: f64) -> Result<Field2D> {
        let g: Vec<f64> = (0..self.grid.n_y).map(|j| self.boundary_excess(t, j)).collect();
        self.disc().residual_field(w, &g)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationState {
    pub t: f64,
    /// Excess `u − r` on the grid.
    pub w: Field2D,
    pub lambda_min: f64,
    pub newton: NewtonReport,
    pub certificates: Vec<CertificateReport>,
}

impl ContinuationState {
    pub fn pass(&self) -> bool {
        self.certificates.iter().all(|c| c.pass())
    }

    fn first_failure(&self) -> Option<String> {
        self.certificates.iter().find(|c| !c.pass()).map(|c| {
            let check = c.failures().first().map(|f| f.name.clone()).unwrap_or_default();
            format!("{} ({}): {}", c.name, c.anchor, check)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    pub lambda_min: f64,
    pub pass: bool,
}

pub struct ContinuationRun {
    pub state: ContinuationState,
    /// Discrete solution at t = 0, the reference for the lower ordering bound.
    pub start: Field2D,
    /// `max(φ_{ε^α} − u_0)`: how far the t = 0 discrete solution dips below the profile.
    pub deficit: f64,
    pub steps: Vec<StepRecord>,
}

struct Certifier<'p, 'a> {
    pb: &'p Problem<'a>,
    start: &'p Field2D,
    deficit: f64,
    sigma_bound: f64,
}

impl Certifier<'_, '_> {
    fn certify(&self, t: f64, w: &Field2D, lambda: f64) -> Vec<CertificateReport> {
        let pb = self.pb;
        let g = &pb.grid;
        let p = pb.barrier.params;
        let at = |i: usize, j: usize| Location { r: Some(g.r(i, j)), y: Some(g.y[j]), t: Some(t) };

        let cols = exec::map_range(g.n_y, |j| {
            let mut c = [Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default()];
            let (mut dy_max, mut grad_max) = (Worst::default(), Worst::default());
            let rho = g.boundary_radius(j);
            let cap = pb.barrier.gap_bound(g.y[j]);
            for i in 0..g.n_sigma {
                let wv = w.at(i, j);
                c[0].update(wv - self.start.at(i, j), || at(i, j));
                c[1].update(wv - pb.lower.at(i, j) + self.deficit, || at(i, j));
                c[2].update(pb.upper.at(i, j) - wv, || at(i, j));
                c[3].update(wv, || at(i, j));
                c[4].update(cap - pb.upper.at(i, j), || at(i, j));
                c[5].update(wv - pb.lower.at(i, j), || at(i, j));
                let [gr, gy] = g.gradient(w, i, j);
                dy_max.update(-gy.abs(), || at(i, j));
                if g.r(i, j) >= 0.5 * rho {
                    grad_max.update(-(gr * gr + gy * gy).sqrt(), || at(i, j));
                }
            }
            let nb = g.n_sigma - 1;
            let ratio = (g.r(nb, j) + w.at(nb, j)) / w.at(0, j);
            (c, dy_max, grad_max, ratio, j)
        });

        let mut ord = [Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default(), Worst::default()];
        let (mut dy, mut grad, mut ratio) = (Worst::default(), Worst::default(), Worst::default());
        let need = 0.5 * (1.0 / p.beta).min(1.0 / p.eps.sqrt());
        for (c, d, gm, q, j) in cols {
            for (a, b) in ord.iter_mut().zip(c) {
                *a = a.clone().merge(b);
            }
            dy = dy.merge(d);
            grad = grad.merge(gm);
            ratio.update(q - need, || Location { y: Some(g.y[j]), t: Some(t), r: None });
        }
        let [above_start, above_phi, below_v, pos, cap, raw_phi] = ord;

        let mut order = CertificateReport::new(Cert::SolverOrdering);
        order.push(above_start.check("u >= u_0 (discrete t=0 solution)"));
        order.push(above_phi.check("u >= phi_{eps^alpha} - d0").with_note(format!("d0 = {:.3e}", self.deficit)));
        order.push(Check::info("min (u - phi_{eps^alpha})", raw_phi.margin, raw_phi.location));
        order.push(below_v.check("u <= v_eps"));

        let mut excess = CertificateReport::new(Cert::SolverExcess);
        excess.push(pos.strict("u - r > 0"));
        excess.push(cap.check("v_eps - r <= eps + beta exp(-(h+sqrt eps)^{-1/2})"));

        let mut rat = CertificateReport::new(Cert::SolverRatio);
        rat.push(ratio.check("u(r_b,y)/u(0,y) >= min(1/beta, 1/sqrt eps)/2").with_note(format!("bound {need:.6e}")));

        let mut cond = CertificateReport::new(Cert::SolverConditions);
        cond.push(Check::strict("sup|D_y u| < sigma", self.sigma_bound + dy.margin, dy.location).with_note(format!("sigma = {}", self.sigma_bound)));
        cond.push(Check::strict("|D(u-r)| < 1 on rho/2 <= r <= rho", 1.0 + grad.margin, grad.location));
        cond.push(Check::strict("lambda_min > 0", lambda, Some(Location { t: Some(t), ..Default::default() })));

        vec![order, excess, rat, cond]
    }
}

/// Newton at t = 0 from the sampled profile.
fn solve_start(pb: &Problem, cfg: &SolverConfig, solver: &mut SparseSolver) -> Result<(Field2D, NewtonReport)> {
    let mut w = pb.lower.clone();
    pb.set_boundary(&mut w, 0.0);
    let rep = newton_solve(&pb.disc(), &mut w, cfg.newton, solver)?;
    Ok((w, rep))
}

pub fn continuation_run(pb: &Problem, cfg: &SolverConfig) -> Result<ContinuationRun> {
    let disc = pb.disc();
    let mut solver = SparseSolver::new();
    let (start, rep0) = solve_start(pb, cfg, &mut solver)?;
    let deficit = pb.lower.data.iter().zip(&start.data).fold(0.0f64, |a, (l, u)| a.max(l - u));
    let cert = Certifier { pb, start: &start, deficit, sigma_bound: cfg.sigma_bound };

    let lam = smallest_eigenvalue(&disc, &start, cfg.eig_tol, &mut SparseSolver::new())?.lambda;
    let mut state = ContinuationState { t: 0.0, w: start.clone(), lambda_min: lam, newton: rep0, certificates: cert.certify(0.0, &start, lam) };
    let mut steps = vec![StepRecord { t: 0.0, dt: 0.0, newton_iterations: state.newton.iterations, residual: state.newton.residual, lambda_min: lam, pass: state.pass() }];
    if let Some(c) = state.first_failure() {
        return Err(Error::ContinuationObstruction { t: 0.0, condition: c });
    }

    let mut prev: Option<(f64, Field2D)> = None;
    let mut dt = cfg.dt0;
    let mut eig_solver = SparseSolver::new();
    while state.t < 1.0 {
        let t_new = (state.t + dt).min(1.0);
        let mut w = state.w.clone();
        if let Some((tp, wp)) = &prev {
            let f = (t_new - state.t) / (state.t - tp);
            for (a, (b, c)) in w.data.iter_mut().zip(state.w.data.iter().zip(&wp.data)) {
                *a = b + f * (b - c);
            }
            if disc.check_positive(&w).is_err() {
                w = state.w.clone();
            }
        }
        pb.set_boundary(&mut w, t_new);
        let attempt = newton_solve(&disc, &mut w, cfg.newton, &mut solver).and_then(|rep| {
            let lam = smallest_eigenvalue(&disc, &w, cfg.eig_tol, &mut eig_solver)?.lambda;
            let certs = cert.certify(t_new, &w, lam);
            Ok(ContinuationState { t: t_new, w, lambda_min: lam, newton: rep, certificates: certs })
        });
        let failure = match attempt {
            Ok(next) if next.pass() => {
                let easy = next.newton.iterations <= 3;
                steps.push(StepRecord {
                    t: next.t,
                    dt: t_new - state.t,
                    newton_iterations: next.newton.iterations,
                    residual: next.newton.residual,
                    lambda_min: next.lambda_min,
                    pass: true,
                });
                prev = Some((state.t, std::mem::replace(&mut state, next).w));
                if easy {
                    dt = (2.0 * dt).min(1.0);
                }
                continue;
            }
            Ok(next) => next.first_failure().unwrap_or_default(),
            Err(e) => e.to_string(),
        };
        dt *= 0.5;
        if dt < cfg.dt_min {
            return Err(Error::ContinuationObstruction { t: state.t, condition: failure });
        }
    }
    Ok(ContinuationRun { state, start, deficit, steps })
}

const SNAPSHOT_MAGIC: &str = "conelab-snapshot 1";

/// Plain-text snapshot of a state; every value written with 17 significant digits.
pub fn save_snapshot(path: &Path, t: f64, w: &Field2D) -> Result<()> {
    use std::fmt::Write;
    let mut s = String::with_capacity(24 * w.data.len() + 64);
    writeln!(s, "{SNAPSHOT_MAGIC}").unwrap();
    writeln!(s, "t {t:.16e}").unwrap();
    writeln!(s, "n_sigma {}", w.n_sigma).unwrap();
    writeln!(s, "n_y {}", w.n_y).unwrap();
    for v in &w.data {
        writeln!(s, "{v:.16e}").unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(f64, Field2D)> {
    let bad = |reason: &str| Error::Artifact { path: path.display().to_string(), reason: reason.into() };
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SNAPSHOT_MAGIC) {
        return Err(bad("missing header"));
    }
    let mut field = |key: &str| -> Result<String> {
        let l = lines.next().ok_or_else(|| bad("truncated header"))?;
        l.strip_prefix(key).map(|v| v.trim().to_string()).ok_or_else(|| bad(&format!("expected {key}")))
    };
    let t: f64 = field("t")?.parse().map_err(|_| bad("bad t"))?;
    let n_sigma: usize = field("n_sigma")?.parse().map_err(|_| bad("bad n_sigma"))?;
    let n_y: usize = field("n_y")?.parse().map_err(|_| bad("bad n_y"))?;
    let data = lines.map(|l| l.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad("bad value"))?;
    if data.len() != n_sigma * n_y {
        return Err(bad(&format!("expected {} values, found {}", n_sigma * n_y, data.len())));
    }
    Ok((t, Field2D { n_sigma, n_y, data }))
}
