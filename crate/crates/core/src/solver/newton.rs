//! Damped Newton iteration for the discrete Dirichlet problem.

use serde::{Deserialize, Serialize};

use super::discretize::Discretization;
use super::grid::Field2D;
use super::linear::SparseSolver;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Bound on the dimensionless residual `max |M(u)|·u/m`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 30 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Scaled residual before each step, ending with the accepted value.
    pub history: Vec<f64>,
}

const MAX_HALVINGS: usize = 40;

/// Solve in place. Boundary values of `w` are the Dirichlet data and stay fixed.
///
/// A step is accepted when the scaled residual decreases or, failing that,
/// when the simplified Newton correction `J⁻¹F(trial)` is smaller than the
/// full step in the relative norm `max |δ_k|/u_k`. The second test admits the
/// large, nearly linear core rescalings that boundary changes cause; the
/// residual alone overshoots on those before converging.
pub fn newton_solve(disc: &Discretization, w: &mut Field2D, opts: NewtonOptions, solver: &mut SparseSolver) -> Result<NewtonReport> {
    let n = disc.n_unknowns();
    let mut report = NewtonReport::default();
    let (mut f, mut trips) = disc.linearize(w)?;
    let mut norm = disc.scaled_norm(w, &f);
    report.history.push(norm);
    loop {
        if !norm.is_finite() {
            return Err(Error::NewtonDiverged { iterations: report.iterations, residual: norm });
        }
        if norm <= opts.tol {
            report.residual = norm;
            return Ok(report);
        }
        if report.iterations == opts.max_iter {
            return Err(Error::NewtonDiverged { iterations: report.iterations, residual: norm });
        }
        let mut dx: Vec<f64> = f.iter().map(|v| -v).collect();
        let factor = solver.factor(n, &trips)?;
        factor.solve_in_place(&mut dx)?;
        report.iterations += 1;
        let weights: Vec<f64> = disc.gather(w).iter().zip(disc.unknown_radii()).map(|(w, r)| 1.0 / (w + r)).collect();
        let natural = |v: &[f64]| v.iter().zip(&weights).fold(0.0f64, |a, (x, s)| a.max((x * s).abs()));
        let full = natural(&dx);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = w.clone();
            disc.scatter_add(&mut trial, &dx, step);
            if let Ok(tf) = disc.residual(&trial) {
                let tn = disc.scaled_norm(&trial, &tf);
                // Either the residual drops, or the simplified Newton correction
                // (the residual seen through the current Jacobian) does.
                let mut ok = tn < norm;
                if !ok && tn.is_finite() {
                    let mut bar: Vec<f64> = tf.iter().map(|v| -v).collect();
                    factor.solve_in_place(&mut bar)?;
                    ok = natural(&bar) <= (1.0 - 0.25 * step) * full;
                }
                if ok {
                    accepted = Some((trial, tn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((trial, tn)) = accepted else {
            return Err(Error::NewtonDiverged { iterations: report.iterations, residual: norm });
        };
        *w = trial;
        (f, trips) = disc.linearize(w)?;
        norm = tn;
        report.history.push(norm);
    }
}
