//! Smallest eigenvalue of the linearized operator by inverse iteration.

use serde::{Deserialize, Serialize};

use super::discretize::Discretization;
use super::grid::Field2D;
use super::linear::{Factor, SparseSolver};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub lambda: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

/// Inverse power iteration for the eigenvalue of `A` nearest zero.
///
/// Each step solves `A y = x` for unit `x` and estimates `λ ≈ (x·y)/(y·y)`.
/// Converged once two successive estimates agree to `rel_tol`.
pub fn inverse_iteration(factor: &Factor, x0: Vec<f64>, rel_tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut x = x0;
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let mut y = x.clone();
        factor.solve_in_place(&mut y)?;
        let yy: f64 = y.iter().map(|a| a * a).sum();
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let lambda = xy / yy;
        let ny = yy.sqrt();
        x = y.into_iter().map(|v| v / ny).collect();
        let done = history.last().is_some_and(|&prev: &f64| (lambda - prev).abs() <= rel_tol * lambda.abs());
        history.push(lambda);
        if done {
            return Ok(EigenEstimate { lambda, iterations: it, history, vector: x });
        }
    }
    Err(Error::EigenStagnation { history })
}

/// Smallest eigenvalue of `−DM(u)` with Dirichlet rows removed, symmetry on
/// the axis and periodicity in y, started from the positive constant vector.
pub fn smallest_eigenvalue(disc: &Discretization, w: &Field2D, rel_tol: f64, solver: &mut SparseSolver) -> Result<EigenEstimate> {
    let (_, mut trips) = disc.linearize(w)?;
    for t in trips.iter_mut() {
        t.val = -t.val;
    }
    let n = disc.n_unknowns();
    let factor = solver.factor(n, &trips)?;
    inverse_iteration(&factor, vec![1.0; n], rel_tol, 500)
}
