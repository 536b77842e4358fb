//! Sparse LU with a reusable symbolic factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use faer::MatMut;

use super::discretize::Entry;
use crate::error::{Error, Result};

/// Factorizes matrices that share one sparsity pattern.
#[derive(Default)]
pub struct SparseSolver {
    symbolic: Option<SymbolicLu<usize>>,
}

pub struct Factor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseSolver {
    pub fn new() -> Self {
        // Keep factorizations reproducible run to run.
        faer::set_global_parallelism(faer::Par::Seq);
        SparseSolver { symbolic: None }
    }

    pub fn factor(&mut self, n: usize, entries: &[Entry]) -> Result<Factor> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, entries)
            .map_err(|e| Error::Domain(format!("sparse assembly: {e:?}")))?;
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(mat.symbolic()).map_err(|_| Error::LinearizationSingular)?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref()).map_err(|_| Error::LinearizationSingular)?;
        Ok(Factor { lu, n })
    }
}

impl Factor {
    /// Overwrite `rhs` with the solution. Non-finite output means a singular pivot.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        assert_eq!(rhs.len(), self.n);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
        if rhs.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::LinearizationSingular)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::sparse::Triplet;

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push(Triplet::new(i, i, 2.0));
            if i > 0 {
                t.push(Triplet::new(i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push(Triplet::new(i, i + 1, -1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for e in &t {
            b[e.row] += e.val * x[e.col];
        }
        let mut s = SparseSolver::new();
        let f = s.factor(n, &t).unwrap();
        f.solve_in_place(&mut b).unwrap();
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
        // second factorization reuses the pattern
        let t2: Vec<_> = t.iter().map(|e| Triplet::new(e.row, e.col, 3.0 * e.val)).collect();
        let f2 = s.factor(n, &t2).unwrap();
        let mut b2 = vec![3.0; n];
        f2.solve_in_place(&mut b2).unwrap();
        assert!(b2.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn duplicates_are_summed() {
        let t = vec![Triplet::new(0, 0, 1.0), Triplet::new(0, 0, 1.0), Triplet::new(1, 1, 4.0)];
        let f = SparseSolver::new().factor(2, &t).unwrap();
        let mut b = vec![2.0, 4.0];
        f.solve_in_place(&mut b).unwrap();
        assert_eq!(b, vec![1.0, 1.0]);
    }
}
