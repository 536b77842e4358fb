//! Residual and Jacobian of the discrete SME on a [`DomainGrid`].
//!
//! Unknowns are the excess values `w = u − r` at every node with `i < n_sigma − 1`;
//! the boundary line ζ = 1 carries Dirichlet data held in the field itself.
//! Unknown `(i, j)` has index `j·(n_sigma − 1) + i`.

use faer::sparse::Triplet;

use super::grid::{DomainGrid, Field2D};
use crate::error::{Error, Result};
use crate::exec;

pub type Entry = Triplet<usize, usize, f64>;

pub struct Discretization<'g> {
    pub grid: &'g DomainGrid,
    pub m: u32,
}

impl<'g> Discretization<'g> {
    pub fn new(grid: &'g DomainGrid, m: u32) -> Self {
        Discretization { grid, m }
    }

    pub fn n_unknowns(&self) -> usize {
        (self.grid.n_sigma - 1) * self.grid.n_y
    }

    #[inline]
    pub fn unknown(&self, i: usize, j: usize) -> usize {
        j * (self.grid.n_sigma - 1) + i
    }

    /// Copy unknown values out of a field.
    pub fn gather(&self, w: &Field2D) -> Vec<f64> {
        let n = self.grid.n_sigma;
        (0..self.grid.n_y).flat_map(|j| (0..n - 1).map(move |i| (i, j))).map(|(i, j)| w.at(i, j)).collect()
    }

    /// Radius of every unknown node, in unknown order.
    pub fn unknown_radii(&self) -> Vec<f64> {
        let g = self.grid;
        (0..g.n_y).flat_map(|j| (0..g.n_sigma - 1).map(move |i| g.r(i, j))).collect()
    }

    /// Add `scale·dx` to the unknown nodes of `w`.
    pub fn scatter_add(&self, w: &mut Field2D, dx: &[f64], scale: f64) {
        let n = self.grid.n_sigma;
        for j in 0..self.grid.n_y {
            for i in 0..n - 1 {
                let k = self.unknown(i, j);
                let idx = w.idx(i, j);
                w.data[idx] += scale * dx[k];
            }
        }
    }

    pub fn check_positive(&self, w: &Field2D) -> Result<()> {
        let g = self.grid;
        for j in 0..g.n_y {
            for i in 0..g.n_sigma {
                let u = g.r(i, j) + w.at(i, j);
                if !(u > 0.0) {
                    return Err(Error::PositivityLost { i, j, u });
                }
            }
        }
        Ok(())
    }

    /// `M(u)` on the unknown nodes, in unknown order.
    pub fn residual(&self, w: &Field2D) -> Result<Vec<f64>> {
        self.check_positive(w)?;
        let g = self.grid;
        let cols = exec::map_range(g.n_y, |j| (0..g.n_sigma - 1).map(|i| g.jet(w, i, j).residual(self.m)).collect::<Result<Vec<_>>>());
        let mut out = Vec::with_capacity(self.n_unknowns());
        for c in cols {
            out.extend(c?);
        }
        Ok(out)
    }

    /// Residual field: `M(u)` inside and on the axis, `w − g` on the boundary line
    /// for boundary excess data `g_j`.
    pub fn residual_field(&self, w: &Field2D, boundary: &[f64]) -> Result<Field2D> {
        let g = self.grid;
        let f = self.residual(w)?;
        let mut out = g.field();
        for j in 0..g.n_y {
            for i in 0..g.n_sigma - 1 {
                out.set(i, j, f[self.unknown(i, j)]);
            }
            let nb = g.n_sigma - 1;
            out.set(nb, j, w.at(nb, j) - boundary[j]);
        }
        Ok(out)
    }

    /// `max |F_k|·u_k/m`: the residual made dimensionless by the local height.
    pub fn scaled_norm(&self, w: &Field2D, f: &[f64]) -> f64 {
        let g = self.grid;
        let m = self.m as f64;
        let mut worst: f64 = 0.0;
        for j in 0..g.n_y {
            for i in 0..g.n_sigma - 1 {
                let v = f[self.unknown(i, j)].abs() * (g.r(i, j) + w.at(i, j)) / m;
                if v.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Residual and Jacobian triplets `∂F/∂W`. The triplet pattern and order
    /// depend only on the grid, so a symbolic factorization can be reused.
    pub fn linearize(&self, w: &Field2D) -> Result<(Vec<f64>, Vec<Entry>)> {
        self.check_positive(w)?;
        let g = self.grid;
        let cols = exec::map_range(g.n_y, |j| self.column(w, j));
        let mut f = Vec::with_capacity(self.n_unknowns());
        let mut trips = Vec::with_capacity(9 * self.n_unknowns());
        for c in cols {
            let (cf, ct) = c?;
            f.extend(cf);
            trips.extend(ct);
        }
        Ok((f, trips))
    }

    fn column(&self, w: &Field2D, j: usize) -> Result<(Vec<f64>, Vec<Entry>)> {
        let g = self.grid;
        let n = g.n_sigma;
        let (jp, jm) = (g.jp(j), g.jm(j));
        let (dz, dy) = (g.dzeta, g.dy);
        let mut f = Vec::with_capacity(n - 1);
        let mut t = Vec::with_capacity(9 * (n - 1));

        // axis row
        let jet = g.jet(w, 0, j);
        f.push(jet.residual(self.m)?);
        let p = jet.partials(self.m)?;
        let zr2 = g.metric(0, j).zr.powi(2);
        let row = self.unknown(0, j);
        let crr = 2.0 * p.wrr * zr2 / (dz * dz);
        t.push(Triplet::new(row, row, p.w - crr - 2.0 * p.wyy / (dy * dy)));
        t.push(Triplet::new(row, self.unknown(1, j), crr));
        t.push(Triplet::new(row, self.unknown(0, jp), p.wy / (2.0 * dy) + p.wyy / (dy * dy)));
        t.push(Triplet::new(row, self.unknown(0, jm), -p.wy / (2.0 * dy) + p.wyy / (dy * dy)));

        for i in 1..n - 1 {
            let jet = g.jet(w, i, j);
            f.push(jet.residual(self.m)?);
            let p = jet.partials(self.m)?;
            let mt = g.metric(i, j);
            let cz = p.wr * mt.zr + p.wy * mt.zy + p.wrr * mt.zrr + p.wry * mt.zry + p.wyy * mt.zyy;
            let czz = p.wrr * mt.zr * mt.zr + p.wry * mt.zr * mt.zy + p.wyy * mt.zy * mt.zy;
            let czy = p.wry * mt.zr + 2.0 * p.wyy * mt.zy;
            let gz = cz / (2.0 * dz);
            let gzz = czz / (dz * dz);
            let gy = p.wy / (2.0 * dy);
            let gyy = p.wyy / (dy * dy);
            let gzy = czy / (4.0 * dz * dy);
            let row = self.unknown(i, j);
            t.push(Triplet::new(row, row, p.w - 2.0 * gzz - 2.0 * gyy));
            t.push(Triplet::new(row, self.unknown(i - 1, j), gzz - gz));
            t.push(Triplet::new(row, self.unknown(i, jp), gyy + gy));
            t.push(Triplet::new(row, self.unknown(i, jm), gyy - gy));
            t.push(Triplet::new(row, self.unknown(i - 1, jm), gzy));
            t.push(Triplet::new(row, self.unknown(i - 1, jp), -gzy));
            if i + 1 < n - 1 {
                t.push(Triplet::new(row, self.unknown(i + 1, j), gzz + gz));
                t.push(Triplet::new(row, self.unknown(i + 1, jp), gzy));
                t.push(Triplet::new(row, self.unknown(i + 1, jm), -gzy));
            }
        }
        Ok((f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    fn grid(n_sigma: usize, n_y: usize) -> DomainGrid {
        DomainGrid::from_boundary(3.0, n_sigma, n_y, 3.0, |y| {
            let x = Jet::var(y).scale(std::f64::consts::PI / 3.0);
            let v = x.value();
            x.compose([v.cos(), -v.sin(), -v.cos(), v.sin(), v.cos()]).scale(0.3).offset(1.0)
        })
    }

    fn smooth_field(g: &DomainGrid) -> Field2D {
        g.sample(|r, y| 1.0 + 0.5 * r * r + 0.05 * (y * 2.0 * std::f64::consts::PI / 3.0).sin() - r)
    }

    #[test]
    fn jacobian_matches_directional_difference() {
        let g = grid(17, 12);
        let d = Discretization::new(&g, 3);
        let w = smooth_field(&g);
        let (f0, trips) = d.linearize(&w).unwrap();
        let n = d.n_unknowns();
        let dir: Vec<f64> = (0..n).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let mut jv = vec![0.0; n];
        for t in &trips {
            jv[t.row] += t.val * dir[t.col];
        }
        let h = 1e-6;
        let mut wp = w.clone();
        d.scatter_add(&mut wp, &dir, h);
        let mut wm = w.clone();
        d.scatter_add(&mut wm, &dir, -h);
        let (fp, fm) = (d.residual(&wp).unwrap(), d.residual(&wm).unwrap());
        let scale = f0.iter().chain(&jv).fold(1.0f64, |a, b| a.max(b.abs()));
        for k in 0..n {
            let fd = (fp[k] - fm[k]) / (2.0 * h);
            assert!((fd - jv[k]).abs() < 1e-5 * scale, "row {k}: fd {fd} vs {}", jv[k]);
        }
    }

    #[test]
    fn pattern_is_state_independent() {
        let g = grid(9, 8);
        let d = Discretization::new(&g, 3);
        let (_, a) = d.linearize(&smooth_field(&g)).unwrap();
        let (_, b) = d.linearize(&g.sample(|r, _| 2.0 + r)).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.row == y.row && x.col == y.col));
    }

    #[test]
    fn positivity_lost_is_reported() {
        let g = grid(9, 8);
        let d = Discretization::new(&g, 3);
        let mut w = smooth_field(&g);
        w.set(3, 2, -10.0);
        assert!(matches!(d.residual(&w), Err(Error::PositivityLost { i: 3, j: 2, .. })));
    }
}
