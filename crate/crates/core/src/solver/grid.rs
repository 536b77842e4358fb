//! Boundary-fitted periodic grid over `Ω = {0 ≤ r ≤ ρ(y)}`.
//!
//! The computational coordinates are (ζ, y) with `r = ρ(y)·S(ζ)`,
//! `S(ζ) = (ζ + cζ⁵)/(1 + c)`, so `σ = r/ρ = S(ζ) ∈ [0, 1]` and the boundary is
//! the grid line ζ = 1. The stretching clusters nodes at the axis, where the
//! solution has its core of width ~ε^α.
//!
//! S is odd with `S'''(0) = 0`. The field is the excess `w = u − r`, and
//! differencing it also differences `−ρS(ζ)`; a nonzero `S'''(0)` would leave
//! an O(Δζ²)/r error in `(m/r)u_r` at the first node off the axis.

use serde::{Deserialize, Serialize};

use crate::gap::{period_samples, GapProfile};
use crate::jet::Jet;
use crate::sme::SmeJet;

/// Chain-rule factors of ζ(r, y) at a node.
#[derive(Clone, Copy, Debug, Default)]
pub struct Metric {
    pub zr: f64,
    pub zy: f64,
    pub zrr: f64,
    pub zry: f64,
    pub zyy: f64,
}

#[derive(Clone, Debug)]
pub struct DomainGrid {
    pub n_sigma: usize,
    pub n_y: usize,
    pub half_period: f64,
    pub stretch: f64,
    pub dzeta: f64,
    pub dy: f64,
    pub zeta: Vec<f64>,
    /// S, S', S'' at each ζ node.
    pub map: Vec<[f64; 3]>,
    pub y: Vec<f64>,
    /// ρ, ρ', ρ'' at each y node.
    pub rho: Vec<[f64; 3]>,
    metric: Vec<Metric>,
}

/// Scalar field on the grid nodes, stored column by column (`j·n_sigma + i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub n_sigma: usize,
    pub n_y: usize,
    pub data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(n_sigma: usize, n_y: usize) -> Self {
        Field2D { n_sigma, n_y, data: vec![0.0; n_sigma * n_y] }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n_sigma + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n_sigma + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// S, S', S'' for stretching `c`; `S'(0) = 1/(1+c)`.
pub fn stretch_map(c: f64, z: f64) -> [f64; 3] {
    let z2 = z * z;
    [(z + c * z2 * z2 * z) / (1.0 + c), (1.0 + 5.0 * c * z2 * z2) / (1.0 + c), 20.0 * c * z2 * z / (1.0 + c)]
}

impl DomainGrid {
    /// Grid over `r ≤ h(y) + √ε`.
    pub fn new(h: &dyn GapProfile, eps: f64, n_sigma: usize, n_y: usize, stretch: f64) -> Self {
        let se = eps.sqrt();
        Self::from_boundary(h.half_period(), n_sigma, n_y, stretch, |y| h.jet(y).offset(se))
    }

    /// Grid over `r ≤ ρ(y)` for any smooth positive 2R-periodic ρ given as a jet.
    pub fn from_boundary(half_period: f64, n_sigma: usize, n_y: usize, stretch: f64, rho: impl Fn(f64) -> Jet) -> Self {
        assert!(n_sigma >= 4 && n_y >= 4, "grid too small");
        let dzeta = 1.0 / (n_sigma - 1) as f64;
        let zeta: Vec<f64> = (0..n_sigma).map(|i| i as f64 * dzeta).collect();
        let map: Vec<[f64; 3]> = zeta.iter().map(|&z| stretch_map(stretch, z)).collect();
        let y = period_samples(half_period, n_y);
        let rho: Vec<[f64; 3]> = y
            .iter()
            .map(|&y| {
                let j = rho(y);
                [j.value(), j.d(1), j.d(2)]
            })
            .collect();
        let mut g = DomainGrid {
            n_sigma,
            n_y,
            half_period,
            stretch,
            dzeta,
            dy: 2.0 * half_period / n_y as f64,
            zeta,
            map,
            y,
            rho,
            metric: Vec::new(),
        };
        g.metric = (0..n_y).flat_map(|j| (0..n_sigma).map(move |i| (i, j))).map(|(i, j)| g.compute_metric(i, j)).collect();
        g
    }

    fn compute_metric(&self, i: usize, j: usize) -> Metric {
        let [s, s1, s2] = self.map[i];
        let [rho, rho1, rho2] = self.rho[j];
        let zq = 1.0 / s1;
        let zqq = -s2 / (s1 * s1 * s1);
        let qy = -s * rho1 / rho;
        let qry = -rho1 / (rho * rho);
        let qyy = -s * (rho2 / rho - 2.0 * rho1 * rho1 / (rho * rho));
        Metric {
            zr: zq / rho,
            zy: zq * qy,
            zrr: zqq / (rho * rho),
            zry: zqq * qy / rho + zq * qry,
            zyy: zqq * qy * qy + zq * qyy,
        }
    }

    #[inline]
    pub fn metric(&self, i: usize, j: usize) -> Metric {
        self.metric[j * self.n_sigma + i]
    }

    #[inline]
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.rho[j][0] * self.map[i][0]
    }

    /// ζ with `S(ζ) = σ`, by Newton from σ (S is convex and increasing on [0, 1]).
    pub fn zeta_of(&self, sigma: f64) -> f64 {
        let mut z = sigma;
        for _ in 0..60 {
            let [s, s1, _] = stretch_map(self.stretch, z);
            let dz = (s - sigma) / s1;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        z
    }

    /// σ = r/ρ at a node.
    #[inline]
    pub fn sigma(&self, i: usize) -> f64 {
        self.map[i][0]
    }

    pub fn boundary_radius(&self, j: usize) -> f64 {
        self.rho[j][0]
    }

    pub fn field(&self) -> Field2D {
        Field2D::zeros(self.n_sigma, self.n_y)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Field2D {
        let mut out = self.field();
        let cols = crate::exec::map_range(self.n_y, |j| (0..self.n_sigma).map(|i| f(self.r(i, j), self.y[j])).collect::<Vec<_>>());
        for (j, col) in cols.into_iter().enumerate() {
            out.data[j * self.n_sigma..(j + 1) * self.n_sigma].copy_from_slice(&col);
        }
        out
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.n_y {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.n_y - 1
        } else {
            j - 1
        }
    }

    /// Computational derivatives `(W_ζ, W_ζζ, W_y, W_yy, W_ζy)` of a field at a node with i ≥ 1.
    /// Central in the interior, second-order one-sided on the boundary line.
    pub fn comp_derivs(&self, w: &Field2D, i: usize, j: usize) -> [f64; 5] {
        let (dz, dy) = (self.dzeta, self.dy);
        let (jp, jm) = (self.jp(j), self.jm(j));
        let n = self.n_sigma;
        let d_zeta = |jj: usize| -> (f64, f64) {
            if i + 1 < n {
                let (a, b, c) = (w.at(i - 1, jj), w.at(i, jj), w.at(i + 1, jj));
                ((c - a) / (2.0 * dz), (c - 2.0 * b + a) / (dz * dz))
            } else {
                let (a, b, c, d) = (w.at(i, jj), w.at(i - 1, jj), w.at(i - 2, jj), w.at(i - 3, jj));
                ((3.0 * a - 4.0 * b + c) / (2.0 * dz), (2.0 * a - 5.0 * b + 4.0 * c - d) / (dz * dz))
            }
        };
        let (wz, wzz) = d_zeta(j);
        let (wzp, _) = d_zeta(jp);
        let (wzm, _) = d_zeta(jm);
        let (a, b, c) = (w.at(i, jm), w.at(i, j), w.at(i, jp));
        [wz, wzz, (c - a) / (2.0 * dy), (c - 2.0 * b + a) / (dy * dy), (wzp - wzm) / (2.0 * dy)]
    }

    /// Physical jet of `u = r + w` at a node from the excess field `w`.
    ///
    /// On the axis (i = 0) the field is extended evenly in r, so `u_r = 0`,
    /// `u_ry = 0` and `u_rr` comes from the ghost value `U_{−1} = U_1`.
    pub fn jet(&self, w: &Field2D, i: usize, j: usize) -> SmeJet {
        let (jp, jm) = (self.jp(j), self.jm(j));
        if i == 0 {
            let mt = self.metric(0, j);
            let u0 = w.at(0, j);
            let u1 = w.at(1, j) + self.r(1, j);
            let uzz = 2.0 * (u1 - u0) / (self.dzeta * self.dzeta);
            let (a, c) = (w.at(0, jm), w.at(0, jp));
            return SmeJet {
                r: 0.0,
                w: u0,
                wr: -1.0,
                wy: (c - a) / (2.0 * self.dy),
                wrr: mt.zr * mt.zr * uzz,
                wry: 0.0,
                wyy: (c - 2.0 * u0 + a) / (self.dy * self.dy),
            };
        }
        let [wz, wzz, wy, wyy, wzy] = self.comp_derivs(w, i, j);
        let mt = self.metric(i, j);
        SmeJet {
            r: self.r(i, j),
            w: w.at(i, j),
            wr: mt.zr * wz,
            wy: wy + mt.zy * wz,
            wrr: mt.zr * mt.zr * wzz + mt.zrr * wz,
            wry: mt.zr * mt.zy * wzz + mt.zr * wzy + mt.zry * wz,
            wyy: wyy + 2.0 * mt.zy * wzy + mt.zy * mt.zy * wzz + mt.zyy * wz,
        }
    }

    /// Physical gradient `(F_r, F_y)` of an arbitrary nodal field.
    /// One-sided in ζ on both ends, so it is usable for fields without parity.
    pub fn gradient(&self, f: &Field2D, i: usize, j: usize) -> [f64; 2] {
        let dz = self.dzeta;
        let n = self.n_sigma;
        let fz = |jj: usize| -> f64 {
            if i == 0 {
                (-3.0 * f.at(0, jj) + 4.0 * f.at(1, jj) - f.at(2, jj)) / (2.0 * dz)
            } else if i + 1 == n {
                (3.0 * f.at(i, jj) - 4.0 * f.at(i - 1, jj) + f.at(i - 2, jj)) / (2.0 * dz)
            } else {
                (f.at(i + 1, jj) - f.at(i - 1, jj)) / (2.0 * dz)
            }
        };
        let wz = fz(j);
        let fy = (f.at(i, self.jp(j)) - f.at(i, self.jm(j))) / (2.0 * self.dy);
        let mt = self.metric(i, j);
        [mt.zr * wz, fy + mt.zy * wz]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy(n_sigma: usize, n_y: usize) -> DomainGrid {
        DomainGrid::from_boundary(4.0, n_sigma, n_y, 10.0, |y| {
            let x = Jet::var(y).scale(std::f64::consts::PI / 4.0);
            let v = x.value();
            x.compose([v.sin(), v.cos(), -v.sin(), -v.cos(), v.sin()]).scale(0.2).offset(1.0)
        })
    }

    #[test]
    fn metric_matches_finite_differences() {
        let g = wavy(41, 64);
        // ζ(r, y) from the inverse map by Newton, differentiated numerically
        let c = g.stretch;
        let zeta_of = |r: f64, y: f64| {
            let sigma = r / (1.0 + 0.2 * (std::f64::consts::PI * y / 4.0).sin());
            let mut z = sigma;
            for _ in 0..60 {
                let [s, s1, _] = stretch_map(c, z);
                z -= (s - sigma) / s1;
            }
            z
        };
        for &(i, j) in &[(5usize, 3usize), (20, 17), (33, 50)] {
            let (r, y) = (g.r(i, j), g.y[j]);
            let d = 1e-5;
            let zr = (zeta_of(r + d, y) - zeta_of(r - d, y)) / (2.0 * d);
            let zy = (zeta_of(r, y + d) - zeta_of(r, y - d)) / (2.0 * d);
            let zyy = (zeta_of(r, y + d) - 2.0 * zeta_of(r, y) + zeta_of(r, y - d)) / (d * d);
            let zry = (zeta_of(r + d, y + d) - zeta_of(r + d, y - d) - zeta_of(r - d, y + d) + zeta_of(r - d, y - d)) / (4.0 * d * d);
            let m = g.metric(i, j);
            assert!((m.zr - zr).abs() < 1e-7 * zr.abs().max(1.0));
            assert!((m.zy - zy).abs() < 1e-7);
            assert!((m.zyy - zyy).abs() < 1e-4);
            assert!((m.zry - zry).abs() < 1e-4);
        }
    }

    #[test]
    fn boundary_is_grid_line() {
        let g = wavy(17, 16);
        for j in 0..g.n_y {
            assert!((g.r(g.n_sigma - 1, j) - g.boundary_radius(j)).abs() < 1e-15);
            assert_eq!(g.r(0, j), 0.0);
        }
    }

    #[test]
    fn cone_jet_is_exact() {
        let g = wavy(33, 32);
        let w = g.field();
        for j in 0..g.n_y {
            for i in 1..g.n_sigma {
                let jet = g.jet(&w, i, j);
                assert_eq!(jet.residual(3).unwrap(), 0.0);
            }
        }
    }
}
