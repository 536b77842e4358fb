//! The ε → 0 limit u₁, the blend `u = u₁ − ζ(r/h)(u₁ − r)` and its certificates.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierEvaluator;
use crate::certificate::{Cert, CertificateReport, Check, Location, Worst};
use crate::error::{Error, Result};
use crate::exec;
use crate::gap::{period_samples, GapProfile};
use crate::jet::{smooth_step, Jet};
use crate::profile::ProfileSolution;
use crate::sme::SmeJet;
use crate::solver::{DomainGrid, Field2D};

/// A positive surface `u(r, y)` given by its excess jet.
pub trait Surface: Send + Sync {
    fn jet(&self, r: f64, y: f64) -> Result<SmeJet>;
}

/// The y-independent rescaled profile `φ_τ(r)`; an exact SME solution.
pub struct ProfileSurface<'a> {
    pub profile: &'a ProfileSolution,
    pub tau: f64,
}

impl Surface for ProfileSurface<'_> {
    fn jet(&self, r: f64, _y: f64) -> Result<SmeJet> {
        let j = self.profile.scaled(self.tau, r)?;
        Ok(SmeJet { r, w: j.excess, wr: if r == 0.0 { -1.0 } else { j.slope_excess }, wy: 0.0, wrr: j.ddphi, wry: 0.0, wyy: 0.0 })
    }
}

/// A solver field, interpolated linearly in (ζ, y) between node jets.
pub struct FieldSurface {
    pub grid: DomainGrid,
    pub w: Field2D,
}

impl FieldSurface {
    fn column_jet(&self, j: usize, r: f64) -> Result<SmeJet> {
        let g = &self.grid;
        let rho = g.boundary_radius(j);
        let sigma = r / rho;
        if !(sigma >= 0.0) || sigma > 1.0 {
            return Err(Error::OutOfRange { r, limit: rho });
        }
        let z = g.zeta_of(sigma) / g.dzeta;
        let i = (z.floor() as usize).min(g.n_sigma - 2);
        let a = z - i as f64;
        let (p, q) = (g.jet(&self.w, i, j), g.jet(&self.w, i + 1, j));
        let mix = |x: f64, y: f64| (1.0 - a) * x + a * y;
        let wr = if r == 0.0 { -1.0 } else { mix(p.wr, q.wr) };
        Ok(SmeJet { r, w: mix(p.w, q.w), wr, wy: mix(p.wy, q.wy), wrr: mix(p.wrr, q.wrr), wry: mix(p.wry, q.wry), wyy: mix(p.wyy, q.wyy) })
    }
}

impl Surface for FieldSurface {
    fn jet(&self, r: f64, y: f64) -> Result<SmeJet> {
        let g = &self.grid;
        let yy = (y + g.half_period).rem_euclid(2.0 * g.half_period) / g.dy;
        let j0 = (yy.floor() as usize).min(g.n_y - 1);
        let a = yy - j0 as f64;
        let (p, q) = (self.column_jet(j0, r)?, self.column_jet(g.jp(j0), r)?);
        let mix = |x: f64, y: f64| (1.0 - a) * x + a * y;
        Ok(SmeJet { r, w: mix(p.w, q.w), wr: mix(p.wr, q.wr), wy: mix(p.wy, q.wy), wrr: mix(p.wrr, q.wrr), wry: mix(p.wry, q.wry), wyy: mix(p.wyy, q.wyy) })
    }
}

/// Finest ladder field projected onto the envelope `r ≤ u₁ ≤ v₀` that every
/// limit point satisfies, with `v₀ = ψ₀ φ̃(r/ψ₀)` and `ψ₀ = β e^{−h^{−1/2}}`.
pub struct LimitSurface<'a> {
    pub field: FieldSurface,
    pub barrier: &'a BarrierEvaluator<'a>,
}

impl Surface for LimitSurface<'_> {
    fn jet(&self, r: f64, y: f64) -> Result<SmeJet> {
        let upper = self.barrier.v_jet(0.0, r, y)?;
        if upper.w == 0.0 {
            return Ok(SmeJet::cone(r));
        }
        let f = self.field.jet(r, y)?;
        Ok(if f.w >= upper.w {
            upper
        } else if f.w <= 0.0 {
            SmeJet::cone(r)
        } else {
            f
        })
    }
}

pub struct LadderRun {
    pub eps: f64,
    pub surface: FieldSurface,
}

pub struct LimitApproximation<'a> {
    pub u1: LimitSurface<'a>,
    pub eps_ladder: Vec<f64>,
    pub cauchy_gaps: Vec<f64>,
    pub warnings: Vec<String>,
    pub report: CertificateReport,
}

/// Points `(r, y)` with `r ≤ h(y)`: `n_y` columns, `n_r` radii per column.
fn common_region(h: &dyn GapProfile, n_r: usize, n_y: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for y in period_samples(h.half_period(), n_y) {
        let hy = h.h(y);
        for k in 0..n_r {
            pts.push((hy * k as f64 / (n_r - 1) as f64, y));
        }
    }
    pts
}

/// Cauchy gaps between consecutive ladder runs on `r ≤ h(y)` and the projected
/// finest run as u₁. Ladder ε must be strictly decreasing.
pub fn approximate_u1<'a>(mut ladder: Vec<LadderRun>, barrier: &'a BarrierEvaluator<'a>, n_r: usize, n_y: usize) -> Result<LimitApproximation<'a>> {
    if ladder.is_empty() {
        return Err(Error::invalid("empty eps ladder"));
    }
    if ladder.windows(2).any(|p| !(p[1].eps < p[0].eps)) {
        return Err(Error::invalid("eps ladder must be strictly decreasing"));
    }
    let h = barrier.h;
    let pts = common_region(h, n_r, n_y);
    let values = ladder
        .iter()
        .map(|run| exec::map_slice(&pts, |&(r, y)| run.surface.jet(r, y).map(|j| j.w)).into_iter().collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let cauchy_gaps: Vec<f64> = values.windows(2).map(|p| p[0].iter().zip(&p[1]).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))).collect();
    let mut warnings = Vec::new();
    if cauchy_gaps.windows(2).any(|g| !(g[1] < g[0] || g[0] == 0.0 && g[1] == 0.0)) {
        warnings.push("limit not resolved at this ladder".to_string());
    }
    let eps_ladder: Vec<f64> = ladder.iter().map(|r| r.eps).collect();
    let finest = ladder.pop().unwrap();
    let u1 = LimitSurface { field: finest.surface, barrier };

    let mut rep = CertificateReport::new(Cert::GlueLimit);
    for (k, g) in cauchy_gaps.iter().enumerate() {
        rep.push(Check::info(format!("cauchy gap eps {} -> {}", eps_ladder[k], eps_ladder[k + 1]), *g, None));
    }
    if cauchy_gaps.len() >= 2 {
        let worst = cauchy_gaps.windows(2).map(|g| g[0] - g[1]).fold(f64::INFINITY, f64::min);
        rep.push(Check::margin("cauchy gaps non-increasing", worst, None).non_gating());
    }
    // u₁(h, y) against ψ₀ φ̃(h/ψ₀), and the envelope, on the common region
    let (mut seam, mut env, mut projected) = (Worst::default(), Worst::default(), 0usize);
    let fine = values.last().unwrap();
    for (k, &(r, y)) in pts.iter().enumerate() {
        let upper = barrier.v_jet(0.0, r, y)?.w;
        let u = u1.jet(r, y)?.w;
        env.update(u.min(upper - u), || Location::ry(r, y));
        if u != fine[k] {
            projected += 1;
        }
        if r > 0.0 && r == h.h(y) {
            seam.update(-(u - upper).abs(), || Location::ry(r, y));
        }
    }
    rep.push(env.check("r <= u1 <= v0"));
    rep.push(Check::margin("u1(h,y) = psi0 phi~(h/psi0)", 1e-12 + seam.margin, seam.location).with_note("psi0 = beta exp(-h^{-1/2})"));
    rep.push(Check::info("fraction of samples moved by the envelope projection", projected as f64 / pts.len() as f64, None));
    Ok(LimitApproximation { u1, eps_ladder, cauchy_gaps, warnings, report: rep })
}

/// ζ(t) = B(2t − 1): 0 for t ≤ ½, 1 for t ≥ 1, with the standard smooth step B.
pub fn blend_weight(t: Jet) -> Jet {
    smooth_step(t.scale(2.0).offset(-1.0))
}

/// `u = u₁ − ζ(r/h)(u₁ − r)` for r < h, `u = r` for r ≥ h and on K.
pub struct GluedSolution<'a> {
    pub u1: &'a dyn Surface,
    pub h: &'a dyn GapProfile,
    pub beta: f64,
    pub m: u32,
    /// Off only for fault injection: u = u₁ on r < h, cut off at r = h.
    pub blend: bool,
    pub eps_ladder: Vec<f64>,
    pub cauchy_gaps: Vec<f64>,
}

impl<'a> GluedSolution<'a> {
    pub fn new(u1: &'a dyn Surface, h: &'a dyn GapProfile, beta: f64, m: u32) -> Self {
        GluedSolution { u1, h, beta, m, blend: true, eps_ladder: Vec::new(), cauchy_gaps: Vec::new() }
    }

    pub fn jet(&self, r: f64, y: f64) -> Result<SmeJet> {
        let hj = self.h.jet(y);
        let hv = hj.value();
        if !(hv > 0.0) || r >= hv {
            return Ok(SmeJet::cone(r));
        }
        let t = r / hv;
        let w = self.u1.jet(r, y)?;
        if t <= 0.5 || !self.blend {
            return Ok(w);
        }
        let z = blend_weight(Jet::var(t));
        let (z1, z2) = (z.d(1), z.d(2));
        let (h1, h2) = (hj.d(1), hj.d(2));
        // E = 1 − ζ(r/h(y)) and its partials
        let e = 1.0 - z.value();
        let tr = 1.0 / hv;
        let ty = -r * h1 / (hv * hv);
        let tyy = -r * h2 / (hv * hv) + 2.0 * r * h1 * h1 / (hv * hv * hv);
        let try_ = -h1 / (hv * hv);
        let (er, ey) = (-z1 * tr, -z1 * ty);
        let err = -z2 * tr * tr;
        let ery = -z2 * tr * ty - z1 * try_;
        let eyy = -z2 * ty * ty - z1 * tyy;
        Ok(SmeJet {
            r,
            w: e * w.w,
            wr: er * w.w + e * w.wr,
            wy: ey * w.w + e * w.wy,
            wrr: err * w.w + 2.0 * er * w.wr + e * w.wrr,
            wry: ery * w.w + er * w.wy + ey * w.wr + e * w.wry,
            wyy: eyy * w.w + 2.0 * ey * w.wy + e * w.wyy,
        })
    }

    pub fn u(&self, r: f64, y: f64) -> Result<f64> {
        Ok(r + self.jet(r, y)?.w)
    }
}

/// Nodes `r = s·ĥ(y)` with s uniform on `[0, s_max]`, where ĥ = h off K and
/// `max h` on K, so the seams r = h/4, h/2, h are grid lines.
#[derive(Clone, Debug)]
pub struct GlueGrid {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// ĥ, ĥ' per column.
    pub scale: Vec<[f64; 2]>,
    pub in_k: Vec<bool>,
}

impl GlueGrid {
    /// `n_s` must be a multiple of 4 times `s_max` for the seams to be nodes; 1.5 is used throughout.
    pub fn new(h: &dyn GapProfile, n_s: usize, n_y: usize) -> Self {
        let s_max = 1.5;
        let s = (0..=n_s).map(|i| s_max * i as f64 / n_s as f64).collect();
        let y = period_samples(h.half_period(), n_y);
        let h_max = period_samples(h.half_period(), 4096).into_iter().map(|y| h.h(y)).fold(0.0f64, f64::max);
        let mut scale = Vec::with_capacity(n_y);
        let mut in_k = Vec::with_capacity(n_y);
        for &yj in &y {
            let j = h.jet(yj);
            if j.value() > 0.0 {
                scale.push([j.value(), j.d(1)]);
                in_k.push(false);
            } else {
                scale.push([h_max.max(f64::MIN_POSITIVE), 0.0]);
                in_k.push(true);
            }
        }
        GlueGrid { s, y, scale, in_k }
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.s[i] * self.scale[j][0]
    }

    pub fn ds(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    pub fn dy(&self) -> f64 {
        self.y[1] - self.y[0]
    }
}

/// Nodal data of a surface on a [`GlueGrid`], column-major like [`Field2D`].
pub struct GlueSamples {
    pub n_s: usize,
    pub n_y: usize,
    pub jets: Vec<SmeJet>,
}

impl GlueSamples {
    pub fn at(&self, i: usize, j: usize) -> &SmeJet {
        &self.jets[j * self.n_s + i]
    }
}

pub fn sample_glued(g: &GluedSolution, grid: &GlueGrid) -> Result<GlueSamples> {
    let n_s = grid.s.len();
    let cols = exec::map_range(grid.y.len(), |j| (0..n_s).map(|i| g.jet(grid.r(i, j), grid.y[j])).collect::<Result<Vec<_>>>());
    let mut jets = Vec::with_capacity(n_s * grid.y.len());
    for c in cols {
        jets.extend(c?);
    }
    Ok(GlueSamples { n_s, n_y: grid.y.len(), jets })
}

/// Central difference in s (one-sided at the ends) and periodic in y of a nodal scalar,
/// converted to `(∂_r, ∂_y)` at fixed r.
pub fn glue_gradient(grid: &GlueGrid, f: impl Fn(usize, usize) -> f64, i: usize, j: usize) -> [f64; 2] {
    let n_s = grid.s.len();
    let n_y = grid.y.len();
    let ds = grid.ds();
    let fs = if i == 0 {
        (-3.0 * f(0, j) + 4.0 * f(1, j) - f(2, j)) / (2.0 * ds)
    } else if i + 1 == n_s {
        (3.0 * f(i, j) - 4.0 * f(i - 1, j) + f(i - 2, j)) / (2.0 * ds)
    } else {
        (f(i + 1, j) - f(i - 1, j)) / (2.0 * ds)
    };
    let (jp, jm) = ((j + 1) % n_y, (j + n_y - 1) % n_y);
    let fy = (f(i, jp) - f(i, jm)) / (2.0 * grid.dy());
    let [hh, h1] = grid.scale[j];
    [fs / hh, fy - grid.s[i] * h1 / hh * fs]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueDecay {
    pub k: usize,
    pub ell: usize,
    /// sup over r > h/4, y ∉ K of |D^k(u−r)| / (β h^ℓ).
    pub constant: f64,
}

/// |D^k(u−r)| for k = 0..=3 at every node; k = 3 by differencing the second derivatives.
pub fn derivative_magnitudes(grid: &GlueGrid, s: &GlueSamples) -> [Vec<f64>; 4] {
    let n = s.jets.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, j) in s.jets.iter().enumerate() {
        out[0][k] = j.w.abs();
        out[1][k] = j.wr.hypot(j.wy);
        out[2][k] = (j.wrr * j.wrr + 2.0 * j.wry * j.wry + j.wyy * j.wyy).sqrt();
    }
    for j in 0..s.n_y {
        for i in 0..s.n_s {
            let [rrr, rry_a] = glue_gradient(grid, |a, b| s.at(a, b).wrr, i, j);
            let [rry_b, ryy_a] = glue_gradient(grid, |a, b| s.at(a, b).wry, i, j);
            let [ryy_b, yyy] = glue_gradient(grid, |a, b| s.at(a, b).wyy, i, j);
            let rry = 0.5 * (rry_a + rry_b);
            let ryy = 0.5 * (ryy_a + ryy_b);
            out[3][j * s.n_s + i] = (rrr * rrr + 3.0 * rry * rry + 3.0 * ryy * ryy + yyy * yyy).sqrt();
        }
    }
    out
}

/// Finite-difference M(u) from nodal values only, at an interior node.
fn fd_residual(grid: &GlueGrid, s: &GlueSamples, m: u32, i: usize, j: usize) -> Result<f64> {
    let val = |a: usize, b: usize| s.at(a, b).w;
    let [wr, wy] = glue_gradient(grid, val, i, j);
    let d = |f: &dyn Fn(usize, usize) -> f64| glue_gradient(grid, f, i, j);
    let gr = |a: usize, b: usize| glue_gradient(grid, val, a, b)[0];
    let gy = |a: usize, b: usize| glue_gradient(grid, val, a, b)[1];
    let [wrr, wry] = d(&gr);
    let [_, wyy] = d(&gy);
    SmeJet { r: grid.r(i, j), w: s.at(i, j).w, wr, wy, wrr, wry, wyy }.residual(m)
}

/// Node-wise certificates of props-u and ext-u. `tol` is the solver's scaled residual tolerance.
pub fn certify_glued(g: &GluedSolution, grid: &GlueGrid, tol: f64) -> Result<(Vec<CertificateReport>, Vec<GlueDecay>)> {
    let s = sample_glued(g, grid)?;
    let mags = derivative_magnitudes(grid, &s);
    let m = g.m as f64;
    let (mut core, mut pos, mut strict, mut cap) = (Worst::default(), Worst::default(), Worst::default(), Worst::default());
    let (mut cone, mut ray, mut fd) = (Worst::default(), Worst::default(), Worst::default());
    let mut consts = [[0.0f64; 2]; 4];
    for j in 0..s.n_y {
        let y = grid.y[j];
        let hy = g.h.h(y);
        for i in 0..s.n_s {
            let jet = s.at(i, j);
            let r = grid.r(i, j);
            let loc = || Location::ry(r, y);
            if grid.in_k[j] {
                ray.update(-jet.w.abs(), loc);
                continue;
            }
            let si = grid.s[i];
            if si < 0.5 && jet.v() > 0.0 {
                let res = jet.residual(g.m)?;
                core.update(10.0 * tol - res.abs() * jet.v() / m, loc);
            }
            if si < 1.0 {
                pos.update(jet.w, loc);
                strict.update(jet.w, loc);
                cap.update(g.beta * (-1.0 / hy.sqrt()).exp() - jet.w, loc);
            } else {
                cone.update(-jet.w.abs(), loc);
            }
            if si >= 0.25 {
                for (k, mag) in mags.iter().enumerate() {
                    for ell in 0..2 {
                        consts[k][ell] = consts[k][ell].max(mag[j * s.n_s + i] / (g.beta * hy.powi(ell as i32 + 1)));
                    }
                }
                if i > 1 && i + 2 < s.n_s {
                    let a = fd_residual(grid, &s, g.m, i, j)?;
                    let b = jet.residual(g.m)?;
                    fd.update(FD_TOL - (a - b).abs() * jet.v() / m, loc);
                }
            }
        }
    }
    let mut props = CertificateReport::new(Cert::GlueProperties);
    props.push(core.check("|M(u)| u/m <= 10 tol on r < h/2").with_note(format!("tol = {tol:e}; nodes with u = 0 are skipped")));
    props.push(pos.check("u - r >= 0 on r < h"));
    props.push(Check::strict("u - r > 0 on r < h", strict.margin, strict.location).non_gating().with_note("exact zero means the limit underflowed to the cone"));
    props.push(cap.check("u - r <= beta exp(-h^{-1/2}) on r < h"));
    props.push(fd.check("finite-difference M(u) matches jet M(u) on r >= h/4").with_note(format!("tolerance {FD_TOL:e} on |dM| u/m")));
    let mut decay = Vec::new();
    for (k, row) in consts.iter().enumerate() {
        for (ell, c) in row.iter().enumerate() {
            decay.push(GlueDecay { k, ell: ell + 1, constant: *c });
            props.push(Check::margin(format!("C_{k},{} finite", ell + 1), if c.is_finite() { 0.0 } else { -1.0 }, None).with_note(format!("C = {c:.6e}")));
        }
    }
    let mut ext = CertificateReport::new(Cert::GlueExtension);
    ext.push(cone.check("u = r exactly for r >= h"));
    ext.push(ray.check("u = r exactly for y in K"));
    Ok((vec![props, ext], decay))
}

/// Bound on the dimensionless gap between finite-difference and exact M(u) on the band r ≥ h/4.
pub const FD_TOL: f64 = 1e-6;

/// Smooth positive `h(y) = h₀(1 + a cos(πy/R))` with empty K, for exercising the blend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineGap {
    pub h0: f64,
    pub amp: f64,
    #[serde(rename = "R")]
    pub half_period: f64,
}

impl GapProfile for CosineGap {
    fn jet(&self, y: f64) -> Jet {
        let x = Jet::var(y).scale(std::f64::consts::PI / self.half_period);
        let v = x.value();
        x.compose([v.cos(), -v.sin(), -v.cos(), v.sin(), v.cos()]).scale(self.amp * self.h0).offset(self.h0)
    }

    fn in_k(&self, _y: f64) -> bool {
        false
    }

    fn half_period(&self) -> f64 {
        self.half_period
    }
}
