//! Conformal factor f(r, y) with f ≡ 1 near the core, transported by
//! characteristics across h/2 ≤ r ≤ h and given in closed form beyond.

use serde::{Deserialize, Serialize};

use crate::assembler::{glue_gradient, sample_glued, GlueGrid, GlueSamples, GluedSolution};
use crate::certificate::{Cert, CertificateReport, Check, Location, Worst};
use crate::error::{Error, Result};
use crate::exec;
use crate::ode::{dopri5, StepControl};
use crate::sme::SmeJet;

/// κ₁ = 1/(2m+3), κ₂ = 4m/(2m+3).
pub fn kappas(m: u32) -> (f64, f64) {
    let d = 2.0 * m as f64 + 3.0;
    (1.0 / d, 4.0 * m as f64 / d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportCoefficients {
    /// ½(m + 1 + 1/(1 + |Du|²(1 − f̄))).
    pub coefficient: f64,
    /// Du = (u_r, u_y).
    pub direction: [f64; 2],
    /// M(u) − E(u, f̄) f̄.
    pub rhs: f64,
}

/// E(u, f̄) = Δu − (2 + P − f̄(1+P)) / ((1 + P − f̄P)(1+P)) · Q with P = |Du|².
pub fn e_coefficient(jet: &SmeJet, m: u32, fbar: f64) -> Result<f64> {
    let (ur, uy) = (1.0 + jet.wr, jet.wy);
    let p = ur * ur + uy * uy;
    let den = 1.0 + p - fbar * p;
    if !(den > 0.0) {
        return Err(Error::Domain(format!("1 + |Du|^2 (1 - fbar) = {den} at r = {}", jet.r)));
    }
    let q = ur * ur * jet.wrr + uy * uy * jet.wyy + 2.0 * ur * uy * jet.wry;
    let lap = jet.wrr + m as f64 * ur / jet.r + jet.wyy;
    Ok(lap - (2.0 + p - fbar * (1.0 + p)) / (den * (1.0 + p)) * q)
}

/// Coefficients of `coefficient · Du·Df̄ = rhs`, valid for r > 0.
pub fn rhs_evaluator(jet: &SmeJet, m: u32, fbar: f64) -> Result<TransportCoefficients> {
    let (ur, uy) = (1.0 + jet.wr, jet.wy);
    let p = ur * ur + uy * uy;
    let e = e_coefficient(jet, m, fbar)?;
    Ok(TransportCoefficients {
        coefficient: 0.5 * (m as f64 + 1.0 + 1.0 / (1.0 + p * (1.0 - fbar))),
        direction: [ur, uy],
        rhs: jet.residual(m)? - e * fbar,
    })
}

/// EL residual of the area of the metric f(r,y)-conformal on the slice directions,
/// given f and Df = (f_r, f_y).
pub fn el_residual(jet: &SmeJet, m: u32, f: f64, df: [f64; 2]) -> f64 {
    let (ur, uy) = (1.0 + jet.wr, jet.wy);
    let p = ur * ur + uy * uy;
    let q = ur * ur * jet.wrr + uy * uy * jet.wyy + 2.0 * ur * uy * jet.wry;
    let lap = jet.wrr + m as f64 * ur / jet.r + jet.wyy;
    let mf = m as f64;
    0.5 * (mf + 1.0 + 1.0 / (1.0 + f * p)) * (df[0] * ur + df[1] * uy) + f * (lap - f * q / (1.0 + f * p)) - mf / jet.v()
}

/// f̄(r) solving `(m+1+1/(2−f̄)) f̄_r = −2m f̄/r` with `f̄(h) = fbar_h`, and its r-derivative.
///
/// The implicit form `(2−f̄)^{−κ₁} f̄ = const · r^{−κ₂}` holds for either sign of f̄,
/// and its left side is increasing on (−½, ½), so negative traces are accepted too.
pub fn tail_value_with_slope(fbar_h: f64, h: f64, r: f64, m: u32) -> Result<(f64, f64)> {
    if !(fbar_h.abs() < 0.5) || !(h > 0.0) || !(r >= h) {
        return Err(Error::invalid(format!("tail_value needs |fbar_h| < 1/2, 0 < h <= r (got {fbar_h}, {h}, {r})")));
    }
    let (k1, k2) = kappas(m);
    let lhs = |f: f64| (2.0 - f).powf(-k1) * f;
    let target = lhs(fbar_h) * (h / r).powf(k2);
    let f = if r == h {
        fbar_h
    } else if target == 0.0 {
        0.0
    } else {
        // Newton with bisection fallback on the bracket [0, f̄_h] (or [f̄_h, 0])
        let (mut lo, mut hi) = if fbar_h > 0.0 { (0.0, fbar_h) } else { (fbar_h, 0.0) };
        let mut f = target * 2f64.powf(k1);
        for _ in 0..100 {
            let g = lhs(f) - target;
            if g > 0.0 {
                hi = f;
            } else {
                lo = f;
            }
            let dg = (2.0 - f).powf(-k1) * (1.0 + k1 * f / (2.0 - f));
            let mut next = f - g / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - f).abs() <= 4.0 * f64::EPSILON * next.abs() {
                f = next;
                break;
            }
            f = next;
        }
        f
    };
    let mf = m as f64;
    let slope = -2.0 * mf * f / (r * (mf + 1.0 + 1.0 / (2.0 - f)));
    Ok((f, slope))
}

pub fn tail_value(fbar_h: f64, h: f64, r: f64, m: u32) -> Result<f64> {
    Ok(tail_value_with_slope(fbar_h, h, r, m)?.0)
}

#[derive(Clone, Copy, Debug)]
pub struct CharacteristicOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for CharacteristicOptions {
    fn default() -> Self {
        CharacteristicOptions { rtol: 1e-10, atol: 1e-16 }
    }
}

/// f̄ on the glue grid nodes with ½ ≤ s ≤ 1, column-major like the grid, plus the trace at s = 1.
pub struct TransitionField {
    pub values: Vec<f64>,
    pub trace: Vec<f64>,
    /// Index of the first node with s ≥ ½ and of the node s = 1.
    pub i_half: usize,
    pub i_one: usize,
}

fn seam_index(grid: &GlueGrid, s: f64) -> Result<usize> {
    let i = (s / grid.ds()).round() as usize;
    if (grid.s[i] - s).abs() > 1e-12 {
        return Err(Error::invalid(format!("glue grid has no node at s = {s}; use a multiple of 6 radial cells")));
    }
    Ok(i)
}

/// Transport along `d(r,y)/dτ = Du`, `df̄/dτ = rhs/coefficient` from `f̄ = seed(y)` on r = h/2.
/// Columns are parametrised by s = r/h(y) so every characteristic ends on r = h.
pub fn integrate_characteristics_from(
    u: &GluedSolution,
    grid: &GlueGrid,
    opts: CharacteristicOptions,
    seed: impl Fn(f64) -> f64 + Sync,
) -> Result<TransitionField> {
    let i_half = seam_index(grid, 0.5)?;
    let i_one = seam_index(grid, 1.0)?;
    let n_lev = i_one - i_half + 1;
    let period = 2.0 * u.h.half_period();
    let m = u.m;
    let ctl = StepControl { rtol: opts.rtol, atol: opts.atol, h_init: grid.ds(), h_min: 1e-14 };
    // each seed column yields (Y(s), F(s)) at the s-levels of the grid
    let chars = exec::map_range(grid.y.len(), |j| -> Result<Vec<[f64; 2]>> {
        let y0 = grid.y[j];
        let mut out = vec![[y0, 0.0]; n_lev];
        if grid.in_k[j] {
            return Ok(out);
        }
        let rhs = |s: f64, st: &[f64; 2]| -> Result<[f64; 2]> {
            let hj = u.h.jet(st[0]);
            let (hv, h1) = (hj.value(), hj.d(1));
            if !(hv > 0.0) {
                return Ok([0.0, 0.0]);
            }
            let jet = u.jet(s * hv, st[0])?;
            let c = rhs_evaluator(&jet, m, st[1])?;
            let [p, q] = c.direction;
            let ds_dt = (p - s * h1 * q) / hv;
            if !(ds_dt > 0.0) {
                return Err(Error::CharacteristicEscaped { y: st[0] });
            }
            Ok([q / ds_dt, c.rhs / c.coefficient / ds_dt])
        };
        let mut st = [y0, seed(y0)];
        out[0] = st;
        for k in 1..n_lev {
            let (a, b) = (grid.s[i_half + k - 1], grid.s[i_half + k]);
            st = dopri5(rhs, a, st, b, ctl, |_| f64::INFINITY, |_| 1.0, |_, _, _| Ok(()))?;
            if (st[0] - y0).abs() > period {
                return Err(Error::CharacteristicEscaped { y: st[0] });
            }
            out[k] = st;
        }
        Ok(out)
    });
    let chars = chars.into_iter().collect::<Result<Vec<_>>>()?;
    let n_s = grid.s.len();
    let n_y = grid.y.len();
    let mut values = vec![0.0; n_s * n_y];
    let mut trace = vec![0.0; n_y];
    let wrap = |y: f64| (y + 0.5 * period).rem_euclid(period) - 0.5 * period;
    for k in 0..n_lev {
        // characteristics at this level, sorted by wrapped y
        let mut pts: Vec<(f64, f64)> = chars.iter().map(|c| (wrap(c[k][0]), c[k][1])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pts.len();
        for j in 0..n_y {
            let y = wrap(grid.y[j]);
            let hi = pts.partition_point(|p| p.0 <= y);
            let (a, b) = if hi == 0 {
                let (ya, fa) = pts[n - 1];
                ((ya - period, fa), pts[0])
            } else if hi == n {
                let (yb, fb) = pts[0];
                (pts[n - 1], (yb + period, fb))
            } else {
                (pts[hi - 1], pts[hi])
            };
            let t = if b.0 > a.0 { (y - a.0) / (b.0 - a.0) } else { 0.0 };
            let f = if grid.in_k[j] { 0.0 } else { (1.0 - t) * a.1 + t * b.1 };
            values[j * n_s + i_half + k] = f;
            if k + 1 == n_lev {
                trace[j] = f;
            }
        }
    }
    Ok(TransitionField { values, trace, i_half, i_one })
}

/// Characteristics seeded with f̄ = 0 on r = h/2.
pub fn integrate_characteristics(u: &GluedSolution, grid: &GlueGrid, opts: CharacteristicOptions) -> Result<TransitionField> {
    integrate_characteristics_from(u, grid, opts, |_| 0.0)
}

/// `f = 1 − f̄` on a glue grid: 1 on r ≤ h/2 and on K, transported on the strip, closed form beyond.
#[derive(Clone, Debug)]
pub struct MetricFactor {
    pub m: u32,
    pub grid: GlueGrid,
    /// f̄ at every node, column-major.
    pub fbar: Vec<f64>,
    /// f̄(h(y), y) per column.
    pub trace: Vec<f64>,
    pub i_half: usize,
    pub i_one: usize,
}

impl MetricFactor {
    pub fn fbar_at(&self, i: usize, j: usize) -> f64 {
        self.fbar[j * self.grid.s.len() + i]
    }

    pub fn f_at(&self, i: usize, j: usize) -> f64 {
        1.0 - self.fbar_at(i, j)
    }
}

/// Tolerance on the value jump of f̄ across r = h.
pub const SEAM_TOL: f64 = 1e-12;

pub fn assemble_metric(u: &GluedSolution, grid: &GlueGrid, opts: CharacteristicOptions) -> Result<MetricFactor> {
    let tr = integrate_characteristics(u, grid, opts)?;
    let n_s = grid.s.len();
    let mut fbar = tr.values;
    for j in 0..grid.y.len() {
        let fb = tr.trace[j];
        if !(fb.abs() < 0.5) {
            return Err(Error::SeamMismatch { value: fb, tol: 0.5, r: grid.r(tr.i_one, j), y: grid.y[j] });
        }
        if grid.in_k[j] {
            continue;
        }
        let hy = grid.scale[j][0];
        for i in tr.i_one..n_s {
            fbar[j * n_s + i] = tail_value(fb, hy, grid.r(i, j), u.m)?;
        }
        let jump = (fbar[j * n_s + tr.i_one] - fb).abs();
        if jump > SEAM_TOL {
            return Err(Error::SeamMismatch { value: jump, tol: SEAM_TOL, r: hy, y: grid.y[j] });
        }
    }
    Ok(MetricFactor { m: u.m, grid: grid.clone(), fbar, trace: tr.trace, i_half: tr.i_half, i_one: tr.i_one })
}

/// Node statistics of the curved-metric EL residual, scaled by u/m.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinimalityStats {
    pub max_residual: f64,
    pub max_core: f64,
    pub max_transition: f64,
    pub max_tail: f64,
    /// Fractions of nodes with scaled residual below 1e-12, 1e-10, 1e-8, 1e-6.
    pub distribution: [f64; 4],
    pub max_f_minus_one: f64,
    pub min_fbar: f64,
    /// sup |f̄| / (β h^ℓ), ℓ = 1, 2, over y ∉ K.
    pub decay: [f64; 2],
    pub max_slope_jump: f64,
}

fn node_residuals(u: &GluedSolution, f: &MetricFactor, s: &GlueSamples) -> Vec<(usize, usize, f64)> {
    let grid = &f.grid;
    let n_s = grid.s.len();
    let m = u.m;
    let cols = exec::map_range(grid.y.len(), |j| {
        let mut out = Vec::new();
        for i in 0..n_s {
            let jet = s.at(i, j);
            if !(jet.r > 0.0) || !(jet.v() > 0.0) {
                continue;
            }
            let fv = f.f_at(i, j);
            let df = if grid.in_k[j] || i <= f.i_half {
                [0.0, 0.0]
            } else if i >= f.i_one {
                // u = r here, so only f_r enters
                let fb = f.trace[j];
                let (_, slope) = tail_value_with_slope(fb, grid.scale[j][0], jet.r, m).unwrap_or((f64::NAN, f64::NAN));
                [-slope, 0.0]
            } else {
                let [a, b] = glue_gradient(grid, |a, b| f.fbar_at(a, b), i, j);
                [-a, -b]
            };
            out.push((i, j, el_residual(jet, m, fv, df).abs() * jet.v() / m as f64));
        }
        out
    });
    cols.into_iter().flatten().collect()
}

/// Minimality residual, seams and decay of `f` against the glued surface.
pub fn verify_minimality(u: &GluedSolution, f: &MetricFactor) -> Result<(Vec<CertificateReport>, MinimalityStats)> {
    let grid = &f.grid;
    let samples = sample_glued(u, grid)?;
    let res = node_residuals(u, f, &samples);
    let mut st = MinimalityStats { min_fbar: f64::INFINITY, ..Default::default() };
    let (mut w_all, mut w_tail) = (Worst::default(), Worst::default());
    let mut counts = [0usize; 4];
    for &(i, j, r) in &res {
        let loc = || Location::ry(grid.r(i, j), grid.y[j]);
        w_all.update(-r, loc);
        st.max_residual = st.max_residual.max(r);
        if grid.in_k[j] || i <= f.i_half {
            st.max_core = st.max_core.max(r);
        } else if i >= f.i_one {
            st.max_tail = st.max_tail.max(r);
            w_tail.update(1e-8 - r, loc);
        } else {
            st.max_transition = st.max_transition.max(r);
        }
        for (k, lim) in [1e-12, 1e-10, 1e-8, 1e-6].iter().enumerate() {
            if r <= *lim {
                counts[k] += 1;
            }
        }
    }
    for k in 0..4 {
        st.distribution[k] = counts[k] as f64 / res.len().max(1) as f64;
    }

    let n_s = grid.s.len();
    let (mut core, mut kray, mut half, mut pos) = (Worst::default(), Worst::default(), Worst::default(), Worst::default());
    let mut nondeg = Worst::default();
    for j in 0..grid.y.len() {
        let hy = u.h.h(grid.y[j]);
        for i in 0..n_s {
            let fb = f.fbar_at(i, j);
            let loc = || Location::ry(grid.r(i, j), grid.y[j]);
            st.max_f_minus_one = st.max_f_minus_one.max(fb.abs());
            st.min_fbar = st.min_fbar.min(fb);
            half.update(0.5 - fb.abs(), loc);
            pos.update(fb, loc);
            if grid.in_k[j] {
                kray.update(-fb.abs(), loc);
                continue;
            }
            if i <= f.i_half {
                core.update(-fb.abs(), loc);
            }
            if grid.s[i] >= 0.25 {
                let jet = samples.at(i, j);
                nondeg.update(u.beta - jet.wr.hypot(jet.wy), loc);
                for ell in 0..2 {
                    st.decay[ell] = st.decay[ell].max(fb.abs() / (u.beta * hy.powi(ell as i32 + 1)));
                }
            }
        }
        // one-sided slope of f̄ from the strip against the tail slope at r = h
        if !grid.in_k[j] {
            let ds = grid.ds();
            let io = f.i_one;
            let inner = (3.0 * f.fbar_at(io, j) - 4.0 * f.fbar_at(io - 1, j) + f.fbar_at(io - 2, j)) / (2.0 * ds * grid.scale[j][0]);
            let (_, outer) = tail_value_with_slope(f.trace[j], grid.scale[j][0], grid.scale[j][0], u.m)?;
            st.max_slope_jump = st.max_slope_jump.max((inner - outer).abs() * grid.scale[j][0]);
        }
    }

    let mut nd = CertificateReport::new(Cert::MetricNonDegeneracy);
    nd.push(nondeg.check("|D(u - r)| <= beta on r >= h/4"));

    let mut seams = CertificateReport::new(Cert::MetricSeams);
    seams.push(core.check("f = 1 exactly on r <= h/2"));
    seams.push(kray.check("f = 1 exactly for y in K"));
    seams.push(half.check("|fbar| < 1/2"));
    seams.push(Check::margin("fbar >= 0", pos.margin, pos.location).non_gating());
    seams.push(Check::info("slope jump of fbar across r = h (times h)", st.max_slope_jump, None));

    let mut mini = CertificateReport::new(Cert::MetricMinimality);
    mini.push(Check::info("max scaled EL residual", st.max_residual, w_all.location));
    mini.push(Check::info("max scaled EL residual on r <= h/2 and K", st.max_core, None));
    mini.push(Check::info("max scaled EL residual on h/2 < r < h", st.max_transition, None));
    mini.push(w_tail.check("scaled EL residual <= 1e-8 on r >= h"));
    mini.push(Check::info("fraction of nodes with residual <= 1e-10", st.distribution[1], None));

    let mut decay = CertificateReport::new(Cert::MetricDecay);
    for ell in 0..2 {
        let c = st.decay[ell];
        decay.push(Check::margin(format!("C_{} finite", ell + 1), if c.is_finite() { 0.0 } else { -1.0 }, None).with_note(format!("sup |fbar| / (beta h^{}) = {c:.6e}", ell + 1)));
    }
    decay.push(Check::margin("max |f - 1| < 1/2", 0.5 - st.max_f_minus_one, None).with_note(format!("max |f - 1| = {:.6e}", st.max_f_minus_one)));
    Ok((vec![nd, seams, mini, decay], st))
}

/// Gating comparison of two resolutions: the max residual must not grow, and must strictly
/// drop unless both are already zero.
pub fn refinement_check(coarse: &MinimalityStats, fine: &MinimalityStats) -> Check {
    let (a, b) = (coarse.max_transition.max(coarse.max_core), fine.max_transition.max(fine.max_core));
    let margin = if a == 0.0 && b == 0.0 { 0.0 } else { a - b };
    let c = if a == 0.0 && b == 0.0 { Check::margin("EL residual decreasing under refinement", margin, None) } else { Check::strict("EL residual decreasing under refinement", margin, None) };
    c.with_note(format!("coarse {a:.6e}, fine {b:.6e}"))
}
