//! Supersolution barriers `v_s = ψ_s(y)·φ̃(r/ψ_s(y))` and their certification.

use serde::{Deserialize, Serialize};

use crate::certificate::{Cert, CertificateReport, Check, Location, Worst};
use crate::error::{Error, Result};
use crate::exec;
use crate::gap::{GapProfile, BETA_MAX};
use crate::jet::Jet;
use crate::profile::ProfileSolution;
use crate::sme::SmeJet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub m: u32,
    pub beta: f64,
    pub eta: f64,
    pub eps: f64,
    pub b0: f64,
    pub sigma: f64,
    pub alpha: f64,
}

/// `η/(36 b₀ + 16)`: the sufficient bound on β for the supersolution property.
pub fn beta_threshold(eta: f64, b0: f64) -> f64 {
    eta / (36.0 * b0 + 16.0)
}

pub fn auto_beta(eta: f64, b0: f64) -> f64 {
    BETA_MAX.min(0.9 * beta_threshold(eta, b0))
}

impl BarrierParams {
    /// Range checks. The β threshold is certified, not enforced here, so an
    /// explicit β above it surfaces as a failed certificate.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= BETA_MAX) {
            return Err(Error::invalid(format!("beta = {} outside (0, 2^-7]", self.beta)));
        }
        if !(self.eps > 0.0 && self.eps <= 0.25) {
            return Err(Error::invalid(format!("eps = {} outside (0, 1/4]", self.eps)));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid("barriers need eta > 0"));
        }
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::invalid(format!("b0 = {} must be positive", self.b0)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma = {} must be positive", self.sigma)));
        }
        Ok(())
    }
}

/// `sup (φ̃ − tφ̃') / ((1+t²) φ̃'')` over the profile nodes, with its argmax.
pub fn compute_b0(sol: &ProfileSolution) -> Result<(f64, f64)> {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..sol.nodes.len() {
        let t = sol.nodes[i];
        let dd = sol.ddphi[i];
        if !(dd > 0.0) {
            return Err(Error::invalid(format!("phi'' = {dd} <= 0 at t = {t}")));
        }
        let b = sol.excess[i] - t * sol.slope_excess[i];
        let q = b / ((1.0 + t * t) * dd);
        if q > best.0 {
            best = (q, t);
        }
    }
    Ok(best)
}

/// Same supremum over `n` equispaced points of `[0, r_max]` via the interpolant.
pub fn compute_b0_sampled(sol: &ProfileSolution, n: usize) -> Result<f64> {
    let rm = sol.r_max();
    let mut best = f64::NEG_INFINITY;
    for k in 0..n {
        let t = rm * k as f64 / (n - 1) as f64;
        let j = sol.eval(t)?;
        if !(j.ddphi > 0.0) {
            return Err(Error::invalid(format!("phi'' = {} <= 0 at t = {t}", j.ddphi)));
        }
        best = best.max(j.intercept(t) / ((1.0 + t * t) * j.ddphi));
    }
    Ok(best)
}

pub struct BarrierEvaluator<'a> {
    pub params: BarrierParams,
    pub h: &'a dyn GapProfile,
    pub profile: &'a ProfileSolution,
}

/// Dense sweep result: the certificate plus sampled `(r, y, M(v_s))` for dumping.
pub struct SupersolutionSweep {
    pub report: CertificateReport,
    pub ingredients: CertificateReport,
    pub samples: Vec<[f64; 3]>,
}

impl<'a> BarrierEvaluator<'a> {
    pub fn new(params: BarrierParams, h: &'a dyn GapProfile, profile: &'a ProfileSolution) -> Self {
        BarrierEvaluator { params, h, profile }
    }

    /// ψ_s as a jet in y. `s = 0` gives the limit barrier `β e^{−h^{−1/2}}`.
    pub fn psi_jet(&self, s: f64, y: f64) -> Jet {
        let x = self.h.jet(y).offset(s.sqrt());
        let base = if s < 1.0 { s } else { s.sqrt() };
        let e = if x.value() > 0.0 { (-x.powf(-0.5)).exp() } else { Jet::ZERO };
        e.scale(self.params.beta).offset(base)
    }

    pub fn psi(&self, s: f64, y: f64) -> f64 {
        self.psi_jet(s, y).value()
    }

    /// `ε + β e^{−(h+√ε)^{−1/2}}`, evaluated in the same order as ψ_ε(y).
    pub fn gap_bound(&self, y: f64) -> f64 {
        let x = self.h.h(y) + self.params.eps.sqrt();
        self.params.beta * (-x.powf(-0.5)).exp() + self.params.eps
    }

    /// Boundary radius `h(y) + √ε` of Ω_ε.
    pub fn boundary(&self, y: f64) -> f64 {
        self.h.h(y) + self.params.eps.sqrt()
    }

    pub fn v_jet(&self, s: f64, r: f64, y: f64) -> Result<SmeJet> {
        let ps = self.psi_jet(s, y);
        let (psi, d1, d2) = (ps.value(), ps.d(1), ps.d(2));
        if psi == 0.0 {
            return Ok(SmeJet::cone(r));
        }
        let t = r / psi;
        let j = self.profile.eval_extended(t)?;
        let b = j.intercept(t);
        let q = r * d1 / psi;
        Ok(SmeJet {
            r,
            w: psi * j.excess,
            wr: j.slope_excess,
            wy: d1 * b,
            wrr: j.ddphi / psi,
            wry: -q * j.ddphi / psi,
            wyy: q * q * j.ddphi / psi + d2 * b,
        })
    }

    fn grid(&self, n_r: usize, n_y: usize) -> (Vec<f64>, impl Fn(usize, f64) -> f64 + '_) {
        let ys = crate::gap::period_samples(self.h.half_period(), n_y);
        let radius = move |i: usize, y: f64| self.boundary(y) * i as f64 / (n_r - 1) as f64;
        (ys, radius)
    }

    /// `M(v_s) < 0` and `M(v_s) ≤ −(η/4)ψ^{−1}φ̃''(r/ψ)` on an `n_r × n_y` grid over Ω_ε,
    /// with the ψ ingredient bounds. Margins are relative to `(η/4)ψ^{−1}φ̃''`.
    pub fn certify_supersolution(&self, s: f64, n_r: usize, n_y: usize, dump_stride: usize) -> Result<SupersolutionSweep> {
        let p = self.params;
        let m = p.m;
        let (ys, radius) = self.grid(n_r, n_y);
        let stride = dump_stride.max(1);
        let cols = exec::map_range(n_y, |jy| -> Result<_> {
            let y = ys[jy];
            let ps = self.psi_jet(s, y);
            let (psi, d1, d2) = (ps.value(), ps.d(1), ps.d(2));
            let (mut neg, mut quant) = (Worst::default(), Worst::default());
            let mut dump = Vec::new();
            for i in 0..n_r {
                let r = radius(i, y);
                let mv = self.v_jet(s, r, y)?.residual(m)?;
                let scale = 0.25 * p.eta * self.profile.eval_extended(r / psi)?.ddphi / psi;
                neg.update(-mv / scale, || Location::ry(r, y));
                quant.update((-scale - mv) / scale, || Location::ry(r, y));
                if i % stride == 0 && jy % stride == 0 {
                    dump.push([r, y, mv]);
                }
            }
            let rb = radius(n_r - 1, y);
            let ing = [
                (4.0 * p.beta - psi * d2.abs()) / p.beta,
                (8.0 * p.beta - rb * rb * d2.abs() / psi) / p.beta,
                (p.beta - rb * d1.abs() / psi) / p.beta,
            ];
            Ok((neg, quant, ing, y, dump))
        });
        let mut report = CertificateReport::new(Cert::BarrierSupersolution);
        let mut ingredients = CertificateReport::new(Cert::BarrierIngredients);
        let thr = beta_threshold(p.eta, p.b0);
        report.push(Check::strict("beta < eta/(36 b0 + 16)", (thr - p.beta) / thr, None).with_note(format!("threshold {thr:e}, beta {:e}", p.beta)));
        let (mut neg, mut quant) = (Worst::default(), Worst::default());
        let mut ing = [Worst::default(), Worst::default(), Worst::default()];
        let mut samples = Vec::new();
        for col in cols {
            let (n, q, g, y, dump) = col?;
            neg = neg.merge(n);
            quant = quant.merge(q);
            for k in 0..3 {
                ing[k].update(g[k], || Location::y(y));
            }
            samples.extend(dump);
        }
        report.push(neg.strict("M(v_s) < 0"));
        report.push(quant.check("M(v_s) <= -(eta/4) phi~''(r/psi)/psi"));
        report.push(Check::info("s", s, None));
        let [a, b, c] = ing;
        ingredients.push(a.check("psi |psi''| <= 4 beta"));
        ingredients.push(b.check("r^2 |psi''| / psi <= 8 beta"));
        ingredients.push(c.check("r |psi'| / psi <= beta"));
        Ok(SupersolutionSweep { report, ingredients, samples })
    }

    /// `v_ε − r ≤ ε + β e^{−(h+√ε)^{−1/2}}` on the grid, and the sampled decay of `v_ε − r` in r.
    pub fn barrier_gap_check(&self, n_r: usize, n_y: usize) -> Result<CertificateReport> {
        let eps = self.params.eps;
        let (ys, radius) = self.grid(n_r, n_y);
        let cols = exec::map_range(n_y, |jy| -> Result<_> {
            let y = ys[jy];
            let bound = self.gap_bound(y);
            let (mut gap, mut mono) = (Worst::default(), Worst::default());
            let mut prev = f64::INFINITY;
            for i in 0..n_r {
                let r = radius(i, y);
                let w = self.v_jet(eps, r, y)?.w;
                gap.update((bound - w) / bound, || Location::ry(r, y));
                mono.update((prev - w) / bound, || Location::ry(r, y));
                prev = w;
            }
            Ok((gap, mono))
        });
        let (mut gap, mut mono) = (Worst::default(), Worst::default());
        for c in cols {
            let (g, m) = c?;
            gap = gap.merge(g);
            mono = mono.merge(m);
        }
        let mut rep = CertificateReport::new(Cert::BarrierGap);
        rep.push(gap.check("v_eps - r <= eps + beta exp(-(h + sqrt eps)^-1/2)"));
        rep.push(mono.check("v_eps - r non-increasing in r"));
        Ok(rep)
    }

    /// `v_s ≥ v_ε` at every grid node for each `s` in `s_values`.
    pub fn monotonicity_check(&self, s_values: &[f64], n_r: usize, n_y: usize) -> Result<CertificateReport> {
        let eps = self.params.eps;
        let (ys, radius) = self.grid(n_r, n_y);
        let mut rep = CertificateReport::new(Cert::BarrierMonotonicity);
        for &s in s_values {
            let cols = exec::map_range(n_y, |jy| -> Result<Worst> {
                let y = ys[jy];
                let mut w = Worst::default();
                for i in 0..n_r {
                    let r = radius(i, y);
                    let a = self.v_jet(s, r, y)?.w;
                    let b = self.v_jet(eps, r, y)?.w;
                    w.update((a - b) / b, || Location::ry(r, y));
                }
                Ok(w)
            });
            let mut w = Worst::default();
            for c in cols {
                w = w.merge(c?);
            }
            rep.push(w.check(&format!("v_s >= v_eps (s = {s})")));
        }
        Ok(rep)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// The four elementary constants behind the residual and ratio bounds.
pub fn proof_constants_check() -> CertificateReport {
    let mut rep = CertificateReport::new(Cert::ProofConstants);
    let e = std::f64::consts::E;
    for (k, cap) in [(6, 125.0), (5, 22.0), (3, 2.0)] {
        let (x, fmax) = golden_max(|x| x.powi(k) * (-x).exp(), 0.0, 4.0 * k as f64);
        let closed = (k as f64 / e).powi(k);
        rep.push(
            Check::margin(format!("max x^{k} e^-x < {cap}"), cap - fmax, None)
                .with_note(format!("numeric max {fmax} at x = {x}, closed form {closed}")),
        );
        rep.push(Check::margin(format!("numeric max x^{k} e^-x matches (k/e)^k"), 1e-9 * closed - (fmax - closed).abs(), None));
    }
    let (x, neg_min) = golden_max(|x| -(x * x * (1.0 / x).exp()), 0.05, 5.0);
    let fmin = -neg_min;
    rep.push(
        Check::strict("min x^2 e^(1/x) > 1", fmin - 1.0, None)
            .with_note(format!("numeric min {fmin} at x = {x}, closed form {}", e * e / 4.0)),
    );
    rep.push(Check::margin("numeric min x^2 e^(1/x) matches e^2/4", 1e-9 - (fmin - e * e / 4.0).abs(), None));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{build_h, SingularSetSpec};
    use crate::profile::{solve_profile, ProfileParams};
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn tilde() -> &'static ProfileSolution {
        static P: OnceLock<ProfileSolution> = OnceLock::new();
        P.get_or_init(|| solve_profile(ProfileParams::new(3, 0.02)).unwrap())
    }

    fn gap() -> crate::gap::GapFunction {
        build_h(SingularSetSpec { half_period: 4.0, intervals: vec![[0.0, 0.0], [1.0, 2.0]] }, BETA_MAX).unwrap()
    }

    fn params(beta: f64) -> BarrierParams {
        let b0 = compute_b0(tilde()).unwrap().0;
        BarrierParams { m: 3, beta, eta: 0.02, eps: 1e-4, b0, sigma: 0.1, alpha: 1.1 }
    }

    #[test]
    fn b0_values() {
        let (b0, at) = compute_b0(tilde()).unwrap();
        // value at t = 0 is phi(0)/phi''(0) = (m+1+eta)/m
        assert!(b0 >= 4.02 / 3.0 - 1e-12);
        assert!(b0.is_finite());
        let _ = at;
        let a = compute_b0_sampled(tilde(), 10_000).unwrap();
        let b = compute_b0_sampled(tilde(), 100_000).unwrap();
        assert!((a / b - 1.0).abs() < 0.01);
        let beta = auto_beta(0.02, b0);
        assert!(beta < beta_threshold(0.02, b0));
        assert_relative_eq!(beta, 2.80e-4, max_relative = 0.02);
    }

    #[test]
    fn psi_examples() {
        let g = gap();
        let ev = BarrierEvaluator::new(params(BETA_MAX), &g, tilde());
        // y = 0 lies in K
        assert_relative_eq!(ev.psi(0.25, 0.0), 0.25 + BETA_MAX * (-(2f64.sqrt())).exp(), max_relative = 1e-15);
        assert_relative_eq!(ev.psi(0.25, 0.0), 0.251900, epsilon = 1e-6);
        let left = ev.psi(1.0 - 1e-15, 3.0);
        let right = ev.psi(1.0, 3.0);
        assert!((left - right).abs() < 1e-14);
        let zero = BarrierEvaluator::new(BarrierParams { beta: 0.0, ..params(BETA_MAX) }, &g, tilde());
        assert_eq!(zero.psi(0.3, 2.5), 0.3);
    }

    #[test]
    fn v_derivatives_match_finite_differences() {
        let g = gap();
        let ev = BarrierEvaluator::new(params(BETA_MAX), &g, tilde());
        let s = 0.05;
        for k in 0..200 {
            let y = -4.0 + 8.0 * ((k as f64 + 0.5) * 0.618_033_988_749_894_9).fract();
            let r = (ev.boundary(y) * ((k as f64) * 0.414_213_562_373_095_1).fract()).max(1e-3);
            let j = ev.v_jet(s, r, y).unwrap();
            let d = 1e-5;
            let v = |r: f64, y: f64| ev.v_jet(s, r, y).unwrap().w;
            let vr = (v(r + d, y) - v(r - d, y)) / (2.0 * d);
            let vy = (v(r, y + d) - v(r, y - d)) / (2.0 * d);
            let vyy = (v(r, y + d) - 2.0 * v(r, y) + v(r, y - d)) / (d * d);
            assert!((vr - j.wr).abs() < 1e-6, "{vr} {}", j.wr);
            assert!((vy - j.wy).abs() < 1e-8 + 1e-5 * j.wy.abs());
            assert!((vyy - j.wyy).abs() < 1e-4 + 1e-3 * j.wyy.abs());
        }
    }

    #[test]
    fn pure_rescaling_when_beta_zero() {
        let g = gap();
        let ev = BarrierEvaluator::new(BarrierParams { beta: 0.0, ..params(BETA_MAX) }, &g, tilde());
        let s = 0.01;
        for r in [0.0, 0.003, 0.05] {
            let j = ev.v_jet(s, r, 2.5).unwrap();
            let mv = j.residual(3).unwrap();
            let t = tilde().eval(r / s).unwrap();
            let expect = -0.02 / s * t.ddphi / (1.0 + t.dphi * t.dphi);
            assert!((mv - expect).abs() < 1e-6 * expect.abs() + 1e-7, "{mv} {expect}");
        }
    }

    #[test]
    fn supersolution_small_grid() {
        let g = gap();
        let b0 = compute_b0(tilde()).unwrap().0;
        let ev = BarrierEvaluator::new(params(auto_beta(0.02, b0)), &g, tilde());
        let sweep = ev.certify_supersolution(1e-4, 64, 64, 8).unwrap();
        assert!(sweep.report.pass(), "{:#?}", sweep.report);
        assert!(sweep.ingredients.pass(), "{:#?}", sweep.ingredients);
        assert!(ev.barrier_gap_check(64, 64).unwrap().pass());
        assert!(ev.monotonicity_check(&[1e-4, 2e-4, 1.0, 2.0], 32, 32).unwrap().pass());
    }

    #[test]
    fn beta_above_threshold_fails_named_check() {
        let g = gap();
        let ev = BarrierEvaluator::new(params(BETA_MAX), &g, tilde());
        let sweep = ev.certify_supersolution(1e-4, 8, 8, 1).unwrap();
        assert!(!sweep.report.check("beta < eta/(36 b0 + 16)").unwrap().pass);
    }

    #[test]
    fn gap_equality_on_axis() {
        let g = gap();
        let ev = BarrierEvaluator::new(params(2.8e-4), &g, tilde());
        for y in [-3.0, 0.0, 0.7, 2.9] {
            assert_eq!(ev.v_jet(1e-4, 0.0, y).unwrap().w, ev.gap_bound(y));
        }
    }

    #[test]
    fn constants() {
        let rep = proof_constants_check();
        assert!(rep.pass(), "{rep:#?}");
        assert_relative_eq!((3.0 / std::f64::consts::E).powi(3), 1.3443, epsilon = 1e-4);
    }
}
