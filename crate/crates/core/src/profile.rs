//! Radial profile of the Simons-cone foliation.
//!
//! Solves `(1+η)φ''/(1+φ'²) + (m/r)φ' − m/φ = 0`, `φ(0) = 1`, `φ'(0) = 0`.
//! The state is carried as the excess `w = φ − r` and slope excess
//! `p = φ' − 1`, both of which decay like powers of r, so the far field keeps
//! full relative precision instead of drowning in the cancellation `φ − r`.
//!
//! Dense evaluation is quintic Hermite on (w, w', w''), sixth order in the
//! node spacing; φ'' at the nodes is taken from the ODE itself.

use serde::{Deserialize, Serialize};

use crate::certificate::{Cert, CertificateReport, Check, Location, Worst};
use crate::error::{Error, Result};
use crate::ode::{dopri5, StepControl};

/// Seed radius for the series start.
pub const SEED_RADIUS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub m: u32,
    pub eta: f64,
    pub r_max: f64,
    pub tol: f64,
}

impl ProfileParams {
    pub fn new(m: u32, eta: f64) -> Self {
        ProfileParams { m, eta, r_max: 1e3, tol: 1e-10 }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn m_tilde(&self) -> f64 {
        self.m as f64 / (1.0 + self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::invalid(format!("m = {} < 3", self.m)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta = {} must be >= 0", self.eta)));
        }
        if self.eta > 0.0 {
            let mt = self.m_tilde();
            if mt < (3.0 + 2.0 * 2f64.sqrt()) / 2.0 {
                return Err(Error::EtaTooLarge { m_tilde: mt });
            }
        }
        if !(self.r_max > 10.0 * SEED_RADIUS) || !self.r_max.is_finite() {
            return Err(Error::invalid(format!("r_max = {} too small", self.r_max)));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::invalid(format!("tol = {} outside (0, 1e-2)", self.tol)));
        }
        Ok(())
    }
}

/// Decay exponent `(m̃−½) − √((m̃−½)² − 2m̃)`, `m̃ = m/(1+η)`.
pub fn gamma_exponent(m: u32, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!("eta = {eta} must be >= 0")));
    }
    let mt = m as f64 / (1.0 + eta);
    let a = mt - 0.5;
    let disc = a * a - 2.0 * mt;
    if disc < 0.0 {
        return Err(Error::EtaTooLarge { m_tilde: mt });
    }
    Ok(a - disc.sqrt())
}

/// Lower bound `(γ̃+1)/(γ+1)` on the rescaling power α.
pub fn alpha_threshold(m: u32, eta: f64) -> Result<f64> {
    Ok((gamma_exponent(m, eta)? + 1.0) / (gamma_exponent(m, 0.0)? + 1.0))
}

/// `c` in `φ = 1 + c r² + O(r⁴)`.
pub fn series_coefficient(m: u32, eta: f64) -> f64 {
    let m = m as f64;
    m / (2.0 * (m + 1.0 + eta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub kappa: f64,
    pub gamma: f64,
    pub window: (f64, f64),
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileJet {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
    /// φ − r
    pub excess: f64,
    /// φ' − 1
    pub slope_excess: f64,
}

impl ProfileJet {
    /// φ − rφ', computed without cancellation.
    pub fn intercept(&self, r: f64) -> f64 {
        self.excess - r * self.slope_excess
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub params: ProfileParams,
    /// φ(0); 1 for a solved profile, τ after rescaling.
    pub scale: f64,
    pub nodes: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub ddphi: Vec<f64>,
    pub excess: Vec<f64>,
    pub slope_excess: Vec<f64>,
    pub fit: Option<AsymptoticFit>,
}

/// Right-hand side φ'' in excess variables.
fn phi_dd(m: f64, eta: f64, r: f64, w: f64, p: f64) -> f64 {
    let dphi = 1.0 + p;
    -(1.0 + dphi * dphi) / (1.0 + eta) * m * (w + p * (r + w)) / (r * (r + w))
}

pub fn solve_profile(params: ProfileParams) -> Result<ProfileSolution> {
    params.validate()?;
    let m = params.m as f64;
    let eta = params.eta;
    let c = series_coefficient(params.m, eta);
    let r0 = SEED_RADIUS;

    let mut nodes = vec![0.0];
    let mut excess = vec![1.0];
    let mut slope = vec![-1.0];
    let mut dd = vec![2.0 * c];

    let w0 = 1.0 + c * r0 * r0 - r0;
    let p0 = 2.0 * c * r0 - 1.0;
    nodes.push(r0);
    excess.push(w0);
    slope.push(p0);
    dd.push(phi_dd(m, eta, r0, w0, p0));

    let ctl = StepControl { rtol: params.tol, atol: params.tol * 1e-6, h_init: 1e-3, h_min: 1e-14 };
    dopri5(
        |r, y: &[f64; 2]| Ok([y[1], phi_dd(m, eta, r, y[0], y[1])]),
        r0,
        [w0, p0],
        params.r_max,
        ctl,
        |r| 0.02 * r.max(1.0),
        |_| 1.0,
        |r, y, dy| {
            if !(y[0] > 0.0) {
                return Err(Error::Integration { r, reason: format!("phi - r = {} lost positivity", y[0]) });
            }
            if !(y[1] < 0.0) {
                return Err(Error::Integration { r, reason: format!("phi' = 1 + {} reached 1", y[1]) });
            }
            nodes.push(r);
            excess.push(y[0]);
            slope.push(y[1]);
            dd.push(dy[1]);
            Ok(())
        },
    )?;

    let phi = nodes.iter().zip(&excess).map(|(r, w)| r + w).collect();
    let dphi = slope.iter().map(|p| 1.0 + p).collect();
    let mut sol = ProfileSolution {
        params,
        scale: 1.0,
        nodes,
        phi,
        dphi,
        ddphi: dd,
        excess,
        slope_excess: slope,
        fit: None,
    };
    let window = (params.r_max / 20.0, params.r_max / 2.0);
    sol.fit = fit_asymptotics(&sol, window).ok();
    Ok(sol)
}

/// Least-squares fit of `log(φ − r) = log κ − γ log r` over the nodes in `window`.
pub fn fit_asymptotics(sol: &ProfileSolution, window: (f64, f64)) -> Result<AsymptoticFit> {
    let (a, b) = window;
    if !(a > 0.0 && b > a && b <= sol.r_max() * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("fit window [{a}, {b}] not inside (0, r_max]")));
    }
    let pts: Vec<(f64, f64)> = sol
        .nodes
        .iter()
        .zip(&sol.excess)
        .filter(|(r, _)| **r >= a && **r <= b)
        .map(|(r, w)| (*r, *w))
        .collect();
    if pts.iter().any(|(_, w)| !(*w > 0.0)) {
        return Err(Error::invalid("phi - r not positive inside fit window"));
    }
    let (slope, intercept) = log_log_fit(&pts)?;
    Ok(AsymptoticFit { kappa: intercept.exp(), gamma: -slope, window, nodes: pts.len() })
}

/// Slope and intercept of the least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 10 {
        return Err(Error::WindowTooShort { nodes: pts.len() });
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in pts {
        sx += x.ln();
        sy += y.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in pts {
        let dx = x.ln() - mx;
        sxx += dx * dx;
        sxy += dx * (y.ln() - my);
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

pub fn rescale_profile(sol: &ProfileSolution, tau: f64) -> Result<ProfileSolution> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    let mut params = sol.params;
    params.r_max *= tau;
    let fit = sol.fit.map(|f| AsymptoticFit {
        kappa: f.kappa * tau.powf(1.0 + f.gamma),
        gamma: f.gamma,
        window: (f.window.0 * tau, f.window.1 * tau),
        nodes: f.nodes,
    });
    Ok(ProfileSolution {
        params,
        scale: sol.scale * tau,
        nodes: sol.nodes.iter().map(|r| r * tau).collect(),
        phi: sol.phi.iter().map(|v| v * tau).collect(),
        dphi: sol.dphi.clone(),
        ddphi: sol.ddphi.iter().map(|v| v / tau).collect(),
        excess: sol.excess.iter().map(|v| v * tau).collect(),
        slope_excess: sol.slope_excess.clone(),
        fit,
    })
}

// Quintic Hermite basis on [0,1]: value, first and second derivative of
// each of the six cardinal polynomials (monomial coefficients, s^0..s^5).
const HERMITE: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

fn poly_derivs(c: &[f64; 6], s: f64) -> [f64; 3] {
    let mut v = [0.0; 3];
    for k in (0..6).rev() {
        v[0] = v[0] * s + c[k];
    }
    for k in (1..6).rev() {
        v[1] = v[1] * s + k as f64 * c[k];
    }
    for k in (2..6).rev() {
        v[2] = v[2] * s + (k * (k - 1)) as f64 * c[k];
    }
    v
}

impl ProfileSolution {
    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn m(&self) -> u32 {
        self.params.m
    }

    pub fn eta(&self) -> f64 {
        self.params.eta
    }

    fn node_jet(&self, i: usize) -> ProfileJet {
        ProfileJet {
            phi: self.phi[i],
            dphi: self.dphi[i],
            ddphi: self.ddphi[i],
            excess: self.excess[i],
            slope_excess: self.slope_excess[i],
        }
    }

    fn hermite(&self, i: usize, r: f64) -> ProfileJet {
        let (r0, r1) = (self.nodes[i], self.nodes[i + 1]);
        let h = r1 - r0;
        let s = (r - r0) / h;
        let data = [
            self.excess[i],
            self.slope_excess[i] * h,
            self.ddphi[i] * h * h,
            self.excess[i + 1],
            self.slope_excess[i + 1] * h,
            self.ddphi[i + 1] * h * h,
        ];
        let mut w = [0.0; 3];
        for (basis, d) in HERMITE.iter().zip(data) {
            let b = poly_derivs(basis, s);
            for k in 0..3 {
                w[k] += d * b[k];
            }
        }
        let p = w[1] / h;
        ProfileJet { phi: r + w[0], dphi: 1.0 + p, ddphi: w[2] / (h * h), excess: w[0], slope_excess: p }
    }

    /// φ and its first two derivatives at `r ∈ [0, r_max]`.
    pub fn eval(&self, r: f64) -> Result<ProfileJet> {
        let rmax = self.r_max();
        if !(r >= 0.0) || r > rmax {
            return Err(Error::OutOfRange { r, limit: rmax });
        }
        let k = self.nodes.partition_point(|&x| x <= r);
        if k >= self.nodes.len() {
            return Ok(self.node_jet(self.nodes.len() - 1));
        }
        if self.nodes[k - 1] == r {
            return Ok(self.node_jet(k - 1));
        }
        Ok(self.hermite(k - 1, r))
    }

    /// Like [`eval`](Self::eval), but continues past `r_max` with the power law
    /// `w ∝ r^{-g}` matched to the value and slope of the last node.
    pub fn eval_extended(&self, r: f64) -> Result<ProfileJet> {
        let rmax = self.r_max();
        if r <= rmax {
            return self.eval(r);
        }
        if r.is_infinite() {
            return Ok(ProfileJet { phi: r, dphi: 1.0, ddphi: 0.0, excess: 0.0, slope_excess: 0.0 });
        }
        let n = self.nodes.len() - 1;
        let (wn, pn) = (self.excess[n], self.slope_excess[n]);
        let g = -rmax * pn / wn;
        let w = wn * (r / rmax).powf(-g);
        let p = -g * w / r;
        Ok(ProfileJet { phi: r + w, dphi: 1.0 + p, ddphi: g * (g + 1.0) * w / (r * r), excess: w, slope_excess: p })
    }

    /// `φ_τ(r) = τ φ(r/τ)` and derivatives, using the extended tail past `τ r_max`.
    /// `tau == 0` is the cone itself.
    pub fn scaled(&self, tau: f64, r: f64) -> Result<ProfileJet> {
        if tau == 0.0 {
            return Ok(ProfileJet { phi: r, dphi: 1.0, ddphi: 0.0, excess: 0.0, slope_excess: 0.0 });
        }
        let j = self.eval_extended(r / tau)?;
        Ok(ProfileJet {
            phi: r + tau * j.excess,
            dphi: j.dphi,
            ddphi: j.ddphi / tau,
            excess: tau * j.excess,
            slope_excess: j.slope_excess,
        })
    }

    /// `(1+η)φ''/(1+φ'²) + (m/r)φ' − m/φ` for a jet at r > 0.
    pub fn ode_residual(&self, r: f64, j: &ProfileJet) -> f64 {
        let m = self.params.m as f64;
        let eta = self.params.eta;
        (1.0 + eta) * j.ddphi / (1.0 + j.dphi * j.dphi) + m * (j.excess + j.slope_excess * (r + j.excess)) / (r * j.phi)
    }

    /// Largest weighted residual `min(r,1)·|R|` at interval midpoints.
    ///
    /// At the nodes the residual vanishes by construction, so midpoints are
    /// where the interpolant is tested. The weight `min(r, 1)` is the regular
    /// form of the equation at the singular point r = 0: there `(m/r)φ'`
    /// magnifies node-level rounding in φ' by 1/r, which says nothing about
    /// the solution quality.
    pub fn max_midpoint_residual(&self) -> (f64, f64) {
        let mut worst = (0.0, 0.0);
        for i in 1..self.nodes.len() - 1 {
            let r = 0.5 * (self.nodes[i] + self.nodes[i + 1]);
            let res = r.min(self.scale) * self.ode_residual(r, &self.hermite(i, r)).abs();
            if res > worst.0 || res.is_nan() {
                worst = (res, r);
            }
        }
        worst
    }
}

pub fn check_profile_properties(sol: &ProfileSolution) -> CertificateReport {
    let cert = if sol.eta() == 0.0 { Cert::ProfileProperties } else { Cert::ProfileTildeProperties };
    let mut rep = CertificateReport::new(cert);
    let s = sol.scale;
    let mut convex = Worst::default();
    let (mut above, mut below, mut slope_pos, mut slope_lt1) = (Worst::default(), Worst::default(), Worst::default(), Worst::default());
    let (mut b_pos, mut b_lt, mut b_mono) = (Worst::default(), Worst::default(), Worst::default());
    let n = sol.nodes.len();
    for i in 0..n {
        let r = sol.nodes[i];
        convex.update(sol.ddphi[i], || Location::r(r));
        if r == 0.0 {
            continue;
        }
        let w = sol.excess[i];
        let p = sol.slope_excess[i];
        let b = w - r * p;
        above.update(w, || Location::r(r));
        below.update(s - w, || Location::r(r));
        slope_pos.update(sol.dphi[i], || Location::r(r));
        slope_lt1.update(-p, || Location::r(r));
        b_pos.update(b, || Location::r(r));
        b_lt.update(s - b, || Location::r(r));
    }
    for i in 0..n - 1 {
        let (r0, r1) = (sol.nodes[i], sol.nodes[i + 1]);
        let b0 = sol.excess[i] - r0 * sol.slope_excess[i];
        let b1 = sol.excess[i + 1] - r1 * sol.slope_excess[i + 1];
        b_mono.update(b0 - b1, || Location::r(r1));
    }
    rep.push(convex.strict("phi'' > 0"));
    rep.push(above.strict("r < phi"));
    rep.push(below.strict("phi < phi(0) + r"));
    rep.push(slope_pos.strict("phi' > 0"));
    rep.push(slope_lt1.strict("phi' < 1"));
    rep.push(b_pos.strict("phi - r phi' > 0"));
    rep.push(b_lt.strict("phi - r phi' < phi(0)"));
    rep.push(b_mono.check("phi - r phi' non-increasing"));
    let (res, at) = sol.max_midpoint_residual();
    rep.push(
        Check::info("max midpoint ODE residual", res, Some(Location::r(at)))
            .with_note(format!("tol = {:e}", sol.params.tol)),
    );
    rep
}

/// `φ_τ − r < τ` on the nodes of each rescaled copy.
pub fn check_rescaling(sol: &ProfileSolution, taus: &[f64]) -> Result<CertificateReport> {
    let mut rep = CertificateReport::new(Cert::ProfileRescaling);
    for &tau in taus {
        let st = rescale_profile(sol, tau)?;
        let mut w = Worst::default();
        for (r, e) in st.nodes.iter().zip(&st.excess).skip(1) {
            w.update(tau - e, || Location::r(*r));
        }
        rep.push(w.strict(&format!("phi_tau - r < tau (tau = {tau})")));
    }
    Ok(rep)
}

/// Fitted decay exponent against the closed form.
pub fn check_asymptotics(sol: &ProfileSolution, window: (f64, f64), rel_tol: f64) -> Result<CertificateReport> {
    let mut rep = CertificateReport::new(Cert::ProfileAsymptotics);
    let gamma = gamma_exponent(sol.m(), sol.eta())?;
    let fit = fit_asymptotics(sol, window)?;
    rep.push(
        Check::margin("fitted gamma within tolerance", rel_tol - (fit.gamma / gamma - 1.0).abs(), None)
            .with_note(format!("gamma = {gamma}, fit = {}, kappa = {}, window = {:?}", fit.gamma, fit.kappa, window)),
    );
    rep.push(Check::info("kappa (fit)", fit.kappa, None));
    Ok(rep)
}

/// Residual of `M(φ̃) + η φ̃''/(1+φ̃'²) = 0` and the sign chain `M(φ̃) < −(η/2)φ̃'' < 0`.
///
/// `resid_factor` is the documented multiple of `tol` allowed for the identity.
pub fn supersolution_identity_check(sol: &ProfileSolution, resid_factor: f64) -> CertificateReport {
    let mut rep = CertificateReport::new(Cert::SupersolutionIdentity);
    let m = sol.m() as f64;
    let eta = sol.eta();
    let (res, at) = sol.max_midpoint_residual();
    let bound = resid_factor * sol.params.tol;
    rep.push(
        Check::margin("identity residual <= C tol", bound - res, Some(Location::r(at)))
            .with_note(format!("max residual {res:e}, bound {bound:e}")),
    );
    if eta > 0.0 {
        let (mut neg, mut chain) = (Worst::default(), Worst::default());
        for i in 0..sol.nodes.len() {
            let r = sol.nodes[i];
            if r == 0.0 {
                continue;
            }
            let (w, p, dd) = (sol.excess[i], sol.slope_excess[i], sol.ddphi[i]);
            let dphi = 1.0 + p;
            let mv = dd / (1.0 + dphi * dphi) + m * (w + p * (r + w)) / (r * (r + w));
            neg.update(-mv, || Location::r(r));
            chain.update(-0.5 * eta * dd - mv, || Location::r(r));
        }
        rep.push(neg.strict("M(phi~) < 0"));
        rep.push(chain.strict("M(phi~) < -(eta/2) phi~''"));
    }
    rep
}

/// `φ_{ε^α}(r) ≤ φ̃_ε(r)` on `n` equispaced samples of [0, 1].
pub fn ordering_check(eps: f64, alpha: f64, sol: &ProfileSolution, sol_tilde: &ProfileSolution, n: usize) -> Result<CertificateReport> {
    let mut rep = CertificateReport::new(Cert::Ordering);
    let thr = alpha_threshold(sol.m(), sol_tilde.eta())?;
    rep.push(Check::strict("alpha > (gamma~+1)/(gamma+1)", alpha - thr, None).with_note(format!("threshold {thr}")));
    let tau = eps.powf(alpha);
    let mut gap = Worst::default();
    for k in 0..n {
        let r = k as f64 / (n - 1) as f64;
        let a = sol.scaled(tau, r)?.excess;
        let b = sol_tilde.scaled(eps, r)?.excess;
        gap.update(b - a, || Location::r(r));
    }
    rep.push(gap.check("phi_{eps^alpha} <= phi~_eps"));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> ProfileSolution {
        solve_profile(ProfileParams::new(3, 0.0)).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_exponent(3, 0.0).unwrap(), 2.0);
        assert!((gamma_exponent(4, 0.0).unwrap() - 1.43845).abs() < 1e-5);
        assert!((gamma_exponent(3, 0.02).unwrap() - 2.16371).abs() < 1e-5);
        assert!((alpha_threshold(3, 0.02).unwrap() - 1.05457).abs() < 1e-4);
        assert!(matches!(gamma_exponent(3, 0.3), Err(Error::EtaTooLarge { .. })));
    }

    #[test]
    fn eta_bound_enforced() {
        assert!(ProfileParams::new(3, 0.3).validate().is_err());
        assert!(ProfileParams::new(2, 0.0).validate().is_err());
        assert!(ProfileParams::new(3, 0.02).validate().is_ok());
    }

    #[test]
    fn series_coefficient_m3() {
        assert_eq!(series_coefficient(3, 0.0), 0.375);
        let sol = base();
        let r = 1e-2;
        let j = sol.eval(r).unwrap();
        // next term is O(r^4)
        assert!((j.phi - 1.0 - 0.375 * r * r).abs() < 1e-7);
    }

    #[test]
    fn series_coefficient_with_eta_matches_integration() {
        // Second difference quotient at small r recovers the curvature at 0.
        let sol = solve_profile(ProfileParams::new(3, 0.02)).unwrap();
        let r = 1e-3;
        let j = sol.eval(r).unwrap();
        let c = (j.phi - 1.0) / (r * r);
        assert!((c - series_coefficient(3, 0.02)).abs() < 1e-5);
        assert!((c - 3.0 / (2.0 * 4.0 * 1.02)).abs() > 1e-4);
    }

    #[test]
    fn far_field_bounds() {
        let sol = base();
        let w = sol.eval(100.0).unwrap().excess;
        assert!(w > 0.0 && w < 1.0);
        assert_relative_eq!(w, 7.418e-5, max_relative = 1e-3);
    }

    #[test]
    fn fit_recovers_gamma() {
        let sol = base();
        let fit = fit_asymptotics(&sol, (50.0, 500.0)).unwrap();
        assert!((fit.gamma - 2.0).abs() < 0.04);
        let t = solve_profile(ProfileParams::new(3, 0.02)).unwrap();
        let ft = fit_asymptotics(&t, (50.0, 500.0)).unwrap();
        let g = gamma_exponent(3, 0.02).unwrap();
        assert!((ft.gamma / g - 1.0).abs() < 0.02);
    }

    #[test]
    fn fit_synthetic_power_law() {
        let pts: Vec<_> = (1..=20).map(|k| (k as f64, 3.0 * (k as f64).powi(-2))).collect();
        let (slope, icpt) = log_log_fit(&pts).unwrap();
        assert_relative_eq!(slope, -2.0, epsilon = 1e-13);
        assert_relative_eq!(icpt.exp(), 3.0, max_relative = 1e-13);
        assert!(matches!(log_log_fit(&pts[..5]), Err(Error::WindowTooShort { nodes: 5 })));
    }

    #[test]
    fn gamma_fit_improves_outward() {
        let sol = solve_profile(ProfileParams::new(3, 0.0).with_r_max(4e3)).unwrap();
        let errs: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&a| (fit_asymptotics(&sol, (a, 10.0 * a)).unwrap().gamma - 2.0).abs())
            .collect();
        assert!(errs[1] <= errs[0] && errs[2] <= errs[1], "{errs:?}");
    }

    #[test]
    fn properties_pass() {
        for eta in [0.0, 0.02] {
            let rep = check_profile_properties(&solve_profile(ProfileParams::new(3, eta)).unwrap());
            assert!(rep.pass(), "{rep:#?}");
        }
    }

    #[test]
    fn corrupted_slope_detected() {
        let mut sol = base();
        let i = sol.nodes.len() / 2;
        sol.dphi[i] = 1.5;
        sol.slope_excess[i] = 0.5;
        let rep = check_profile_properties(&sol);
        let c = rep.check("phi' < 1").unwrap();
        assert!(!c.pass);
        assert_eq!(c.location.as_ref().unwrap().r, Some(sol.nodes[i]));
    }

    #[test]
    fn ode_residual_small() {
        for eta in [0.0, 0.02] {
            let sol = solve_profile(ProfileParams::new(3, eta)).unwrap();
            let (res, at) = sol.max_midpoint_residual();
            assert!(res < 100.0 * sol.params.tol, "{res:e} at {at}");
            println!("weighted residual {res:e} at {at}");
        }
    }

    #[test]
    fn rescaling_cases() {
        let sol = base();
        let same = rescale_profile(&sol, 1.0).unwrap();
        assert_eq!(same.phi, sol.phi);
        let small = rescale_profile(&sol, 0.1).unwrap();
        assert!(small.eval(1.0).unwrap().phi - 1.0 < 0.1);
        let big = rescale_profile(&sol, 10.0).unwrap();
        assert_relative_eq!(big.eval(1.0).unwrap().phi, 10.0 * sol.eval(0.1).unwrap().phi, max_relative = 1e-14);
        assert!(matches!(small.eval(200.0), Err(Error::OutOfRange { .. })));
        assert!(check_rescaling(&sol, &[0.1, 1.0, 10.0]).unwrap().pass());
    }

    #[test]
    fn extended_tail_continuous() {
        let sol = base();
        let rm = sol.r_max();
        let a = sol.eval(rm).unwrap();
        let b = sol.eval_extended(rm * (1.0 + 1e-12)).unwrap();
        assert_relative_eq!(a.excess, b.excess, max_relative = 1e-9);
        let far = sol.eval_extended(4.0 * rm).unwrap();
        assert_relative_eq!(far.excess, a.excess / 16.0, max_relative = 0.01);
    }

    #[test]
    fn supersolution_identity() {
        let t = solve_profile(ProfileParams::new(3, 0.02)).unwrap();
        let rep = supersolution_identity_check(&t, 100.0);
        assert!(rep.pass(), "{rep:#?}");
        let rep0 = supersolution_identity_check(&base(), 100.0);
        assert!(rep0.pass());
        assert_eq!(rep0.checks.len(), 1);
    }

    #[test]
    fn ordering_cases() {
        let sol = base();
        let t = solve_profile(ProfileParams::new(3, 0.02)).unwrap();
        let ok = ordering_check(0.01, 1.2, &sol, &t, 10_000).unwrap();
        assert!(ok.pass(), "{ok:#?}");
        let bad = ordering_check(1e-4, 1.0, &sol, &t, 10_000).unwrap();
        assert!(!bad.check("phi_{eps^alpha} <= phi~_eps").unwrap().pass);
    }
}
