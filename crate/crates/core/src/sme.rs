//! The symmetric minimal surface operator in (r, y) form.
//!
//! `M(v) = [(1+v_y²)v_rr + (1+v_r²)v_yy − 2v_r v_y v_ry] / (1+v_r²+v_y²) + m(v_r/r − 1/v)`.
//!
//! Surfaces are passed as the excess `w = v − r` with its derivatives, which
//! keeps `v_r/r − 1/v` free of cancellation near the cone. On the axis r = 0
//! the symmetric limit `m(v_rr − 1/v)` replaces the last term.

use crate::error::{Error, Result};

/// Second-order jet of a surface `v = r + w` at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SmeJet {
    pub r: f64,
    pub w: f64,
    pub wr: f64,
    pub wy: f64,
    pub wrr: f64,
    pub wry: f64,
    pub wyy: f64,
}

/// Partial derivatives of M with respect to the jet entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SmePartials {
    pub w: f64,
    pub wr: f64,
    pub wy: f64,
    pub wrr: f64,
    pub wry: f64,
    pub wyy: f64,
}

/// Tolerance on |v_r| at r = 0 before the symmetric limit is refused.
pub const AXIS_SLOPE_TOL: f64 = 1e-8;

impl SmeJet {
    /// The cone `v = r` itself.
    pub fn cone(r: f64) -> Self {
        SmeJet { r, ..Default::default() }
    }

    pub fn v(&self) -> f64 {
        self.r + self.w
    }

    pub fn vr(&self) -> f64 {
        1.0 + self.wr
    }

    /// |Dv|² = v_r² + v_y².
    pub fn grad_sq(&self) -> f64 {
        let p = self.vr();
        p * p + self.wy * self.wy
    }

    fn check(&self) -> Result<f64> {
        let v = self.v();
        if !(v > 0.0) {
            return Err(Error::Domain(format!("v = {v} <= 0 at r = {}", self.r)));
        }
        if self.r == 0.0 && self.vr().abs() > AXIS_SLOPE_TOL {
            return Err(Error::Domain(format!("v_r = {} != 0 on the axis", self.vr())));
        }
        Ok(v)
    }

    pub fn residual(&self, m: u32) -> Result<f64> {
        let v = self.check()?;
        let m = m as f64;
        let (p, q) = (self.vr(), self.wy);
        let big_w = 1.0 + p * p + q * q;
        let n = (1.0 + q * q) * self.wrr + (1.0 + p * p) * self.wyy - 2.0 * p * q * self.wry;
        let lower = if self.r > 0.0 {
            m * (self.w + self.wr * v) / (self.r * v)
        } else {
            m * (self.wrr - 1.0 / v)
        };
        Ok(n / big_w + lower)
    }

    pub fn partials(&self, m: u32) -> Result<SmePartials> {
        let v = self.check()?;
        let m = m as f64;
        let (p, q) = (self.vr(), self.wy);
        let (a, b, c) = (self.wrr, self.wry, self.wyy);
        let big_w = 1.0 + p * p + q * q;
        let n = (1.0 + q * q) * a + (1.0 + p * p) * c - 2.0 * p * q * b;
        let w2 = big_w * big_w;
        let mut out = SmePartials {
            w: m / (v * v),
            wr: (2.0 * p * c - 2.0 * q * b) / big_w - 2.0 * p * n / w2,
            wy: (2.0 * q * a - 2.0 * p * b) / big_w - 2.0 * q * n / w2,
            wrr: (1.0 + q * q) / big_w,
            wry: -2.0 * p * q / big_w,
            wyy: (1.0 + p * p) / big_w,
        };
        if self.r > 0.0 {
            out.wr += m / self.r;
        } else {
            out.wrr += m;
        }
        Ok(out)
    }
}

/// M(v) for a jet; the free-function form of [`SmeJet::residual`].
pub fn sme_residual_2d(jet: &SmeJet, m: u32) -> Result<f64> {
    jet.residual(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cone_is_exact() {
        for r in [1e-6, 0.3, 10.0] {
            assert_eq!(SmeJet::cone(r).residual(3).unwrap(), 0.0);
        }
    }

    #[test]
    fn nonpositive_rejected() {
        let j = SmeJet { r: 0.1, w: -0.2, ..Default::default() };
        assert!(j.residual(3).is_err());
        let axis = SmeJet { r: 0.0, w: 1.0, wr: 0.0, ..Default::default() };
        assert!(axis.residual(3).is_err(), "v_r = 1 on the axis must be refused");
    }

    #[test]
    fn axis_limit_matches_small_r() {
        // v = 1 + r^2 + y-term: (m/r) v_r = 2m = m v_rr
        let at = |r: f64| SmeJet { r, w: 1.0 + r * r - r, wr: 2.0 * r - 1.0, wy: 0.1, wrr: 2.0, wry: 0.0, wyy: -0.3 };
        let a = at(0.0).residual(3).unwrap();
        let b = at(1e-7).residual(3).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    fn jet_strategy() -> impl Strategy<Value = SmeJet> {
        (0.01f64..2.0, 0.01f64..1.0, -0.5f64..0.5, -0.5f64..0.5, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(r, w, wr, wy, wrr, wry, wyy)| SmeJet { r, w, wr, wy, wrr, wry, wyy })
    }

    proptest! {
        #[test]
        fn partials_match_finite_differences(j in jet_strategy()) {
            let p = j.partials(3).unwrap();
            let d = 1e-6;
            let fd = |f: &dyn Fn(&mut SmeJet, f64)| {
                let (mut a, mut b) = (j, j);
                f(&mut a, d);
                f(&mut b, -d);
                (a.residual(3).unwrap() - b.residual(3).unwrap()) / (2.0 * d)
            };
            let cases: [(f64, f64); 6] = [
                (p.w, fd(&|s, e| s.w += e)),
                (p.wr, fd(&|s, e| s.wr += e)),
                (p.wy, fd(&|s, e| s.wy += e)),
                (p.wrr, fd(&|s, e| s.wrr += e)),
                (p.wry, fd(&|s, e| s.wry += e)),
                (p.wyy, fd(&|s, e| s.wyy += e)),
            ];
            for (exact, approx) in cases {
                prop_assert!((exact - approx).abs() <= 1e-5 * (1.0 + exact.abs()), "{exact} vs {approx}");
            }
        }

        #[test]
        fn scale_covariance(j in jet_strategy(), lam in 0.1f64..10.0) {
            // v_λ(r,y) = λ v(r/λ, y/λ) has M(v_λ) = M(v)/λ
            let s = SmeJet { r: lam * j.r, w: lam * j.w, wr: j.wr, wy: j.wy, wrr: j.wrr / lam, wry: j.wry / lam, wyy: j.wyy / lam };
            let a = j.residual(3).unwrap();
            let b = s.residual(3).unwrap();
            prop_assert!((a - lam * b).abs() <= 1e-10 * (1.0 + a.abs()) * 10.0);
        }
    }
}
