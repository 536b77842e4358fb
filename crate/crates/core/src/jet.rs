//! Truncated Taylor arithmetic in one variable.
//!
//! `Jet` holds normalized coefficients `c[k] = f^(k)(x0) / k!`. It is used to
//! get exact derivatives (up to order four) of the gap function, the barrier
//! scale ψ and the smooth cutoffs without hand-expanding chain rules.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub c: [f64; ORDER],
}

const FACT: [f64; ORDER] = [1.0, 1.0, 2.0, 6.0, 24.0];

impl Jet {
    pub const ZERO: Jet = Jet { c: [0.0; ORDER] };

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable at `x0`.
    pub fn var(x0: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x0;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn from_derivatives(d: [f64; ORDER]) -> Self {
        let mut c = [0.0; ORDER];
        for k in 0..ORDER {
            c[k] = d[k] / FACT[k];
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn d(&self, k: usize) -> f64 {
        self.c[k] * FACT[k]
    }

    pub fn derivatives(&self) -> [f64; ORDER] {
        let mut d = [0.0; ORDER];
        for k in 0..ORDER {
            d[k] = self.d(k);
        }
        d
    }

    pub fn scale(self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= s);
        Jet { c }
    }

    pub fn offset(self, s: f64) -> Self {
        let mut c = self.c;
        c[0] += s;
        Jet { c }
    }

    pub fn exp(self) -> Self {
        let mut g = [0.0; ORDER];
        g[0] = self.c[0].exp();
        if g[0] == 0.0 {
            return Jet::ZERO;
        }
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * g[k - j];
            }
            g[k] = s / k as f64;
        }
        Jet { c: g }
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    /// `self^p`, requires a positive leading coefficient.
    pub fn powf(self, p: f64) -> Self {
        let f0 = self.c[0];
        let mut g = [0.0; ORDER];
        g[0] = f0.powf(p);
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * self.c[j] * g[k - j];
            }
            g[k] = s / (k as f64 * f0);
        }
        Jet { c: g }
    }

    /// Compose with a function whose derivatives at `self.value()` are `d`.
    pub fn compose(self, d: [f64; ORDER]) -> Self {
        // Faa di Bruno through powers of the shifted series.
        let mut dx = self;
        dx.c[0] = 0.0;
        let mut out = Jet::constant(d[0]);
        let mut pow = Jet::constant(1.0);
        for k in 1..ORDER {
            pow = pow * dx;
            out = out + pow.scale(d[k] / FACT[k]);
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..ORDER {
            c[k] += o.c[k];
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..ORDER {
            c[k] -= o.c[k];
        }
        Jet { c }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; ORDER];
        for k in 0..ORDER {
            for j in 0..=k {
                c[k] += self.c[j] * o.c[k - j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; ORDER];
        for k in 0..ORDER {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q[k - j];
            }
            q[k] = s / o.c[0];
        }
        Jet { c: q }
    }
}

/// Standard smooth step `e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`, 0 for x ≤ 0 and 1 for x ≥ 1.
pub fn smooth_step(x: Jet) -> Jet {
    let x0 = x.value();
    if x0 <= 0.0 {
        return Jet::ZERO;
    }
    if x0 >= 1.0 {
        return Jet::constant(1.0);
    }
    let a = (-x.recip()).exp();
    let b = (-(Jet::constant(1.0) - x).recip()).exp();
    a / (a + b)
}

/// Bump `exp(-1/t - 1/(1-t))` on (0,1), zero outside.
pub fn bump(t: Jet) -> Jet {
    let t0 = t.value();
    if t0 <= 0.0 || t0 >= 1.0 {
        return Jet::ZERO;
    }
    let q0 = -1.0 / t0 - 1.0 / (1.0 - t0);
    if q0 < -745.0 {
        return Jet::ZERO;
    }
    let q = -(t.recip() + (Jet::constant(1.0) - t).recip());
    q.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_linear() {
        let j = Jet::var(0.3).scale(2.0).exp();
        for k in 0..ORDER {
            assert_relative_eq!(j.d(k), 2f64.powi(k as i32) * 0.6f64.exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn powf_matches_monomial() {
        let x = 1.7;
        let j = Jet::var(x).powf(-0.5);
        let expect = [
            x.powf(-0.5),
            -0.5 * x.powf(-1.5),
            0.75 * x.powf(-2.5),
            -1.875 * x.powf(-3.5),
            6.5625 * x.powf(-4.5),
        ];
        for k in 0..ORDER {
            assert_relative_eq!(j.d(k), expect[k], max_relative = 1e-13);
        }
    }

    #[test]
    fn division_inverts_product() {
        let a = Jet::var(0.4).exp() + Jet::constant(2.0);
        let b = Jet::var(0.4).powf(3.0) + Jet::constant(1.0);
        let q = (a * b) / b;
        for k in 0..ORDER {
            assert_relative_eq!(q.c[k], a.c[k], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn compose_matches_direct_exp() {
        let x = Jet::var(0.2) * Jet::var(0.2);
        let v = x.value().exp();
        let direct = x.exp();
        let composed = x.compose([v; ORDER]);
        for k in 0..ORDER {
            assert_relative_eq!(direct.c[k], composed.c[k], max_relative = 1e-13, epsilon = 1e-15);
        }
    }

    #[test]
    fn smooth_step_symmetry() {
        for &x in &[0.1, 0.25, 0.5, 0.8] {
            let a = smooth_step(Jet::var(x));
            let b = smooth_step(Jet::var(1.0 - x));
            assert_relative_eq!(a.value() + b.value(), 1.0, epsilon = 1e-15);
            assert_relative_eq!(a.d(1), b.d(1), max_relative = 1e-12);
            assert_relative_eq!(a.d(2), -b.d(2), max_relative = 1e-10, epsilon = 1e-12);
        }
        assert_eq!(smooth_step(Jet::var(0.5)).value(), 0.5);
    }

    #[test]
    fn bump_peak() {
        let b = bump(Jet::var(0.5));
        assert_relative_eq!(b.value(), (-4.0f64).exp(), max_relative = 1e-15);
        assert!(b.d(1).abs() < 1e-16);
        assert_eq!(bump(Jet::var(1e-4)).value(), 0.0);
    }
}
