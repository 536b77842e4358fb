//! Adaptive Dormand–Prince 5(4) for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of A; these are the 5th minus 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `max_step(t)` caps the step size and `weight(t)` scales the error tolerance
/// locally; `on_step` sees every accepted state with its derivative and may
/// abort the run by returning an error.
pub fn dopri5<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: StepControl,
    max_step: impl Fn(f64) -> f64,
    weight: impl Fn(f64) -> f64,
    mut on_step: impl FnMut(f64, &[f64; N], &[f64; N]) -> Result<()>,
) -> Result<[f64; N]> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y)?;
    let mut h = ctl.h_init.min(max_step(t));
    let mut k = [[0.0; N]; 7];
    while dir * (t_end - t) > 0.0 {
        h = h.min(max_step(t));
        let last = h >= dir * (t_end - t);
        if last {
            h = dir * (t_end - t);
        }
        if h < ctl.h_min && !last {
            return Err(Error::StepUnderflow { r: t, h });
        }
        k[0] = k0;
        let mut ytmp = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ytmp[i] = y[i] + dir * h * acc;
            }
            k[s] = f(t + dir * C[s] * h, &ytmp)?;
        }
        // ytmp now holds the 5th-order solution (stage 7 is evaluated there).
        let mut err = 0.0;
        let wt = weight(t);
        for i in 0..N {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            let sc = wt * (ctl.atol + ctl.rtol * y[i].abs().max(ytmp[i].abs()));
            err += (h * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h < ctl.h_min {
                return Err(Error::StepUnderflow { r: t, h });
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + dir * h };
            y = ytmp;
            k0 = k[6];
            on_step(t, &y, &k0)?;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let ctl = StepControl { rtol: 1e-11, atol: 1e-13, h_init: 1e-3, h_min: 1e-14 };
        let y = dopri5(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [0.0, 1.0],
            10.0,
            ctl,
            |_| 1.0,
            |_| 1.0,
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-9);
        assert!((y[1] - 10f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn backward_direction() {
        let ctl = StepControl { rtol: 1e-10, atol: 1e-12, h_init: 1e-2, h_min: 1e-14 };
        let y = dopri5(|_, y: &[f64; 1]| Ok([y[0]]), 1.0, [1f64.exp()], 0.0, ctl, |_| 0.1, |_| 1.0, |_, _, _| Ok(())).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
    }
}
