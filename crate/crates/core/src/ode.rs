//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_steps: 1_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` and reports the state at each of the
/// nondecreasing `outputs` (all `≥ t0`). Non-finite states are an error.
pub fn integrate<const D: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; D],
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<Vec<[f64; D]>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParams("output times must be nondecreasing and >= t0".into()));
    }
    let mut res = Vec::with_capacity(outputs.len());
    let mut t = t0;
    let mut y = y0;
    let mut h: f64 = 1e-3;
    let mut steps = 0usize;
    for &target in outputs {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Numerical(format!("ODE step limit reached at t = {t}")));
            }
            steps += 1;
            let mut hs = h.min(target - t);
            let last = hs >= target - t;
            let k1 = rhs(t, &y);
            let k2 = rhs(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(t + C4 * hs, &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(
                t + C5 * hs,
                &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + hs,
                &combo(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y5 = combo(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = rhs(t + hs, &y5);
            let mut err = 0.0f64;
            for i in 0..D {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                // treat as a rejected step and shrink hard
                hs *= 0.1;
                h = hs;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Numerical(format!("ODE solution not finite near t = {t}")));
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = hs * factor;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Numerical(format!("ODE step size underflow at t = {t}")));
            }
        }
        res.push(y);
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let out = integrate(|_, y| [-y[0]], 0.0, [1.0], &[0.0, 1.0, 5.0], OdeOptions::default())
            .unwrap();
        assert_eq!(out[0][0], 1.0);
        assert!((out[1][0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((out[2][0] - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator() {
        let tau = std::f64::consts::TAU;
        let out = integrate(|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], &[tau], OdeOptions::default())
            .unwrap();
        assert!((out[0][0] - 1.0).abs() < 1e-8 && out[0][1].abs() < 1e-8);
    }

    #[test]
    fn blowup_is_reported() {
        let r = integrate(|_, y| [y[0] * y[0]], 0.0, [1.0], &[2.0], OdeOptions::default());
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
