//! Local-equilibrium curves `h`, `h_N` and the general-weight analogue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};

fn opts(tol: f64) -> OdeOptions {
    OdeOptions { abs_tol: tol, rel_tol: tol, ..OdeOptions::default() }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("initial value delta must be positive, got {delta}")));
    }
    Ok(())
}

/// `h` on a nondecreasing grid of times, where `h' = −μ/(1+α*)²·log h`
/// and `h(0) = δ`. Values `δ > 1` are accepted and decrease toward 1.
pub fn h_path(delta: f64, mu: f64, alpha_star: f64, ts: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let c = mu / (1.0 + alpha_star).powi(2);
    let out = integrate(|_, y: &[f64; 1]| [-c * y[0].ln()], 0.0, [delta], ts, opts(tol))?;
    Ok(out.into_iter().map(|y| y[0]).collect())
}

pub fn h_curve(delta: f64, mu: f64, alpha_star: f64, t: f64, tol: f64) -> Result<f64> {
    Ok(h_path(delta, mu, alpha_star, &[t], tol)?[0])
}

/// `h_N(t)` for `ḣ_N = −μ₁/(1+α*)·log h_N/(α*+1+log h_N/log N)`.
pub fn hn_curve(delta: f64, mu1: f64, alpha_star: f64, n: f64, t: f64, tol: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(n >= 3.0) {
        return Err(Error::Domain(format!("N must be at least 3, got {n}")));
    }
    let ln_n = n.ln();
    let a1 = 1.0 + alpha_star;
    let rhs = |_: f64, y: &[f64; 1]| {
        let l = y[0].ln();
        [-mu1 / a1 * l / (a1 + l / ln_n)]
    };
    Ok(integrate(rhs, 0.0, [delta], &[t], opts(tol))?[0][0])
}

/// Comparison of `h_N` with its limit at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnExpansion {
    pub h: f64,
    pub h_n: f64,
    /// `(h − h_N)·log N`.
    pub scaled_gap: f64,
    /// `μ₁/(α*+1)³ ∫₀ᵗ (log h)² du`.
    pub stated_correction: f64,
    /// Limit of `(h − h_N)·log N` from linearizing the `h_N` equation around
    /// `h`: minus the solution of
    /// `e' = −μ₁/((1+α*)² h)·e + μ₁(log h)²/(1+α*)³`, `e(0) = 0`.
    pub linearized_correction: f64,
}

pub fn hn_expansion(
    delta: f64,
    mu1: f64,
    alpha_star: f64,
    n: f64,
    t: f64,
    tol: f64,
) -> Result<HnExpansion> {
    let h_n = hn_curve(delta, mu1, alpha_star, n, t, tol)?;
    let a1 = 1.0 + alpha_star;
    let c = mu1 / (a1 * a1);
    let k = mu1 / a1.powi(3);
    let rhs = |_: f64, y: &[f64; 3]| {
        let l = y[0].ln();
        [-c * l, k * l * l, -c * y[2] / y[0] + k * l * l]
    };
    let y = integrate(rhs, 0.0, [delta, 0.0, 0.0], &[t], opts(tol))?[0];
    Ok(HnExpansion {
        h: y[0],
        h_n,
        scaled_gap: (y[0] - h_n) * n.ln(),
        stated_correction: y[1],
        linearized_correction: -y[2],
    })
}

/// A value computed from a limit law that is conjectured, not proved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conjectured {
    pub value: f64,
}

impl Conjectured {
    pub const LABEL: &'static str = "CONJECTURED";
}

/// `h' = −μ/(1+α*)²·B_f(h)`, `h(0) = δ`, for a companion `B_f` that
/// vanishes at 1, is negative below and positive above.
pub fn h_general<B>(
    delta: f64,
    mu: f64,
    alpha_star: f64,
    bf: B,
    t: f64,
    tol: f64,
) -> Result<Conjectured>
where
    B: Fn(f64) -> f64,
{
    check_delta(delta)?;
    if bf(1.0).abs() > 1e-12 {
        return Err(Error::Domain("B_f(1) must vanish".into()));
    }
    let below = [1e-3, 0.1, 0.3, 0.5, 0.9, 0.99];
    let above = [1.01, 1.5, 2.0, 10.0, 1e3];
    if below.iter().any(|&u| !(bf(u) < 0.0)) || above.iter().any(|&u| !(bf(u) > 0.0)) {
        return Err(Error::Domain("B_f must be negative on (0,1) and positive on (1,inf)".into()));
    }
    let c = mu / (1.0 + alpha_star).powi(2);
    let y = integrate(|_, y: &[f64; 1]| [-c * bf(y[0])], 0.0, [delta], &[t], opts(tol))?;
    Ok(Conjectured { value: y[0][0] })
}
