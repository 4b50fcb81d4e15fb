//! Independent numerical references for the simulator and the limit curves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{JumpModel, NetworkParams, SaturatedParams, SharingNetwork};
use crate::weights::WeightFunction;

/// Default bound on the truncated tail mass before a result is flagged.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// `{0, …, k}`.
    Line { k: usize },
    /// `{0, …, k1} × {0, …, k2}`, stored with `x₂` varying fastest.
    Grid { k1: usize, k2: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    pub support: Support,
    pub probs: Vec<f64>,
    /// Estimated probability mass outside the truncation.
    pub tail_mass: f64,
    pub truncation_warning: bool,
}

impl StationaryDist {
    pub fn prob2(&self, x1: usize, x2: usize) -> f64 {
        match self.support {
            Support::Grid { k2, .. } => self.probs[x1 * (k2 + 1) + x2],
            Support::Line { .. } => panic!("prob2 on a one-dimensional distribution"),
        }
    }

    /// Marginal of coordinate `coord` (0 or 1) of a grid distribution.
    pub fn marginal(&self, coord: usize) -> Vec<f64> {
        match self.support {
            Support::Line { .. } => self.probs.clone(),
            Support::Grid { k1, k2 } => {
                let mut m = vec![0.0; if coord == 0 { k1 + 1 } else { k2 + 1 }];
                for x1 in 0..=k1 {
                    for x2 in 0..=k2 {
                        m[if coord == 0 { x1 } else { x2 }] += self.prob2(x1, x2);
                    }
                }
                m
            }
        }
    }

    /// Total-variation distance to another distribution on the same support.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        let n = self.probs.len().max(other.len());
        0.5 * (0..n)
            .map(|i| {
                (self.probs.get(i).copied().unwrap_or(0.0) - other.get(i).copied().unwrap_or(0.0))
                    .abs()
            })
            .sum::<f64>()
    }

    /// CSV rows `x,prob` or `x1,x2,prob`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        match self.support {
            Support::Line { .. } => {
                writeln!(out, "x,prob")?;
                for (x, p) in self.probs.iter().enumerate() {
                    writeln!(out, "{x},{p}")?;
                }
            }
            Support::Grid { k1, k2 } => {
                writeln!(out, "x1,x2,prob")?;
                for x1 in 0..=k1 {
                    for x2 in 0..=k2 {
                        writeln!(out, "{x1},{x2},{}", self.prob2(x1, x2))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for p in v.iter_mut() {
        *p /= s;
    }
}

/// Product-form law of the saturated chain on `{0, …, K}`.
pub fn bd_stationary(sp: &SaturatedParams, k: usize) -> Result<StationaryDist> {
    if k < 1 {
        return Err(Error::InvalidParams("truncation K must be at least 1".into()));
    }
    // log-weights avoid overflow for large K
    let mut logw = Vec::with_capacity(k + 1);
    logw.push(0.0);
    for x in 1..=k {
        let prev = logw[x - 1];
        logw.push(prev + (sp.lambda / sp.death_rate(x as u64)).ln());
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let inside: f64 = probs.iter().sum();
    // Continue the product past K; the ratio tends to ρ, so a geometric
    // bound closes the sum once the terms are tiny.
    let mut tail = 0.0;
    let mut log_term = logw[k] - max;
    let mut x = k as u64;
    let limit = x + 10_000_000;
    loop {
        x += 1;
        let ratio = sp.lambda / sp.death_rate(x);
        log_term += ratio.ln();
        let term = log_term.exp();
        tail += term;
        if term < 1e-20 * inside {
            if ratio < 1.0 {
                tail += term * ratio / (1.0 - ratio);
            } else {
                tail = f64::INFINITY;
            }
            break;
        }
        if x >= limit {
            tail = if ratio < 1.0 { tail + term * ratio / (1.0 - ratio) } else { f64::INFINITY };
            break;
        }
    }
    let tail_mass = if tail.is_finite() { tail / (inside + tail) } else { 1.0 };
    normalize(&mut probs);
    Ok(StationaryDist {
        support: Support::Line { k },
        probs,
        tail_mass,
        truncation_warning: tail_mass > DEFAULT_TAIL_BOUND,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-10, max_iter: 2_000_000 }
    }
}

/// Stationary law of the two-node chain on `{0..K1}×{0..K2}`, arrivals at
/// the cap dropped, by power iteration on the lazy uniformized kernel until
/// `‖πQ‖₁ < tol`.
pub fn truncated_stationary(
    params: &NetworkParams,
    f: &WeightFunction,
    k1: usize,
    k2: usize,
    opts: PowerOptions,
) -> Result<StationaryDist> {
    if params.nodes() != 2 {
        return Err(Error::InvalidParams("truncated solve is for two nodes".into()));
    }
    if params.rho_bar() >= 1.0 {
        return Err(Error::Domain(format!("total load {} must be below 1", params.rho_bar())));
    }
    let model = SharingNetwork::new(params.clone(), f.clone());
    let n2 = k2 + 1;
    let size = (k1 + 1) * n2;
    // outgoing rates per state: [up1, up2, down1, down2]
    let mut rates = vec![[0.0f64; 4]; size];
    let mut r = [0.0; 4];
    let mut max_exit = 0.0f64;
    for x1 in 0..=k1 {
        for x2 in 0..=k2 {
            model.rates(&[x1 as u64, x2 as u64], &mut r)?;
            if x1 == k1 {
                r[0] = 0.0;
            }
            if x2 == k2 {
                r[1] = 0.0;
            }
            rates[x1 * n2 + x2] = r;
            max_exit = max_exit.max(r.iter().sum());
        }
    }
    let lam = 1.1 * max_exit;
    let mut pi = vec![1.0 / size as f64; size];
    let mut next = vec![0.0; size];
    for iter in 0..opts.max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        for x1 in 0..=k1 {
            for x2 in 0..=k2 {
                let s = x1 * n2 + x2;
                let p = pi[s];
                let q = &rates[s];
                let out = q[0] + q[1] + q[2] + q[3];
                next[s] += p * (1.0 - out / lam);
                if q[0] > 0.0 {
                    next[s + n2] += p * q[0] / lam;
                }
                if q[1] > 0.0 {
                    next[s + 1] += p * q[1] / lam;
                }
                if q[2] > 0.0 {
                    next[s - n2] += p * q[2] / lam;
                }
                if q[3] > 0.0 {
                    next[s - 1] += p * q[3] / lam;
                }
            }
        }
        // ‖πQ‖₁ = Λ‖πP − π‖₁
        let check = iter % 50 == 49;
        let residual =
            if check { lam * next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>() } else { 1.0 };
        std::mem::swap(&mut pi, &mut next);
        if check && residual < opts.tol {
            normalize(&mut pi);
            let edge: f64 = (0..=k1)
                .flat_map(|x1| (0..=k2).map(move |x2| (x1, x2)))
                .filter(|&(x1, x2)| x1 == k1 || x2 == k2)
                .map(|(x1, x2)| pi[x1 * n2 + x2])
                .sum();
            return Ok(StationaryDist {
                support: Support::Grid { k1, k2 },
                probs: pi,
                tail_mass: edge,
                truncation_warning: edge > 1e-6,
            });
        }
    }
    Err(Error::Numerical(format!(
        "power iteration did not reach residual {} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

/// `‖πQ‖₁` of a grid distribution on the truncated generator.
pub fn generator_residual(
    dist: &StationaryDist,
    params: &NetworkParams,
    f: &WeightFunction,
) -> Result<f64> {
    let Support::Grid { k1, k2 } = dist.support else {
        return Err(Error::InvalidParams("residual needs a grid distribution".into()));
    };
    let model = SharingNetwork::new(params.clone(), f.clone());
    let n2 = k2 + 1;
    let mut flow = vec![0.0; dist.probs.len()];
    let mut r = [0.0; 4];
    for x1 in 0..=k1 {
        for x2 in 0..=k2 {
            model.rates(&[x1 as u64, x2 as u64], &mut r)?;
            if x1 == k1 {
                r[0] = 0.0;
            }
            if x2 == k2 {
                r[1] = 0.0;
            }
            let s = x1 * n2 + x2;
            let p = dist.probs[s];
            flow[s] -= p * r.iter().sum::<f64>();
            if r[0] > 0.0 {
                flow[s + n2] += p * r[0];
            }
            if r[1] > 0.0 {
                flow[s + 1] += p * r[1];
            }
            if r[2] > 0.0 {
                flow[s - n2] += p * r[2];
            }
            if r[3] > 0.0 {
                flow[s - 1] += p * r[3];
            }
        }
    }
    Ok(flow.iter().map(|v| v.abs()).sum())
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]` to absolute `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
        let (v, err) = gk15(f, a, b);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= tol || depth == 0 {
            if err > tol {
                return Err(Error::Numerical(format!("quadrature did not converge on [{a}, {b}]")));
            }
            return Ok(v);
        }
        let m = 0.5 * (a + b);
        Ok(rec(f, a, m, 0.5 * tol, depth - 1)? + rec(f, m, b, 0.5 * tol, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    rec(&f, a, b, tol, 40)
}

/// `1/log u − 1/(u−1)`, smooth through `u = 1` where it equals 1/2.
fn log_recip_regular(u: f64) -> f64 {
    let e = u - 1.0;
    if e.abs() < 1e-4 {
        0.5 - e / 12.0 + e * e / 24.0
    } else {
        1.0 / u.ln() - 1.0 / e
    }
}

/// `∫_δ^h du/log u`, with the pole at 1 integrated in closed form.
pub fn log_integral_between(delta: f64, h: f64, tol: f64) -> Result<f64> {
    let pole = ((1.0 - h) / (1.0 - delta)).abs().ln();
    Ok(pole + integrate_adaptive(log_recip_regular, delta, h, tol)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureH {
    pub value: f64,
    /// `h` would exceed `1 − 1e-12`; the value is then 1.
    pub saturated: bool,
}

/// Inverts `∫_δ^{h} du/log u = −μt/(1+α*)²` for `h ∈ (δ, 1)` by bisection.
pub fn quadrature_h(delta: f64, mu: f64, alpha_star: f64, t: f64, tol: f64) -> Result<QuadratureH> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("quadrature_h needs delta in (0,1), got {delta}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(QuadratureH { value: delta, saturated: false });
    }
    let target = -mu * t / (1.0 + alpha_star).powi(2);
    let qtol = tol * 1e-2;
    let g = |h: f64| -> Result<f64> { Ok(log_integral_between(delta, h, qtol)? - target) };
    let top = 1.0 - 1e-12;
    if g(top)? > 0.0 {
        return Ok(QuadratureH { value: 1.0, saturated: true });
    }
    let (mut lo, mut hi) = (delta, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if gm.abs() < tol && hi - lo < 1e-15 {
            break;
        }
    }
    Ok(QuadratureH { value: 0.5 * (lo + hi), saturated: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkConstant {
    /// `λE[σ²]/2 = λ₁/μ₁² + λ₂/μ₂²`, the heavy-traffic limit of `E[(1−ρ̄)·workload]`.
    pub workload: f64,
    /// `μ₂ · workload`, the induced limit of `E[(1−ρ̄)L₂]` when `L₁` is negligible.
    pub l2_mean: f64,
}

pub fn pk_heavy_constant(params: &NetworkParams) -> Result<PkConstant> {
    if params.nodes() != 2 {
        return Err(Error::InvalidParams("the PK constant is for two nodes".into()));
    }
    let (l, m) = (params.lambda(), params.mu());
    let workload = l[0] / (m[0] * m[0]) + l[1] / (m[1] * m[1]);
    Ok(PkConstant { workload, l2_mean: m[1] * workload })
}

/// Deterministic drift `ẋ_j = λ_j − μ_j f(x_j)/Σ_i f(x_i)` of the network at
/// finite `N`, stepped by explicit Euler with step `dt` and clamped at 0.
/// Runs until `stop(t, x)` holds or `t_max` passes and returns the final
/// `(t, x)`.
pub fn drift_until<S>(
    params: &NetworkParams,
    f: &WeightFunction,
    start: &[f64],
    dt: f64,
    t_max: f64,
    mut stop: S,
) -> Result<(f64, Vec<f64>)>
where
    S: FnMut(f64, &[f64]) -> bool,
{
    if start.len() != params.nodes() || !(dt > 0.0) {
        return Err(Error::InvalidParams("drift needs one start value per node and dt > 0".into()));
    }
    let (lam, mu) = (params.lambda(), params.mu());
    let mut x = start.to_vec();
    let mut w = vec![0.0; x.len()];
    let mut t = 0.0;
    while !stop(t, &x) && t < t_max {
        for (wi, &xi) in w.iter_mut().zip(&x) {
            *wi = f.eval_real(xi)?;
        }
        let total: f64 = w.iter().sum();
        for j in 0..x.len() {
            let share = if total > 0.0 { w[j] / total } else { 0.0 };
            x[j] = (x[j] + (lam[j] - mu[j] * share) * dt).max(0.0);
        }
        t += dt;
    }
    Ok((t, x))
}
