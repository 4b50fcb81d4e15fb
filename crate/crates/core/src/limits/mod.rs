//! Limit laws: closed-form curves, ODE solutions, the multi-node phase table
//! and the time/space lenses that map raw paths onto them.

mod hcurves;
mod lens;
mod phase;
mod timescales;

pub use hcurves::{h_curve, h_general, h_path, hn_curve, hn_expansion, Conjectured, HnExpansion};
pub use lens::{LocalEqView, ScalingLens};
pub use phase::PhaseTable;
pub use timescales::{general_time_scales, TimeScales};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::NetworkParams;

/// Default absolute tolerance of the ODE-based curves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// `ρ₁/(1−ρ₁)`, the exponent of the small queue's equilibrium level.
pub fn alpha_star(rho1: f64) -> Result<f64> {
    if !(rho1 > 0.0 && rho1 < 1.0) {
        return Err(Error::Domain(format!("alpha_star needs 0 < rho1 < 1, got {rho1}")));
    }
    Ok(rho1 / (1.0 - rho1))
}

/// A curve value together with whether the argument was inside the domain
/// where the limit statement applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub in_domain: bool,
}

/// `λ − μ t/(Jt+1)`, the limit of `L_j(N^t)/N^t` during the initial phase.
/// The domain is `0 < t < ρ/(1−Jρ)` using this node's own load.
pub fn initial_phase_curve(lambda: f64, mu: f64, j: usize, t: f64) -> Flagged {
    let jf = j as f64;
    let rho = lambda / mu;
    let t1 = if jf * rho < 1.0 { rho / (1.0 - jf * rho) } else { f64::INFINITY };
    Flagged { value: lambda - mu * t / (jf * t + 1.0), in_domain: t > 0.0 && t < t1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    /// Variance rate of the Brownian term, `2λ₁`.
    pub diffusion_coeff: f64,
    /// Mean-reversion rate `μ₁/(α*+1)²`.
    pub drift_rate: f64,
    /// `λ₁(α*+1)²/μ₁`.
    pub stationary_variance: f64,
}

pub fn ou_params(lambda1: f64, mu1: f64, alpha_star: f64) -> Result<OuParams> {
    if !(lambda1 > 0.0 && mu1 > 0.0 && alpha_star > 0.0) {
        return Err(Error::Domain("OU parameters need positive rates and alpha_star".into()));
    }
    let a1 = (alpha_star + 1.0).powi(2);
    let diffusion_coeff = 2.0 * lambda1;
    let drift_rate = mu1 / a1;
    Ok(OuParams {
        diffusion_coeff,
        drift_rate,
        stationary_variance: diffusion_coeff / (2.0 * drift_rate),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub gamma: f64,
    /// Emptying time of the big queue; infinite when `ρ₁+ρ₂ ≥ 1`.
    pub t0: f64,
}

/// `γ(t) = (1 + μ₂(ρ₁+ρ₂−1)t)⁺` and `t₀ = 1/(μ₂(1−ρ₁−ρ₂))`.
pub fn gamma_curve(mu2: f64, rho1: f64, rho2: f64, t: f64) -> Gamma {
    let slope = mu2 * (rho1 + rho2 - 1.0);
    let t0 = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    let gamma = if t >= t0 { 0.0 } else { (1.0 + slope * t).max(0.0) };
    Gamma { gamma, t0 }
}

/// Fluid limit `(ℓ₁, ℓ₂)(t)` of `(L₁(Nt)/N, L₂(Nt)/N)` from `(x, 1−x)`.
///
/// While both queues are of order `N` each gets half the server. A queue
/// with load below 1/2 that empties stays at zero on this scale and uses the
/// fraction `ρ` of the server, leaving `1−ρ` to the other.
pub fn fluid_limit(x: f64, params: &NetworkParams, t: f64) -> Result<(f64, f64)> {
    if params.nodes() != 2 {
        return Err(Error::InvalidParams("fluid limit is defined for two nodes".into()));
    }
    if !(0.0..=1.0).contains(&x) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need x in [0,1] and t >= 0, got x = {x}, t = {t}")));
    }
    let rho = [params.rho(0), params.rho(1)];
    if rho.iter().any(|&r| r == 0.5) {
        return Err(Error::Boundary("a load equal to 1/2 is excluded".into()));
    }
    let lam = params.lambda();
    let mu = params.mu();
    let mut l = [x, 1.0 - x];
    let mut left = t;
    loop {
        let alive = [l[0] > 0.0 || rho[0] > 0.5, l[1] > 0.0 || rho[1] > 0.5];
        match alive {
            [true, true] => {
                let slope = [lam[0] - mu[0] / 2.0, lam[1] - mu[1] / 2.0];
                let hit = |j: usize| {
                    if slope[j] < 0.0 {
                        l[j] / -slope[j]
                    } else {
                        f64::INFINITY
                    }
                };
                let (t_a, t_b) = (hit(0), hit(1));
                let tau = t_a.min(t_b);
                if tau >= left {
                    return Ok((l[0] + slope[0] * left, l[1] + slope[1] * left));
                }
                for j in 0..2 {
                    l[j] += slope[j] * tau;
                }
                if t_a <= t_b {
                    l[0] = 0.0;
                }
                if t_b <= t_a {
                    l[1] = 0.0;
                }
                left -= tau;
            }
            [true, false] | [false, true] => {
                let (j, other) = if alive[0] { (0, 1) } else { (1, 0) };
                let slope = lam[j] - mu[j] * (1.0 - rho[other]);
                l[j] = (l[j] + slope * left).max(0.0);
                return Ok((l[0], l[1]));
            }
            [false, false] => return Ok((0.0, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTraffic {
    pub eta: f64,
    pub eta_inv: f64,
    /// Mean of the limit of `(1−ρ̄)L₂` implied by the M/G/1 workload limit,
    /// `1 − ρ₁ + ρ₁μ₂/μ₁`.
    pub m_pk: f64,
}

/// The displayed rate `η` of the exponential heavy-traffic limit, with the
/// workload-based mean reported alongside since the two disagree for μ ≠ 1.
pub fn heavy_traffic_eta(mu1: f64, mu2: f64, rho1: f64) -> Result<HeavyTraffic> {
    if !(rho1 > 0.0 && rho1 < 0.5) {
        return Err(Error::Domain(format!("heavy traffic limit needs 0 < rho1 < 1/2, got {rho1}")));
    }
    if !(mu1 > 0.0 && mu2 > 0.0) {
        return Err(Error::Domain("service rates must be positive".into()));
    }
    let eta_inv = mu2 / 2f64.sqrt()
        * (1.0 + (mu1 - mu2).powi(2) * rho1 * (1.0 - rho1) / (mu1 * mu2)).sqrt();
    Ok(HeavyTraffic { eta: 1.0 / eta_inv, eta_inv, m_pk: 1.0 - rho1 + rho1 * mu2 / mu1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alpha_star_values() {
        assert!(close(alpha_star(1.0 / 3.0).unwrap(), 0.5, 1e-15));
        assert!(close(alpha_star(0.5).unwrap(), 1.0, 1e-15));
        assert!(close(alpha_star(0.6).unwrap(), 1.5, 1e-14));
        assert!(alpha_star(1.0).is_err());
        assert!(alpha_star(0.0).is_err());
    }

    #[test]
    fn initial_phase_examples() {
        let c = initial_phase_curve(1.0, 3.0, 1, 0.5);
        assert!(close(c.value, 0.0, 1e-15));
        assert!(!c.in_domain);
        assert!(close(initial_phase_curve(1.0, 3.0, 1, 1e-9).value, 1.0, 1e-8));
        let c = initial_phase_curve(1.0, 4.0, 2, 0.125);
        assert!(close(c.value, 0.6, 1e-15) && c.in_domain);
        // same t₁ from the phase table with ρ₁ = 1/4, J = 2
        let table = PhaseTable::new(&[0.25, 0.3, 0.4]).unwrap();
        assert!(close(table.breakpoints()[0], 0.5, 1e-15));
    }

    #[test]
    fn ou_example() {
        let p = ou_params(1.0, 3.0, 0.5).unwrap();
        assert!(close(p.drift_rate, 4.0 / 3.0, 1e-15));
        assert_eq!(p.diffusion_coeff, 2.0);
        assert!(close(p.stationary_variance, 0.75, 1e-15));
        assert_eq!(p.stationary_variance * 2.0 * p.drift_rate, p.diffusion_coeff);
        assert!(ou_params(1.0, 3.0, 0.8).unwrap().drift_rate < p.drift_rate);
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_curve(1.0, 0.3, 0.5, 1.0);
        assert!(close(g.gamma, 0.8, 1e-15) && close(g.t0, 5.0, 1e-12));
        assert_eq!(gamma_curve(1.0, 0.3, 0.5, g.t0).gamma, 0.0);
        assert!(gamma_curve(1.0, 0.3, 0.5, 5.0).gamma < 1e-15);
        assert_eq!(gamma_curve(1.0, 0.3, 0.5, 7.0).gamma, 0.0);
        let over = gamma_curve(1.0, 0.6, 0.5, 1.0);
        assert!(over.gamma > 1.0 && over.t0.is_infinite());
    }

    #[test]
    fn fluid_case_one() {
        let p = NetworkParams::new(vec![1.0, 0.6], vec![4.0, 1.0]).unwrap();
        // x = 0: ℓ₂ = (1 + (λ₂ − μ₂(1−ρ₁))t)⁺
        for &t in &[0.0, 0.5, 2.0] {
            let (a, b) = fluid_limit(0.0, &p, t).unwrap();
            assert_eq!(a, 0.0);
            assert!(close(b, 1.0 + (0.6 - 0.75) * t, 1e-14));
        }
        // x = 0.2: ℓ₁ empties at t₁ = 2x/(μ₁−2λ₁) = 0.2
        let (a, _) = fluid_limit(0.2, &p, 0.2).unwrap();
        assert!(a.abs() < 1e-14);
        let (a, b) = fluid_limit(0.2, &p, 0.199_999).unwrap();
        assert!(a > 0.0 && close(b, 0.8 + 0.1 * 0.199_999, 1e-14));
        let left = fluid_limit(0.2, &p, 0.2 - 1e-9).unwrap().1;
        let right = fluid_limit(0.2, &p, 0.2 + 1e-9).unwrap().1;
        assert!(close(left, right, 1e-8));
    }

    #[test]
    fn fluid_other_cases() {
        let both_high = NetworkParams::new(vec![0.6, 0.7], vec![1.0, 1.0]).unwrap();
        let (a, b) = fluid_limit(0.3, &both_high, 10.0).unwrap();
        assert!(close(a, 0.3 + 0.1 * 10.0, 1e-12) && close(b, 0.7 + 0.2 * 10.0, 1e-12));
        let both_low = NetworkParams::new(vec![0.2, 0.3], vec![1.0, 1.0]).unwrap();
        // t₁ = 0.5/0.3, t₂ = 0.5/0.2: queue 1 empties first
        let t1 = 0.5 / 0.3;
        let (a, b) = fluid_limit(0.5, &both_low, t1 + 0.2).unwrap();
        assert_eq!(a, 0.0);
        let l2_t1 = 0.5 - 0.2 * t1;
        assert!(close(b, l2_t1 + (0.3 - 0.8) * 0.2, 1e-12));
        assert_eq!(fluid_limit(0.5, &both_low, 100.0).unwrap(), (0.0, 0.0));
        // mirrored branch: queue 2 empties first
        let (a, b) = fluid_limit(0.9, &both_low, 0.1 / 0.2 + 0.1).unwrap();
        assert_eq!(b, 0.0);
        assert!(close(a, 0.9 - 0.3 * 0.5 + (0.2 - 0.7) * 0.1, 1e-12));
        let boundary = NetworkParams::new(vec![0.5, 0.3], vec![1.0, 1.0]).unwrap();
        assert!(matches!(fluid_limit(0.5, &boundary, 1.0), Err(Error::Boundary(_))));
    }

    #[test]
    fn heavy_traffic_constants() {
        let h = heavy_traffic_eta(2.0, 2.0, 0.3).unwrap();
        assert!(close(h.eta_inv, 2.0 / 2f64.sqrt(), 1e-15));
        assert!(close(h.m_pk, 1.0, 1e-15));
        let a = heavy_traffic_eta(1.0, 2.0, 0.3).unwrap();
        let b = heavy_traffic_eta(2.0, 1.0, 0.3).unwrap();
        assert!((a.eta - b.eta).abs() > 1e-3);
        assert!(heavy_traffic_eta(1.0, 1.0, 0.5).is_err());
    }
}
