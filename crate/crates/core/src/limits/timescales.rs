//! Time scales `φ_N(t) = f⁻¹(t f(N))` and `ψ_N = φ_N(α*) f(N)/A_f(φ_N(α*))`.
//!
//! Both are evaluated on the family representatives `log x`, `log log x`
//! and `(log x)^β`, whose closed forms are `N^t`, `exp((log N)^t)` and
//! `N^{t^{1/β}}`. The shifted weights used by the simulator change these
//! only by lower-order terms.

use crate::error::{Error, Result};
use crate::weights::{ScalingCompanions, WeightFunction};

#[derive(Debug, Clone)]
pub struct TimeScales {
    companions: ScalingCompanions,
    f_n: f64,
    pub n: f64,
    pub alpha_star: f64,
    pub psi_n: f64,
}

impl TimeScales {
    /// `φ_N(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        self.companions.representative_inverse(t * self.f_n)
    }

    pub fn companions(&self) -> &ScalingCompanions {
        &self.companions
    }
}

pub fn general_time_scales(f: &WeightFunction, n: f64, alpha_star: f64) -> Result<TimeScales> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::Domain(format!("N must exceed 1, got {n}")));
    }
    if !(alpha_star > 0.0) {
        return Err(Error::Domain(format!("alpha_star must be positive, got {alpha_star}")));
    }
    let companions = f.companions()?;
    let f_n = companions.representative(n);
    let center = companions.representative_inverse(alpha_star * f_n);
    let psi_n = center * f_n / companions.a_f(center);
    Ok(TimeScales { companions, f_n, n, alpha_star, psi_n })
}
