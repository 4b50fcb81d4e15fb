use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightFunction;

use super::timescales::general_time_scales;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalEqView {
    /// `x / φ_N(α*)`.
    Level,
    /// `(x − φ_N(α*)) / √ψ_N`.
    Fluctuation,
}

/// A time change together with a per-component space normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScalingLens {
    /// Raw time `N^t`, space divided by `N^t`.
    PowerTime { n: f64 },
    /// Raw time `ψ_N t` around the level `φ_N(α*)`.
    LocalEq { n: f64, alpha_star: f64, psi_n: f64, center: f64, view: LocalEqView },
    /// Raw time `N t`; the last coordinate is divided by `N`, the others by `N^α*`.
    Fluid { n: f64, alpha_star: f64 },
}

impl ScalingLens {
    pub fn power_time(n: f64) -> Result<Self> {
        if !(n > 1.0 && n.is_finite()) {
            return Err(Error::Domain(format!("power-time lens needs N > 1, got {n}")));
        }
        Ok(ScalingLens::PowerTime { n })
    }

    pub fn local_eq(f: &WeightFunction, n: f64, alpha_star: f64, view: LocalEqView) -> Result<Self> {
        let s = general_time_scales(f, n, alpha_star)?;
        Ok(ScalingLens::LocalEq { n, alpha_star, psi_n: s.psi_n, center: s.phi(alpha_star), view })
    }

    pub fn fluid(n: f64, alpha_star: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite() && alpha_star >= 0.0) {
            return Err(Error::Domain(format!("fluid lens needs N >= 1, got {n}")));
        }
        Ok(ScalingLens::Fluid { n, alpha_star })
    }

    /// Raw time for scaled time `t`.
    pub fn time_forward(&self, t: f64) -> f64 {
        match *self {
            ScalingLens::PowerTime { n } => n.powf(t),
            ScalingLens::LocalEq { psi_n, .. } => psi_n * t,
            ScalingLens::Fluid { n, .. } => n * t,
        }
    }

    /// Scaled time for raw time `s`.
    pub fn time_inverse(&self, s: f64) -> f64 {
        match *self {
            ScalingLens::PowerTime { n } => s.ln() / n.ln(),
            ScalingLens::LocalEq { psi_n, .. } => s / psi_n,
            ScalingLens::Fluid { n, .. } => s / n,
        }
    }

    /// Scaled value of coordinate `coord` (out of `dim`) holding `x` at scaled time `t`.
    pub fn space(&self, coord: usize, dim: usize, t: f64, x: f64) -> f64 {
        match *self {
            ScalingLens::PowerTime { n } => x / n.powf(t),
            ScalingLens::LocalEq { psi_n, center, view, .. } => match view {
                LocalEqView::Level => x / center,
                LocalEqView::Fluctuation => (x - center) / psi_n.sqrt(),
            },
            ScalingLens::Fluid { n, alpha_star } => {
                if coord + 1 == dim {
                    x / n
                } else {
                    x / n.powf(alpha_star)
                }
            }
        }
    }
}
