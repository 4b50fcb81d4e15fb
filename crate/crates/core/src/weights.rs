//! Weight functions and the capacity allocation they induce.
//!
//! A node holding `x` requests receives the share `f(x) / Σ_k f(x_k)` of the
//! unit-capacity resource, with `0/0 = 0`. The named families are
//!
//! | family        | `f(x)`              |
//! |---------------|---------------------|
//! | `Log`         | `log(1 + x)`        |
//! | `LogLog`      | `log log(e + x)`    |
//! | `LogPow(β)`   | `(log(1 + x))^β`    |
//! | `Power(α)`    | `x^α`               |
//!
//! All of them vanish at zero, so an empty queue is never served.
//!
//! Time-scale computations use the unshifted asymptotic representatives
//! (`log x`, `log log x`, `(log x)^β`) exposed through [`ScalingCompanions`];
//! the shift only changes lower-order terms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Caller-supplied weight rule for [`WeightFunction::Custom`].
pub type WeightRule = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum WeightFunction {
    Log,
    LogLog,
    LogPow { beta: f64 },
    Power { alpha: f64 },
    Custom { name: String, rule: WeightRule },
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Log => write!(f, "Log"),
            WeightFunction::LogLog => write!(f, "LogLog"),
            WeightFunction::LogPow { beta } => write!(f, "LogPow {{ beta: {beta} }}"),
            WeightFunction::Power { alpha } => write!(f, "Power {{ alpha: {alpha} }}"),
            WeightFunction::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Points on which custom rules are spot-checked for monotonicity.
const CUSTOM_CHECK_GRID: [f64; 12] = [
    0.0, 1.0, 2.0, 5.0, 10.0, 100.0, 1e3, 1e4, 1e6, 1e9, 1e12, 1e15,
];

impl WeightFunction {
    pub fn log_pow(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidWeight(format!("LogPow needs beta > 0, got {beta}")));
        }
        Ok(WeightFunction::LogPow { beta })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidWeight(format!("Power needs alpha > 0, got {alpha}")));
        }
        Ok(WeightFunction::Power { alpha })
    }

    /// Wraps a caller rule, checking on a sample grid that it is finite,
    /// nonnegative, nondecreasing and growing.
    pub fn custom<F>(name: impl Into<String>, rule: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        let mut prev = f64::NEG_INFINITY;
        for &x in &CUSTOM_CHECK_GRID {
            let y = rule(x);
            if !y.is_finite() || y < 0.0 {
                return Err(Error::InvalidWeight(format!("{name}: f({x}) = {y}")));
            }
            if y < prev {
                return Err(Error::InvalidWeight(format!("{name}: decreasing near x = {x}")));
            }
            prev = y;
        }
        if rule(CUSTOM_CHECK_GRID[CUSTOM_CHECK_GRID.len() - 1]) <= rule(1.0) {
            return Err(Error::InvalidWeight(format!("{name}: does not grow on the check grid")));
        }
        Ok(WeightFunction::Custom { name, rule: Arc::new(rule) })
    }

    pub fn family_name(&self) -> String {
        match self {
            WeightFunction::Log => "log".into(),
            WeightFunction::LogLog => "loglog".into(),
            WeightFunction::LogPow { beta } => format!("logpow(beta={beta})"),
            WeightFunction::Power { alpha } => format!("power(alpha={alpha})"),
            WeightFunction::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// `f(x)` for a queue length.
    #[inline]
    pub fn eval(&self, x: u64) -> Result<f64> {
        self.eval_real(x as f64)
    }

    /// `f` on the continuous relaxation `x ≥ 0`.
    #[inline]
    pub fn eval_real(&self, x: f64) -> Result<f64> {
        match self {
            WeightFunction::Log => Ok(x.ln_1p()),
            WeightFunction::LogLog => Ok((std::f64::consts::E + x).ln().ln()),
            WeightFunction::LogPow { beta } => Ok(x.ln_1p().powf(*beta)),
            WeightFunction::Power { alpha } => Ok(x.powf(*alpha)),
            WeightFunction::Custom { name, rule } => {
                let y = rule(x);
                if y.is_finite() && y >= 0.0 {
                    Ok(y)
                } else {
                    Err(Error::InvalidWeight(format!("{name}: f({x}) = {y}")))
                }
            }
        }
    }

    /// Continuous inverse `f^{-1}(y)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!("weight inverse needs finite y >= 0, got {y}")));
        }
        match self {
            WeightFunction::Log => Ok(y.exp_m1()),
            WeightFunction::LogLog => Ok(y.exp().exp() - std::f64::consts::E),
            WeightFunction::LogPow { beta } => Ok(y.powf(1.0 / beta).exp_m1()),
            WeightFunction::Power { alpha } => Ok(y.powf(1.0 / alpha)),
            WeightFunction::Custom { .. } => self.bracket_inverse(y),
        }
    }

    fn bracket_inverse(&self, y: f64) -> Result<f64> {
        let non_monotone =
            |at: f64| Error::InvalidWeight(format!("{}: not monotone near x = {at}", self.family_name()));
        let mut lo = 0.0;
        let mut f_lo = self.eval_real(lo)?;
        if f_lo >= y {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        let mut f_hi = self.eval_real(hi)?;
        while f_hi < y {
            if f_hi < f_lo {
                return Err(non_monotone(hi));
            }
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::InvalidWeight(format!(
                    "{}: value {y} not reached, rule looks bounded",
                    self.family_name()
                )));
            }
            f_hi = self.eval_real(hi)?;
        }
        while hi - lo > 1e-12 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = self.eval_real(mid)?;
            if f_mid < f_lo || f_mid > f_hi {
                return Err(non_monotone(mid));
            }
            if f_mid < y {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Capacity shares `f(x_i)/Σ f(x_k)`; zero vector for the empty state.
    pub fn allocation_vector(&self, state: &[u64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.len()];
        self.allocation_into(state, &mut out)?;
        Ok(out)
    }

    /// Same as [`allocation_vector`](Self::allocation_vector) into a caller buffer.
    ///
    /// The last entry carrying positive weight is set to one minus the others,
    /// so a nonempty state yields shares summing to exactly one.
    pub fn allocation_into(&self, state: &[u64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(state.len(), out.len());
        let mut total = 0.0;
        for (slot, &x) in out.iter_mut().zip(state) {
            let w = self.eval(x)?;
            *slot = w;
            total += w;
        }
        if total <= 0.0 {
            out.iter_mut().for_each(|w| *w = 0.0);
            return Ok(());
        }
        let last = out.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        let mut acc = 0.0;
        for (i, w) in out.iter_mut().enumerate() {
            if i == last {
                continue;
            }
            *w /= total;
            acc += *w;
        }
        out[last] = (1.0 - acc).max(0.0);
        Ok(())
    }

    /// The `(A_f, B_f)` pair and the unshifted representative used by the
    /// general time scales. Only the log-type named families have them.
    pub fn companions(&self) -> Result<ScalingCompanions> {
        match self {
            WeightFunction::Log => Ok(ScalingCompanions { kind: CompanionKind::Log }),
            WeightFunction::LogLog => Ok(ScalingCompanions { kind: CompanionKind::LogLog }),
            WeightFunction::LogPow { beta } => {
                Ok(ScalingCompanions { kind: CompanionKind::LogPow(*beta) })
            }
            _ => Err(Error::UnsupportedFamily(self.family_name())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CompanionKind {
    Log,
    LogLog,
    LogPow(f64),
}

/// Scaling companions `A_f`, `B_f` with
/// `(f(zx) − f(x)) / A_f(x) → B_f(z)` as `x → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCompanions {
    kind: CompanionKind,
}

impl ScalingCompanions {
    /// Unshifted asymptotic representative of `f` (`log x`, `log log x`, `(log x)^β`).
    pub fn representative(&self, x: f64) -> f64 {
        match self.kind {
            CompanionKind::Log => x.ln(),
            CompanionKind::LogLog => x.ln().ln(),
            CompanionKind::LogPow(beta) => x.ln().powf(beta),
        }
    }

    pub fn representative_inverse(&self, y: f64) -> f64 {
        match self.kind {
            CompanionKind::Log => y.exp(),
            CompanionKind::LogLog => y.exp().exp(),
            CompanionKind::LogPow(beta) => y.powf(1.0 / beta).exp(),
        }
    }

    pub fn a_f(&self, x: f64) -> f64 {
        match self.kind {
            CompanionKind::Log => 1.0,
            CompanionKind::LogLog => 1.0 / x.ln(),
            CompanionKind::LogPow(beta) => 1.0 / (beta * x.ln().powf(beta - 1.0)),
        }
    }

    /// `B_f(z)`; `log z` for every family with companions.
    pub fn b_f(&self, z: f64) -> f64 {
        z.ln()
    }
}

/// Weight family as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub family: WeightFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    Log,
    Loglog,
    Logpow,
    Power,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { family: WeightFamily::Log, beta: None, alpha: None }
    }
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightFunction> {
        match self.family {
            WeightFamily::Log => Ok(WeightFunction::Log),
            WeightFamily::Loglog => Ok(WeightFunction::LogLog),
            WeightFamily::Logpow => WeightFunction::log_pow(self.beta.unwrap_or(1.0)),
            WeightFamily::Power => WeightFunction::power(self.alpha.unwrap_or(1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn log_values() {
        let f = WeightFunction::Log;
        assert_eq!(f.eval(0).unwrap(), 0.0);
        assert!(close(f.eval(1).unwrap(), std::f64::consts::LN_2, 1e-15));
        assert!(close(f.inverse(std::f64::consts::LN_2).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn all_named_families_vanish_at_zero() {
        for f in [
            WeightFunction::Log,
            WeightFunction::LogLog,
            WeightFunction::log_pow(2.5).unwrap(),
            WeightFunction::power(0.5).unwrap(),
        ] {
            assert_eq!(f.eval(0).unwrap(), 0.0, "{f:?}");
        }
    }

    #[test]
    fn power_one_is_identity() {
        let f = WeightFunction::power(1.0).unwrap();
        assert_eq!(f.eval(7).unwrap(), 7.0);
        let f2 = WeightFunction::power(2.0).unwrap();
        assert!(close(f2.inverse(9.0).unwrap(), 3.0, 1e-15));
    }

    #[test]
    fn loglog_inverse_matches_root_finder() {
        // bisection on log log(e + x) = 1, independent of the closed form
        let g = |x: f64| (std::f64::consts::E + x).ln().ln() - 1.0;
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let expected = 0.5 * (lo + hi);
        let got = WeightFunction::LogLog.inverse(1.0).unwrap();
        assert!(close(got, expected, 1e-12));
        // e^e − e; the often quoted 12.4240 is off in the third decimal
        assert!((got - 12.435_98).abs() < 1e-5);
    }

    #[test]
    fn custom_inverse_bracketing() {
        let f = WeightFunction::custom("sqrt", |x: f64| x.sqrt()).unwrap();
        assert!(close(f.inverse(4.0).unwrap(), 16.0, 1e-11));
        assert_eq!(f.inverse(0.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_rejects_bad_rules() {
        assert!(WeightFunction::custom("neg", |x: f64| -x).is_err());
        assert!(WeightFunction::custom("nan", |_| f64::NAN).is_err());
        assert!(WeightFunction::custom("flat", |_| 1.0).is_err());
        assert!(WeightFunction::custom("wiggle", |x: f64| (x.sin() + 1.0) * x).is_err());
    }

    #[test]
    fn custom_non_monotone_detected_in_inverse() {
        // monotone on the check grid, dips between 10 and 100
        let f = WeightFunction::custom("dip", |x: f64| {
            if x > 12.0 && x < 60.0 {
                0.5
            } else {
                x.ln_1p()
            }
        })
        .unwrap();
        assert!(matches!(f.inverse(3.0), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn custom_eval_reports_invalid_values() {
        let f = WeightFunction::Custom {
            name: "raw".into(),
            rule: Arc::new(|x: f64| if x > 5.0 { f64::INFINITY } else { x }),
        };
        assert!(f.eval(3).is_ok());
        assert!(matches!(f.eval(6), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn allocation_examples() {
        let f = WeightFunction::Log;
        let a = f.allocation_vector(&[3, 1]).unwrap();
        assert!(close(a[0], 2.0 / 3.0, 1e-15));
        assert!(close(a[1], 1.0 / 3.0, 1e-15));
        assert_eq!(f.allocation_vector(&[0, 5]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(f.allocation_vector(&[0, 0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(f.allocation_vector(&[4, 0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn companions_by_family() {
        assert!(WeightFunction::power(1.0).unwrap().companions().is_err());
        assert!(WeightFunction::custom("c", |x: f64| x.ln_1p()).unwrap().companions().is_err());
        let log = WeightFunction::Log.companions().unwrap();
        assert_eq!(log.a_f(1e6), 1.0);
        let ll = WeightFunction::LogLog.companions().unwrap();
        assert!(close(ll.a_f(1e6), 1.0 / 1e6f64.ln(), 1e-15));
        let lp = WeightFunction::log_pow(2.0).unwrap().companions().unwrap();
        assert!(close(lp.a_f(1e6), 1.0 / (2.0 * 1e6f64.ln()), 1e-15));
        assert!(close(lp.b_f(3.0), 3f64.ln(), 1e-15));
    }

    #[test]
    fn companion_limit_holds_numerically() {
        // (f(zx) − f(x)) / A_f(x) → log z on the representatives
        for f in [
            WeightFunction::Log,
            WeightFunction::LogLog,
            WeightFunction::log_pow(1.0).unwrap(),
        ] {
            let c = f.companions().unwrap();
            let z: f64 = 3.0;
            let x = 1e200;
            let ratio = (c.representative(z * x) - c.representative(x)) / c.a_f(x);
            assert!((ratio - z.ln()).abs() < 0.01, "{f:?}: {ratio}");
        }
    }

    #[test]
    fn logpow_companion_is_reciprocal_of_increment_scale() {
        // For β ≠ 1 the increment (log zx)^β − (log x)^β grows like
        // β (log x)^{β−1} log z, which is 1/A_f(x), not A_f(x).
        let beta = 2.0;
        let c = WeightFunction::log_pow(beta).unwrap().companions().unwrap();
        let (z, x): (f64, f64) = (3.0, 1e200);
        let incr = c.representative(z * x) - c.representative(x);
        assert!((incr * c.a_f(x) - z.ln()).abs() < 0.01);
        let scale = incr / c.a_f(x) / z.ln();
        assert!((scale / (beta * x.ln().powf(beta - 1.0)).powi(2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn f1_ratio_decays_for_log_types_and_not_for_power() {
        let xs = [1e6, 1e9, 1e12];
        for f in [WeightFunction::Log, WeightFunction::LogLog, WeightFunction::log_pow(2.0).unwrap()] {
            let r: Vec<f64> = xs
                .iter()
                .map(|&x| f.inverse(0.5 * f.eval_real(x).unwrap()).unwrap() / x)
                .collect();
            assert!(r[0] > r[1] && r[1] > r[2], "{f:?}: {r:?}");
            assert!(r[2] < 1e-3, "{f:?}: {r:?}");
            // above t = 1 the ratio diverges instead
            let r2: Vec<f64> = xs
                .iter()
                .map(|&x| f.inverse(2.0 * f.eval_real(x).unwrap()).unwrap() / x)
                .collect();
            assert!(r2[0] < r2[1] && r2[1] < r2[2], "{f:?}: {r2:?}");
        }
        let p = WeightFunction::power(2.0).unwrap();
        for t in [0.5, 2.0] {
            for &x in &xs {
                let r = p.inverse(t * p.eval_real(x).unwrap()).unwrap() / x;
                assert!(close(r, f64::sqrt(t), 1e-9));
            }
        }
    }

    #[test]
    fn weight_spec_builds() {
        let spec: WeightSpec = serde_json::from_str(r#"{"family":"logpow","beta":2.0}"#).unwrap();
        assert!(matches!(spec.build().unwrap(), WeightFunction::LogPow { beta } if beta == 2.0));
        let bad: WeightSpec = serde_json::from_str(r#"{"family":"power","alpha":-1.0}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
