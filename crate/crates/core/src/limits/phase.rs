//! Exponents of the `J+1`-node network on the `t ↦ N^t` time scale.
//!
//! Nodes `1..J` start empty and node `J+1` starts at `N`. During phase `k`
//! (between `t_{k−1}` and `t_k`, with `t_0 = 0`) nodes `j < k` sit at local
//! equilibrium with exponent `α_{j,k}(t)`, nodes `k..J` grow like `N^t`, and
//! node `J+1` stays of order `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    rho: Vec<f64>,
    /// `S_k = Σ_{i≤k} ρ_i`, with `partial[0] = 0`.
    partial: Vec<f64>,
    breakpoints: Vec<f64>,
    valid: Vec<bool>,
}

impl PhaseTable {
    /// `rho` holds the `J+1` loads, strictly increasing with sum below 1.
    pub fn new(rho: &[f64]) -> Result<Self> {
        if rho.len() < 2 {
            return Err(Error::Domain("phase table needs at least two nodes".into()));
        }
        if rho.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("loads must be positive".into()));
        }
        if rho.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("loads must be strictly increasing".into()));
        }
        let total: f64 = rho.iter().sum();
        if total >= 1.0 {
            return Err(Error::Domain(format!("total load {total} must be below 1")));
        }
        let j = rho.len() - 1;
        let mut partial = vec![0.0; rho.len() + 1];
        for (k, r) in rho.iter().enumerate() {
            partial[k + 1] = partial[k] + r;
        }
        let mut breakpoints = Vec::with_capacity(j);
        let mut valid = Vec::with_capacity(j);
        for k in 1..=j {
            let rk = rho[k - 1];
            let before = partial[k - 1];
            let denom = 1.0 - before - (j - k + 1) as f64 * rk;
            breakpoints.push(if denom > 0.0 { rk / denom } else { f64::INFINITY });
            valid.push(before + (j - k + 2) as f64 * rk < 1.0);
        }
        Ok(PhaseTable { rho: rho.to_vec(), partial, breakpoints, valid })
    }

    /// `J`, the node count minus one.
    pub fn j(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `t_1, …, t_J`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Whether each `t_k < 1`.
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// `α_{j,k}(t) = ρ_j/(1−Σ_{i<k}ρ_i)·(1+(J−k+1)t)` for `1 ≤ j < k ≤ J+1`.
    pub fn alpha(&self, j: usize, k: usize, t: f64) -> f64 {
        assert!(j >= 1 && j < k && k <= self.j() + 1, "need 1 <= j < k <= J+1");
        self.rho[j - 1] / (1.0 - self.partial[k - 1]) * (1.0 + (self.j() + 1 - k) as f64 * t)
    }

    /// `α_{j,J+1} = ρ_j/(1−Σ_{i≤J}ρ_i)` for `j = 1..J`.
    pub fn final_exponents(&self) -> Vec<f64> {
        (1..=self.j()).map(|j| self.alpha(j, self.j() + 1, 0.0)).collect()
    }

    /// Phase index `k ∈ 1..=J+1` containing `t`.
    pub fn phase_at(&self, t: f64) -> usize {
        1 + self.breakpoints.iter().take_while(|&&b| b <= t).count()
    }

    /// Exponent of node `j ∈ 1..=J+1` at time `t`.
    pub fn exponent(&self, j: usize, t: f64) -> f64 {
        let k = self.phase_at(t);
        if j == self.j() + 1 {
            1.0
        } else if j < k {
            self.alpha(j, k, t)
        } else {
            t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_instance() {
        let p = PhaseTable::new(&[0.1, 0.2, 0.3]).unwrap();
        assert!((p.breakpoints()[0] - 0.125).abs() < 1e-15);
        assert!((p.breakpoints()[1] - 0.2 / 0.7).abs() < 1e-15);
        assert_eq!(p.valid(), &[true, true]);
        let fin = p.final_exponents();
        assert!((fin[0] - 1.0 / 7.0).abs() < 1e-15 && (fin[1] - 2.0 / 7.0).abs() < 1e-15);
        let t2 = p.breakpoints()[1];
        assert!((p.alpha(1, 2, t2) - 1.0 / 7.0).abs() < 1e-15);
        assert!((p.alpha(1, 3, t2) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(p.exponent(3, 0.5), 1.0);
        assert_eq!(p.exponent(2, 0.2), 0.2);
    }

    #[test]
    fn boundary_identity_and_continuity() {
        let p = PhaseTable::new(&[0.05, 0.1, 0.15, 0.2]).unwrap();
        for k in 1..=p.j() {
            let tk = p.breakpoints()[k - 1];
            assert!((p.alpha(k, k + 1, tk) - tk).abs() < 1e-12);
            for j in 1..k {
                assert!((p.alpha(j, k, tk) - p.alpha(j, k + 1, tk)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn j_one_gives_alpha_star() {
        let p = PhaseTable::new(&[0.25, 0.5]).unwrap();
        assert!((p.breakpoints()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.final_exponents()[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_loads() {
        assert!(PhaseTable::new(&[0.2, 0.1]).is_err());
        assert!(PhaseTable::new(&[0.3, 0.7]).is_err());
        assert!(PhaseTable::new(&[0.3]).is_err());
        let late = PhaseTable::new(&[0.2, 0.3, 0.35]).unwrap();
        // t_2 = 0.3/(1 − 0.2 − 0.3) = 0.6 < 1, t_1 = 0.2/0.6 < 1
        assert_eq!(late.valid(), &[true, true]);
        // increasing loads with total below 1 already force every t_k < 1
        let tight = PhaseTable::new(&[0.32, 0.33, 0.34]).unwrap();
        assert_eq!(tight.valid(), &[true, true]);
        assert!(tight.breakpoints().iter().all(|&t| t < 1.0));
    }
}
