//! Intermolecular potential of the upper layer and its rescalings.
//!
//! In rescaled form the potential derivative is
//! `φ'_ε(h) = (1/ε)[(ε/h)^{n+1} − (ε/h)^{ℓ+1}] = (1/ε) Φ'(h/ε)` with
//! `Φ(v) = −v^{−n}/n + v^{−ℓ}/ℓ`. The additive constant of `Φ` is fixed by
//! `Φ(∞) = 0`, so `Φ(1) = 1/ℓ − 1/n` (= −3/8 for the default `(2, 8)`).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exponents and film thickness of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub n: u32,
    pub ell: u32,
    pub epsilon: f64,
}

impl PotentialSpec {
    pub fn new(n: u32, ell: u32, epsilon: f64) -> Result<Self> {
        if n < 1 || ell <= n {
            return Err(Error::Validation(format!(
                "potential exponents must satisfy ell > n >= 1, got (n, ell) = ({n}, {ell})"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(PotentialSpec { n, ell, epsilon })
    }

    /// The `(2, 8)` potential used throughout.
    pub fn standard(epsilon: f64) -> Result<Self> {
        Self::new(2, 8, epsilon)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(self.n, self.ell, epsilon)
    }

    /// `Φ(v)`, normalized so that `Φ(v) → 0` as `v → ∞`.
    pub fn big_phi(&self, v: f64) -> Result<f64> {
        check_positive(v, "v")?;
        Ok(self.big_phi_raw(v))
    }

    /// `Φ'(v) = v^{−n−1} − v^{−ℓ−1}`.
    pub fn big_phi_prime(&self, v: f64) -> Result<f64> {
        check_positive(v, "v")?;
        Ok(self.big_phi_prime_raw(v))
    }

    /// `φ'_ε(h)`.
    pub fn phi_prime_eps(&self, h: f64) -> Result<f64> {
        check_positive(h, "h")?;
        Ok(self.phi_prime_eps_raw(h))
    }

    /// `φ_ε(h) = Φ(h/ε)`, the antiderivative of `φ'_ε` vanishing at infinity.
    pub fn phi_eps(&self, h: f64) -> Result<f64> {
        check_positive(h, "h")?;
        Ok(self.big_phi_raw(h / self.epsilon))
    }

    /// Shifted potential `W_ε(h) = (Φ(h/ε) − Φ(1)) / |Φ(1)|`, nonnegative with
    /// its only zero at `h = ε`.
    pub fn w_eps(&self, h: f64) -> Result<f64> {
        check_positive(h, "h")?;
        Ok(self.w_eps_raw(h))
    }

    /// `Φ(1)`.
    pub fn phi_at_one(&self) -> f64 {
        1.0 / self.ell as f64 - 1.0 / self.n as f64
    }

    /// `|Φ(1)|`, the depth of the potential well.
    pub fn abs_phi1(&self) -> f64 {
        self.phi_at_one().abs()
    }

    /// True when `h` lies in the steep repulsive region below `ε/100`; values
    /// there are still returned unclamped.
    pub fn is_steep(&self, h: f64) -> bool {
        h < self.epsilon / 100.0
    }

    #[inline]
    pub(crate) fn big_phi_raw(&self, v: f64) -> f64 {
        let n = self.n as i32;
        let l = self.ell as i32;
        -v.powi(-n) / n as f64 + v.powi(-l) / l as f64
    }

    #[inline]
    pub(crate) fn big_phi_prime_raw(&self, v: f64) -> f64 {
        v.powi(-(self.n as i32) - 1) - v.powi(-(self.ell as i32) - 1)
    }

    #[inline]
    pub(crate) fn big_phi_second_raw(&self, v: f64) -> f64 {
        let n = self.n as f64;
        let l = self.ell as f64;
        -(n + 1.0) * v.powi(-(self.n as i32) - 2) + (l + 1.0) * v.powi(-(self.ell as i32) - 2)
    }

    #[inline]
    pub(crate) fn phi_prime_eps_raw(&self, h: f64) -> f64 {
        self.big_phi_prime_raw(h / self.epsilon) / self.epsilon
    }

    /// `φ''_ε(h) = Φ''(h/ε)/ε²`.
    #[inline]
    pub(crate) fn phi_second_eps_raw(&self, h: f64) -> f64 {
        self.big_phi_second_raw(h / self.epsilon) / (self.epsilon * self.epsilon)
    }

    /// `φ'_ε(h + e) − φ'_ε(h)` without cancellation for small `e`.
    pub(crate) fn phi_prime_increment(&self, h: f64, e: f64) -> f64 {
        let v = h / self.epsilon;
        let lp = (e / h).ln_1p();
        let a = self.n as f64 + 1.0;
        let b = self.ell as f64 + 1.0;
        (v.powf(-a) * (-a * lp).exp_m1() - v.powf(-b) * (-b * lp).exp_m1()) / self.epsilon
    }

    #[inline]
    pub(crate) fn w_eps_raw(&self, h: f64) -> f64 {
        let phi1 = self.phi_at_one();
        (self.big_phi_raw(h / self.epsilon) - phi1) / phi1.abs()
    }

    /// `Φ(v) − Φ(w) − Φ'(w)(v − w)` evaluated without cancellation when `v ≈ w`.
    pub(crate) fn taylor_remainder(&self, v: f64, w: f64) -> f64 {
        let d = (v - w) / w;
        let n = self.n as i32;
        let l = self.ell as i32;
        -w.powi(-n) * power_remainder(self.n as f64, d) / n as f64
            + w.powi(-l) * power_remainder(self.ell as f64, d) / l as f64
    }
}

/// `(1 + d)^{−p} − 1 + p d`, by series for small `|d|`.
fn power_remainder(p: f64, d: f64) -> f64 {
    if d.abs() > 0.05 {
        return (1.0 + d).powf(-p) - 1.0 + p * d;
    }
    // binom(-p, j) d^j for j >= 2
    let mut term = p * (p + 1.0) / 2.0 * d * d;
    let mut sum = term;
    let mut j = 2.0;
    while term.abs() > 1e-18 * sum.abs() && j < 200.0 {
        term *= -(p + j) / (j + 1.0) * d;
        sum += term;
        j += 1.0;
    }
    sum
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}
