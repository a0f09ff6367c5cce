use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper cap on the nonlinearity exponent in dimensions without a critical exponent.
pub const P_CAP: f64 = 16.0;

/// Dimension and nonlinearity exponent of `Δu − u + |u|^{p−1}u = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub d: usize,
    pub p: f64,
}

impl ProblemParams {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParams(format!("exponent p = {p} must exceed 1")));
        }
        match critical_exponent(d) {
            Some(pc) if p >= pc => Err(Error::InvalidParams(format!(
                "p = {p} is not subcritical in d = {d} (needs p < {pc})"
            ))),
            None if p > P_CAP => Err(Error::InvalidParams(format!("p = {p} above cap {P_CAP}"))),
            _ => Ok(Self { d, p }),
        }
    }

    /// `(d − 1)/2`, the algebraic power in the tail `r^{−(d−1)/2} e^{−r}`.
    pub fn tail_power(&self) -> f64 {
        (self.d as f64 - 1.0) / 2.0
    }

    /// Surface area of the unit sphere `S^{d−1}`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }
}

/// `(d+2)/(d−2)` for `d ≥ 3`.
pub fn critical_exponent(d: usize) -> Option<f64> {
    (d >= 3).then(|| (d as f64 + 2.0) / (d as f64 - 2.0))
}

/// Surface area of the unit sphere `S^{n−1} ⊂ R^n`; `sphere_area(1) = 2` counts the two points of `S^0`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^{n-1}| = 2 π^{n/2} / Γ(n/2), via the recursion |S^{n+1}| = 2π/n |S^{n-1}|.
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_area(n - 2),
    }
}
