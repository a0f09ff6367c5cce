//! The tail profile `φ(t) = t^{−(d−1)/2} e^{−t}`, its inverse `ψ`, and the stability
//! modulus `F_{d,p}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ProblemParams;

pub const DEFAULT_DOMAIN_FLOOR: f64 = 1e-3;

/// `φ` and `ψ` in dimension `d`, with `ψ` admitted on `(0, φ(domain_floor)]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhiPsi {
    pub d: usize,
    pub domain_floor: f64,
}

impl PhiPsi {
    pub fn new(d: usize) -> Self {
        Self { d, domain_floor: DEFAULT_DOMAIN_FLOOR }
    }

    fn k(&self) -> f64 {
        (self.d as f64 - 1.0) / 2.0
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.log_phi(t).exp()
    }

    pub fn log_phi(&self, t: f64) -> f64 {
        -self.k() * t.ln() - t
    }

    /// Largest admitted argument of `ψ`, namely `φ(domain_floor)`.
    pub fn s_max(&self) -> f64 {
        self.phi(self.domain_floor)
    }

    pub fn psi(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::OutOfRange { value: s, range: format!("(0, {:e}]", self.s_max()) });
        }
        self.psi_log(s.ln())
    }

    /// `ψ` from `ln s`, for arguments below the floating-point range.
    pub fn psi_log(&self, ln_s: f64) -> Result<f64> {
        let floor = self.domain_floor;
        let l = -ln_s;
        let k = self.k();
        let g = |u: f64| u.exp() + k * u - l;
        let u_lo = floor.ln();
        if !(ln_s.is_finite()) || g(u_lo) > 1e-15 * l.abs().max(1.0) {
            return Err(Error::OutOfRange { value: ln_s.exp(), range: format!("(0, {:e}]", self.s_max()) });
        }
        if k == 0.0 {
            return Ok(l.max(floor));
        }
        let (mut lo, mut hi) = (u_lo, (l.max(1.0) + 1.0).ln());
        let mut u = (l + k * l.max(1.0).ln()).max(floor).ln().clamp(lo, hi);
        for _ in 0..200 {
            let gu = g(u);
            if gu > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let newton = u - gu / (u.exp() + k);
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - u).abs() <= 1e-16 * u.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                return Ok(next.exp());
            }
            u = next;
        }
        Err(Error::NonConvergence { what: "psi inversion", iterations: 200 })
    }
}

pub fn phi(d: usize, t: f64) -> f64 {
    PhiPsi::new(d).phi(t)
}

pub fn psi(d: usize, s: f64) -> Result<f64> {
    PhiPsi::new(d).psi(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Linear,
    LogD1,
    PsiD2,
    PsiD3,
    Subquadratic,
}

impl Branch {
    pub fn for_params(d: usize, p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::OutOfRange { value: p, range: "p > 1".into() });
        }
        if p > 2.0 {
            return Ok(Branch::Linear);
        }
        if p < 2.0 {
            return Ok(Branch::Subquadratic);
        }
        match d {
            1 => Ok(Branch::LogD1),
            2 => Ok(Branch::PsiD2),
            3 => Ok(Branch::PsiD3),
            4 | 5 => Ok(Branch::Linear),
            _ => Err(Error::OutOfRange { value: d as f64, range: "d <= 5 at p = 2".into() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Branch::Linear => "linear",
            Branch::LogD1 => "log_d1",
            Branch::PsiD2 => "psi_d2",
            Branch::PsiD3 => "psi_d3",
            Branch::Subquadratic => "subquadratic",
        }
    }

    fn uses_psi(&self) -> bool {
        matches!(self, Branch::PsiD2 | Branch::PsiD3 | Branch::Subquadratic)
    }
}

/// `F_{d,p}` with its branch resolved once.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityModulus {
    pub params: ProblemParams,
    pub branch: Branch,
    pub phipsi: PhiPsi,
}

impl StabilityModulus {
    pub fn new(params: ProblemParams) -> Result<Self> {
        Ok(Self { params, branch: Branch::for_params(params.d, params.p)?, phipsi: PhiPsi::new(params.d) })
    }

    /// Upper end `s₀` of the interval `(0, s₀)` on which `F` is evaluated and increasing.
    pub fn monotone_limit(&self) -> f64 {
        if self.branch.uses_psi() {
            self.phipsi.s_max()
        } else {
            f64::INFINITY
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        if !(s > 0.0) {
            return Err(Error::OutOfRange { value: s, range: "s >= 0".into() });
        }
        match self.branch {
            Branch::Linear => Ok(s),
            Branch::LogD1 => Ok((s.ln().abs() + 1.0).sqrt() * s),
            _ => Ok(self.log_eval(s.ln())?.exp()),
        }
    }

    /// `ln F(s)` from `ln s`.
    pub fn log_eval(&self, ln_s: f64) -> Result<f64> {
        let p = self.params.p;
        let d = self.params.d as f64;
        Ok(match self.branch {
            Branch::Linear => ln_s,
            Branch::LogD1 => 0.5 * (ln_s.abs() + 1.0).ln() + ln_s,
            Branch::PsiD2 => {
                let t = self.phipsi.psi_log(ln_s)?;
                -0.25 * t.ln() - t
            }
            Branch::PsiD3 => {
                let t = self.phipsi.psi_log(ln_s)?;
                -t.ln() - t + 0.5 * (t + 2.0).ln().ln()
            }
            Branch::Subquadratic => {
                let t = self.phipsi.psi_log(ln_s)?;
                (0.25 - 0.5 * p) * (d - 1.0) * t.ln() - 0.5 * p * t
            }
        })
    }
}

pub fn stability_modulus(params: ProblemParams, s: f64) -> Result<f64> {
    StabilityModulus::new(params)?.eval(s)
}
