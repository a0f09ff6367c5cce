//! Interaction integrals between two ground states a distance `R` apart, evaluated by
//! reducing to two dimensions with the rotational symmetry about the separation axis,
//! and the log-law regressions over `R`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::params::sphere_area;
use crate::quadrature::{integrate, QuadOptions};

/// Fits with an rms residual above this are flagged unreliable.
pub const RMS_FLAG: f64 = 0.05;

const OUTER_TOL: f64 = 1e-11;
const INNER_TOL: f64 = 1e-12;

/// A real number stored as `sign · exp(ln_abs)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

/// Geometry handed to a reduced integrand: `r = |x|`, `t = |x + R e₁|`, `cos θ = x¹/|x|`.
#[derive(Clone, Copy, Debug)]
pub struct Point {
    pub r: f64,
    pub t: f64,
    pub cos: f64,
}

/// `∫_{R^d} F(|x|, |x+Re₁|, x¹/|x|) dx`, or over `x¹ > −R/2` when `half_space` is set.
///
/// `f` must return the integrand already multiplied by `e^{shift}`; the result is
/// `(∫ f, shift)` so that the true value is `e^{−shift} ∫ f`. `decay` is a lower bound
/// on the exponential decay rate of `f` away from the segment `[−Re₁, 0]`.
pub fn reduced_integral<F>(d: usize, sep: f64, half_space: bool, decay: f64, f: F) -> Result<f64>
where
    F: Fn(Point) -> f64 + Sync,
{
    let margin = 45.0 / decay + 10.0;
    let outer = QuadOptions { rel_tol: OUTER_TOL, abs_tol: 0.0, max_intervals: 4000 };
    if d == 1 {
        let lo = if half_space { -0.5 * sep } else { -sep - margin };
        let g = |x: f64| f(Point { r: x.abs(), t: (x + sep).abs(), cos: x.signum() });
        return Ok(integrate(g, lo, margin, &[0.0, -0.5 * sep, -sep], outer)?.value);
    }
    let omega = sphere_area(d - 1);
    let inner_opts = QuadOptions { rel_tol: INNER_TOL, abs_tol: 0.0, max_intervals: 400 };
    let fail = std::sync::Mutex::new(None);
    let radial = |r: f64| -> f64 {
        if r <= 0.0 || fail.lock().unwrap().is_some() {
            return 0.0;
        }
        let a = (sep - r).abs();
        let b = sep + r;
        let lo = if half_space { a.max(r) } else { a };
        let span = b - lo;
        if span <= 0.0 {
            return 0.0;
        }
        let rr2 = 2.0 * sep * r;
        // t = lo + span·sin²(φ/2); sin θ carries a factor cos(φ/2) that cancels dt's.
        let inner = |phi: f64| {
            let (sh, ch) = (0.5 * phi).sin_cos();
            let t = lo + span * sh * sh;
            let sigma = (((lo - a) + span * sh * sh) * span * (t + a) * (b + t)).sqrt() / rr2;
            // t² − r² − R² expanded about a, using a² − r² − R² = −2Rr.
            let u = span * sh * sh;
            let cos = (((lo - a) * (lo + a) + u * (2.0 * lo + u)) / rr2 - 1.0).clamp(-1.0, 1.0);
            let jac = ch.powi(d as i32 - 2) * sigma.powi(d as i32 - 3) * t / (sep * r) * span * sh;
            f(Point { r, t, cos }) * jac
        };
        match integrate(inner, 0.0, std::f64::consts::PI, &[], inner_opts) {
            Ok(v) => v.value * r.powi(d as i32 - 1),
            Err(e) => {
                fail.lock().unwrap().get_or_insert(e);
                0.0
            }
        }
    };
    let upper = sep + margin;
    let v = integrate(radial, 0.0, upper, &[0.5 * sep, sep, 1.0], outer)?;
    if let Some(e) = fail.into_inner().unwrap() {
        return Err(e);
    }
    Ok(omega * v.value)
}

fn check_sep(sep: f64, min: f64) -> Result<()> {
    if sep > min && sep.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { value: sep, range: format!("R > {min}") })
    }
}

fn finish(value: f64, shift: f64) -> Result<SignedLog> {
    if !(value.is_finite() && value != 0.0) {
        return Err(Error::QuadratureFail(format!("integral evaluated to {value:e}")));
    }
    Ok(SignedLog { ln_abs: value.abs().ln() - shift, sign: value.signum() })
}

/// `ln ∫ Q^α(x) Q^β(x + Re₁) dx`.
pub fn overlap_integral(gs: &GroundState, alpha: f64, beta: f64, sep: f64) -> Result<f64> {
    check_sep(sep, 2.0)?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParams(format!("exponents must be positive, got {alpha}, {beta}")));
    }
    let shift = alpha.min(beta) * sep;
    let v = reduced_integral(gs.d(), sep, false, alpha + beta, |pt| {
        (alpha * gs.log_value(pt.r) + beta * gs.log_value(pt.t) + shift).exp()
    })?;
    Ok(finish(v, shift)?.ln_abs)
}

/// `ln ∫ Q²(x) Q²(x + Re₁) dx`.
pub fn square_square_integral(gs: &GroundState, sep: f64) -> Result<f64> {
    check_sep(sep, 2.0)?;
    let shift = 2.0 * sep;
    let v = reduced_integral(gs.d(), sep, false, 4.0, |pt| {
        (2.0 * (gs.log_value(pt.r) + gs.log_value(pt.t)) + shift).exp()
    })?;
    Ok(finish(v, shift)?.ln_abs)
}

/// `ln ∫ |(Q + Q(·+Re₁))^p − Q^p − Q(·+Re₁)^p|² dx` for `1 < p < 2`, as twice the
/// integral over the half space `x¹ > −R/2` nearer the origin.
pub fn subquadratic_cross_norm(gs: &GroundState, sep: f64) -> Result<f64> {
    let p = gs.p();
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::OutOfRange { value: p, range: "1 < p < 2".into() });
    }
    check_sep(sep, 2.0)?;
    let shift = p * sep;
    let v = reduced_integral(gs.d(), sep, true, 2.0 * p, |pt| {
        let lr = gs.log_value(pt.r);
        let x = (gs.log_value(pt.t) - lr).exp();
        let c = (p * x.ln_1p()).exp_m1() - x.powf(p);
        if c <= 0.0 {
            return 0.0;
        }
        (2.0 * p * lr + 2.0 * c.ln() + shift).exp()
    })?;
    Ok(finish(2.0 * v, shift)?.ln_abs)
}

/// First component of `∫ Q^{p−1}(x) ∇Q(x) Q(x + Re₁) dx`.
pub fn gradient_overlap(gs: &GroundState, sep: f64) -> Result<SignedLog> {
    check_sep(sep, 1.0)?;
    let p = gs.p();
    let shift = sep;
    let v = reduced_integral(gs.d(), sep, false, p + 1.0, |pt| {
        let dq = gs.eval(pt.r).1;
        ((p - 1.0) * gs.log_value(pt.r) + gs.log_value(pt.t) + shift).exp() * dq * pt.cos
    })?;
    finish(v, shift)
}

/// `(c_Q/p) ∫ e^{−x¹} Q^p(x) dx`, integrated directly in polar angle.
pub fn c_bar(gs: &GroundState) -> Result<f64> {
    let d = gs.d();
    let p = gs.p();
    let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 0.0, max_intervals: 2000 };
    let upper = 60.0 / (p - 1.0) + 10.0;
    let integral = if d == 1 {
        let g = |x: f64| (p * gs.log_value(x) - x).exp();
        integrate(g, -upper, upper, &[0.0], opts)?.value
    } else {
        let radial = |r: f64| {
            let lq = p * gs.log_value(r);
            let ang = |th: f64| (lq - r * th.cos()).exp() * th.sin().powi(d as i32 - 2);
            let v = integrate(ang, 0.0, std::f64::consts::PI, &[0.5 * std::f64::consts::PI], opts)
                .map(|q| q.value)
                .unwrap_or(f64::NAN);
            v * r.powi(d as i32 - 1)
        };
        sphere_area(d - 1) * integrate(radial, 0.0, upper, &[1.0, 5.0], opts)?.value
    };
    if !integral.is_finite() {
        return Err(Error::QuadratureFail("c̄ angular integral".into()));
    }
    Ok(gs.c_q / p * integral)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InteractionKind {
    Overlap { alpha: f64, beta: f64 },
    SquareSquare,
    Subquadratic,
    Gradient,
}

impl InteractionKind {
    pub fn name(&self) -> &'static str {
        match self {
            InteractionKind::Overlap { .. } => "overlap",
            InteractionKind::SquareSquare => "square-square",
            InteractionKind::Subquadratic => "subquadratic",
            InteractionKind::Gradient => "gradient",
        }
    }

    /// `ln |I(R)|`.
    pub fn eval(&self, gs: &GroundState, sep: f64) -> Result<f64> {
        match *self {
            InteractionKind::Overlap { alpha, beta } => overlap_integral(gs, alpha, beta, sep),
            InteractionKind::SquareSquare => square_square_integral(gs, sep),
            InteractionKind::Subquadratic => subquadratic_cross_norm(gs, sep),
            InteractionKind::Gradient => gradient_overlap(gs, sep).map(|v| v.ln_abs),
        }
    }

    /// Asymptotic law `R^{power} e^{rate·R}` (times `ln R` when the model says so).
    pub fn law(&self, d: usize, p: f64) -> Law {
        let k = (d as f64 - 1.0) / 2.0;
        match *self {
            InteractionKind::Overlap { alpha, beta } => {
                let m = alpha.min(beta);
                Law { rate: -m, power: -m * k, model: FitModel::Plain }
            }
            InteractionKind::SquareSquare => match d {
                1 => Law { rate: -2.0, power: 1.0, model: FitModel::Plain },
                2 => Law { rate: -2.0, power: -0.5, model: FitModel::Plain },
                3 => Law { rate: -2.0, power: -2.0, model: FitModel::LogLog },
                _ => Law { rate: -2.0, power: -(d as f64 - 1.0), model: FitModel::Plain },
            },
            InteractionKind::Subquadratic => Law { rate: -p, power: (0.5 - p) * (d as f64 - 1.0), model: FitModel::Plain },
            InteractionKind::Gradient => Law { rate: -1.0, power: -k, model: FitModel::Plain },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `ln I = rate·R + power·ln R + c`
    Plain,
    /// `ln I = rate·R + power·ln R + ln(ln R + b) + c`, with `b` scanned.
    LogLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Law {
    pub rate: f64,
    pub power: f64,
    pub model: FitModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub r_values: Vec<f64>,
    pub i_values: Vec<f64>,
    /// Slope of `ln I` in `R`; negative for decaying laws.
    pub rate: f64,
    pub power: f64,
    pub log_prefactor: f64,
    pub rms_residual: f64,
    pub model: FitModel,
    /// Constant inside `ln(ln R + b)` for the log-log model.
    pub log_shift: Option<f64>,
    pub unreliable: bool,
}

impl AsymptoticFit {
    pub fn predict(&self, sep: f64) -> f64 {
        let extra = self.log_shift.map_or(0.0, |b| (sep.ln() + b).ln());
        self.rate * sep + self.power * sep.ln() + self.log_prefactor + extra
    }
}

fn lsq(rs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = rs.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => rs[i],
        1 => rs[i].ln(),
        _ => 1.0,
    });
    let y = DVector::from_column_slice(ys);
    let c = a.clone().svd(true, true).solve(&y, 1e-14).expect("svd with both factors");
    let res = &a * &c - &y;
    let rms = (res.norm_squared() / n as f64).sqrt();
    (c[0], c[1], c[2], rms)
}

/// Least-squares fit of `ln I` against `R` and `ln R`.
pub fn fit_law(r_values: &[f64], i_values: &[f64], model: FitModel) -> Result<AsymptoticFit> {
    if r_values.len() != i_values.len() {
        return Err(Error::DegenerateInput("R and I lists differ in length".into()));
    }
    if r_values.len() < 6 {
        return Err(Error::DegenerateInput(format!("need at least 6 samples, got {}", r_values.len())));
    }
    if r_values.windows(2).any(|w| !(w[1] > w[0])) || r_values[0] <= 1.0 {
        return Err(Error::DegenerateInput("R values must be increasing and exceed 1".into()));
    }
    let (rate, power, c, rms, shift) = match model {
        FitModel::Plain => {
            let (a, b, c, rms) = lsq(r_values, i_values);
            (a, b, c, rms, None)
        }
        FitModel::LogLog => {
            let lo = -r_values[0].ln() + 1e-3;
            let eval = |b: f64| {
                let ys: Vec<f64> = r_values.iter().zip(i_values).map(|(r, y)| y - (r.ln() + b).ln()).collect();
                lsq(r_values, &ys)
            };
            let mut best = (f64::INFINITY, lo);
            let grid: Vec<f64> = (0..=400).map(|i| lo + (20.0 - lo) * (i as f64 / 400.0).powi(2)).collect();
            for &b in &grid {
                let rms = eval(b).3;
                if rms < best.0 {
                    best = (rms, b);
                }
            }
            // Golden-section polish around the best grid point.
            let step = (20.0 - lo) / 100.0;
            let (mut x0, mut x1) = ((best.1 - step).max(lo), best.1 + step);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let (m1, m2) = (x1 - g * (x1 - x0), x0 + g * (x1 - x0));
                if eval(m1).3 < eval(m2).3 {
                    x1 = m2;
                } else {
                    x0 = m1;
                }
            }
            let b = 0.5 * (x0 + x1);
            let (a, p, c, rms) = eval(b);
            (a, p, c, rms, Some(b))
        }
    };
    Ok(AsymptoticFit {
        r_values: r_values.to_vec(),
        i_values: i_values.to_vec(),
        rate,
        power,
        log_prefactor: c,
        rms_residual: rms,
        model,
        log_shift: shift,
        unreliable: rms > RMS_FLAG,
    })
}

/// An `R`-sweep of one interaction integral with its fitted law.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scan {
    pub kind: InteractionKind,
    pub d: usize,
    pub p: f64,
    pub law: Law,
    pub fit: AsymptoticFit,
}

impl Scan {
    pub fn rate_error(&self) -> f64 {
        ((self.fit.rate - self.law.rate) / self.law.rate).abs()
    }

    /// Relative error of the fitted power; absolute when the target power is zero.
    pub fn power_error(&self) -> f64 {
        let scale = if self.law.power == 0.0 { 1.0 } else { self.law.power.abs() };
        (self.fit.power - self.law.power).abs() / scale
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("R,log_integral,predicted_log,residual\n");
        for (&r, &y) in self.fit.r_values.iter().zip(&self.fit.i_values) {
            let pred = self.fit.predict(r);
            let _ = writeln!(s, "{r},{y},{pred},{}", y - pred);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "format": "solstab.interaction_fit",
            "version": 1,
            "kind": self.kind,
            "d": self.d,
            "p": self.p,
            "law": self.law,
            "fit": {
                "rate": self.fit.rate,
                "power": self.fit.power,
                "log_prefactor": self.fit.log_prefactor,
                "rms_residual": self.fit.rms_residual,
                "model": self.fit.model,
                "log_shift": self.fit.log_shift,
                "unreliable": self.fit.unreliable,
                "r_min": self.fit.r_values.first(),
                "r_max": self.fit.r_values.last(),
                "samples": self.fit.r_values.len(),
            },
            "rate_error": self.rate_error(),
            "power_error": self.power_error(),
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Evaluates `kind` at every separation in parallel and fits the law for `(d, p)`.
pub fn scan(gs: &GroundState, kind: InteractionKind, r_values: &[f64]) -> Result<Scan> {
    let logs: Vec<f64> = r_values.par_iter().map(|&r| kind.eval(gs, r)).collect::<Result<_>>()?;
    let law = kind.law(gs.d(), gs.p());
    let fit = fit_law(r_values, &logs, law.model)?;
    Ok(Scan { kind, d: gs.d(), p: gs.p(), law, fit })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumPowerBranch {
    /// `1 ≤ p ≤ 2`: compared against pairwise `(a_i+a_j)^p − a_i^p − a_j^p`.
    Pairwise,
    /// `2 < p ≤ 3`
    Moderate,
    /// `p > 3`
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumPowerReport {
    pub branch: SumPowerBranch,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs|/rhs`, zero when `lhs` vanishes.
    pub ratio: f64,
}

/// Both sides of the sum-power estimate applicable to `p`, scaled by `max(a)^p`.
pub fn check_sum_power_inequalities(p: f64, a: &[f64]) -> Result<SumPowerReport> {
    if !(p >= 1.0) || a.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParams("need p ≥ 1 and finite nonnegative entries".into()));
    }
    let m = a.len();
    let (top, big) = a.iter().enumerate().fold((0, 0.0), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    if big == 0.0 {
        let branch = if p <= 2.0 {
            SumPowerBranch::Pairwise
        } else if p <= 3.0 {
            SumPowerBranch::Moderate
        } else {
            SumPowerBranch::Large
        };
        return Ok(SumPowerReport { branch, lhs: 0.0, rhs: 0.0, ratio: 0.0 });
    }
    // With x = a/max(a) and s the sum of the others, (Σx)^p − 1 = expm1(p ln1p s) has no
    // cancellation against the leading term.
    let x: Vec<f64> = a.iter().map(|v| v / big).collect();
    let rest = || (0..m).filter(move |&i| i != top);
    let s: f64 = rest().map(|i| x[i]).sum();
    let head = (p * s.ln_1p()).exp_m1();
    let rest_p: f64 = rest().map(|i| x[i].powf(p)).sum();
    let pairs = || (0..m).flat_map(move |i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)));
    let (branch, lhs, rhs) = if p <= 2.0 {
        let rhs: f64 = pairs().map(|(i, j)| (x[i] + x[j]).powf(p) - x[i].powf(p) - x[j].powf(p)).sum();
        (SumPowerBranch::Pairwise, head - rest_p, rhs)
    } else {
        // The cross terms with the largest entry as base sum to s; the rest are small.
        let cross: f64 = pairs().filter(|&(i, _)| i != top).map(|(i, j)| x[i].powf(p - 1.0) * x[j]).sum();
        let lhs = (head - p * s) - rest_p - p * cross;
        let half: f64 = pairs().map(|(i, j)| (x[i] * x[j]).powf(0.5 * p)).sum();
        if p <= 3.0 {
            let triple: f64 = pairs()
                .flat_map(|(i, j)| (0..m).filter(move |&k| k != i && k != j).map(move |k| (i, j, k)))
                .map(|(i, j, k)| (x[i] * x[j]).powf(0.5 * (p - 1.0)) * x[k])
                .sum();
            (SumPowerBranch::Moderate, lhs, half + triple)
        } else {
            let triple: f64 = pairs()
                .flat_map(|(i, j)| (0..m).filter(move |&k| k != i).map(move |k| (i, j, k)))
                .map(|(i, j, k)| x[i].powf(p - 2.0) * x[j] * x[k])
                .sum();
            (SumPowerBranch::Large, lhs, half + triple)
        }
    };
    let ratio = if lhs == 0.0 { 0.0 } else { lhs.abs() / rhs };
    let scale = big.powf(p);
    Ok(SumPowerReport { branch, lhs: lhs * scale, rhs: rhs * scale, ratio })
}
