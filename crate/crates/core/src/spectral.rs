//! The weighted eigenproblem `(−Δ+1)φ = λ Q^{p−1} φ` restricted to angular sectors, and the
//! coercivity inequality built from its gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{soliton_component, soliton_gradient, Norm, TorusField, TorusGrid};
use crate::groundstate::GroundState;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub h: f64,
    pub r_max: f64,
    /// Largest `|φ|` over the outer tenth of `[0, r_max]`, relative to `max |φ|`.
    pub boundary_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { h: 0.005, r_max: 40.0, boundary_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub d: usize,
    pub p: f64,
    pub sector: usize,
    /// Cell centres `(i + 1/2) h`.
    pub r: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Radial profiles on `r`, normalized to `∫ Q^{p−1} φ² r^{d−1} dr = 1`, largest entry positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Within this sector, the first eigenvalue above the structural ones, minus `p`.
    pub kappa_estimate: Option<f64>,
}

/// Symmetric tridiagonal pencil `K − λM` with diagonal `M`.
struct Pencil {
    diag: Vec<f64>,
    off: Vec<f64>,
    mass: Vec<f64>,
}

impl Pencil {
    fn build(gs: &GroundState, ell: usize, opts: &SpectralOptions) -> Self {
        let d = gs.d() as i32;
        let p = gs.p();
        let h = opts.h;
        let n = (opts.r_max / h).round() as usize;
        let c_ell = (ell * (ell + gs.d()).saturating_sub(2)) as f64;
        let w = |r: f64| if d == 1 { 1.0 } else { r.powi(d - 1) };
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let mut mass = vec![0.0; n];
        for i in 0..n {
            let r = (i as f64 + 0.5) * h;
            let (wl, wr) = (w(i as f64 * h), w((i as f64 + 1.0) * h));
            let mut a = (wl + wr) / (h * h);
            if i == 0 {
                // d = 1: even sectors reflect φ, odd sectors antireflect; d ≥ 2 has w(0) = 0.
                a = if d == 1 && ell == 0 { wr / (h * h) } else { (2.0 * wl + wr) / (h * h) };
            }
            diag[i] = a + c_ell * r.powi(d - 3) + w(r);
            if i + 1 < n {
                off[i] = -wr / (h * h);
            }
            mass[i] = w(r) * gs.value(r).powf(p - 1.0);
        }
        Self { diag, off, mass }
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues below `lambda` (Sylvester inertia of `K − λM`).
    fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut piv = 0.0;
        for i in 0..self.len() {
            let a = self.diag[i] - lambda * self.mass[i];
            piv = if i == 0 { a } else { a - self.off[i - 1].powi(2) / piv };
            if piv == 0.0 {
                piv = -f64::EPSILON * a.abs().max(1.0);
            }
            if piv < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.count_below(hi) <= k {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Inverse iteration for the eigenvector of `lambda`.
    fn eigenvector(&self, lambda: f64, h: f64) -> Vec<f64> {
        let n = self.len();
        let sigma = lambda * (1.0 - 1e-10);
        let a: Vec<f64> = (0..n).map(|i| self.diag[i] - sigma * self.mass[i]).collect();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 1e-3).collect();
        for _ in 0..4 {
            let rhs: Vec<f64> = (0..n).map(|i| self.mass[i] * x[i]).collect();
            x = thomas(&a, &self.off, &rhs);
            let nrm = (0..n).map(|i| self.mass[i] * x[i] * x[i]).sum::<f64>() * h;
            let s = nrm.sqrt();
            x.iter_mut().for_each(|v| *v /= s);
        }
        // Fix the sign by the largest component.
        let big = x.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if big < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        x
    }
}

fn thomas(a: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut piv = a[0];
    y[0] = rhs[0] / piv;
    for i in 1..n {
        c[i - 1] = off[i - 1] / piv;
        piv = a[i] - off[i - 1] * c[i - 1];
        y[i] = (rhs[i] - off[i - 1] * y[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    y
}

/// Lowest `n_eigs` eigenpairs of the sector `ℓ` (for `d = 1`: `ℓ = 0` even, `ℓ = 1` odd).
pub fn sector_spectrum(gs: &GroundState, ell: usize, n_eigs: usize, opts: &SpectralOptions) -> Result<SpectrumReport> {
    let d = gs.d();
    if ell > 4 || (d == 1 && ell > 1) {
        return Err(Error::InvalidParams(format!("sector ℓ = {ell} not available in d = {d}")));
    }
    if !(opts.h > 0.0 && opts.r_max > 20.0 * opts.h) || n_eigs == 0 {
        return Err(Error::InvalidParams("need h > 0, r_max ≫ h and at least one eigenvalue".into()));
    }
    let pencil = Pencil::build(gs, ell, opts);
    let n = pencil.len();
    let eigenvalues: Vec<f64> = (0..n_eigs).into_par_iter().map(|k| pencil.eigenvalue(k)).collect();
    let eigenvectors: Vec<Vec<f64>> = eigenvalues.par_iter().map(|&l| pencil.eigenvector(l, opts.h)).collect();
    let tail_start = n - n / 10;
    for (k, v) in eigenvectors.iter().enumerate() {
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let edge = v[tail_start..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if edge > opts.boundary_tol * peak {
            return Err(Error::Discretization(format!(
                "eigenvector {k} of sector {ell} keeps {:.1e} of its peak near r_max = {}",
                edge / peak,
                opts.r_max
            )));
        }
    }
    let skip = if ell <= 1 { 1 } else { 0 };
    let kappa_estimate = eigenvalues.get(skip).map(|l| l - gs.p());
    Ok(SpectrumReport {
        d,
        p: gs.p(),
        sector: ell,
        r: (0..n).map(|i| (i as f64 + 0.5) * opts.h).collect(),
        eigenvalues,
        eigenvectors,
        kappa_estimate,
    })
}

impl SpectrumReport {
    /// `∫ Q^{p−1} φ_i φ_j r^{d−1} dr` recomputed from the stored profiles.
    pub fn b_inner(&self, gs: &GroundState, i: usize, j: usize) -> f64 {
        let h = self.r[1] - self.r[0];
        let k = self.d as i32 - 1;
        self.r
            .iter()
            .enumerate()
            .map(|(n, &r)| r.powi(k) * gs.value(r).powf(self.p - 1.0) * self.eigenvectors[i][n] * self.eigenvectors[j][n])
            .sum::<f64>()
            * h
    }

    /// Cosine similarity of eigenvector `i` with `profile(r)` in `L²(r^{d−1} dr)`.
    pub fn cosine_with<F: Fn(f64) -> f64>(&self, i: usize, profile: F) -> f64 {
        let k = self.d as i32 - 1;
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (n, &r) in self.r.iter().enumerate() {
            let (a, b) = (self.eigenvectors[i][n], profile(r));
            let w = r.powi(k);
            ab += w * a * b;
            aa += w * a * a;
            bb += w * b * b;
        }
        ab / (aa * bb).sqrt()
    }

    pub fn eigenvectors_csv(&self, count: usize) -> String {
        use std::fmt::Write as _;
        let count = count.min(self.eigenvectors.len());
        let mut s = String::from("r");
        for k in 0..count {
            let _ = write!(s, ",phi{k}");
        }
        s.push('\n');
        for (n, r) in self.r.iter().enumerate() {
            let _ = write!(s, "{r}");
            for k in 0..count {
                let _ = write!(s, ",{}", self.eigenvectors[k][n]);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub ground: f64,
    pub translation: f64,
    /// `(sector, eigenvalue)` candidates for `p + κ`.
    pub candidates: Vec<(usize, f64)>,
}

/// `κ` as the smallest eigenvalue above the structural ones over sectors `0..=2`
/// (`0..=1` in one dimension).
pub fn estimate_kappa(gs: &GroundState, opts: &SpectralOptions) -> Result<KappaReport> {
    let sectors: Vec<usize> = if gs.d() == 1 { vec![0, 1] } else { vec![0, 1, 2] };
    let reports: Vec<SpectrumReport> =
        sectors.par_iter().map(|&l| sector_spectrum(gs, l, 2, opts)).collect::<Result<_>>()?;
    let candidates: Vec<(usize, f64)> =
        reports.iter().map(|r| (r.sector, r.eigenvalues[if r.sector <= 1 { 1 } else { 0 }])).collect();
    let next = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    Ok(KappaReport { kappa: next - gs.p(), ground: reports[0].eigenvalues[0], translation: reports[1].eigenvalues[0], candidates })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `margin / ‖u‖²_{H¹}`.
    pub relative_margin: f64,
}

/// Both sides of the coercivity bound for trial fields `u` on a grid centred at the soliton.
pub struct Coercivity {
    q: TorusField,
    weight: Vec<f64>,
    grads: Vec<TorusField>,
    q_norm2: f64,
    grad_norm2: Vec<f64>,
    p: f64,
    kappa: f64,
}

impl Coercivity {
    pub fn new(gs: &GroundState, grid: TorusGrid, kappa: f64) -> Result<Self> {
        if gs.d() != grid.d {
            return Err(Error::InvalidParams("grid and ground state dimensions differ".into()));
        }
        grid.check_fits(&[vec![0.0; grid.d]])?;
        let one = num_complex::Complex64::new(1.0, 0.0);
        let origin = vec![0.0; grid.d];
        let q = soliton_component(gs, grid, &origin, one);
        let p = gs.p();
        let weight: Vec<f64> = q.values.iter().map(|v| v.re.powf(p - 1.0)).collect();
        let grads: Vec<TorusField> = (0..grid.d).map(|j| soliton_gradient(gs, grid, &origin, one, j)).collect();
        let q_norm2 = q.inner(&q, Norm::H1);
        let grad_norm2 = grads.iter().map(|g| g.inner(g, Norm::H1)).collect();
        Ok(Self { q, weight, grads, q_norm2, grad_norm2, p, kappa })
    }

    pub fn check(&self, u: &TorusField) -> CoercivityReport {
        let (p, kappa) = (self.p, self.kappa);
        let lhs = u.inner(u, Norm::H1);
        let cell = u.grid.cell();
        let weighted: f64 = u.values.iter().zip(&self.weight).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() * cell;
        let along_q = u.inner(&self.q, Norm::H1).powi(2) / self.q_norm2;
        let along_grad: f64 =
            self.grads.iter().zip(&self.grad_norm2).map(|(g, n)| u.inner(g, Norm::H1).powi(2) / n).sum();
        let rhs = (p + kappa) * weighted - (p + kappa - 1.0) * along_q - kappa / p * along_grad;
        let margin = lhs - rhs;
        CoercivityReport { lhs, rhs, margin, relative_margin: margin / lhs }
    }
}

/// `coercivity_check` over a batch of trial fields.
pub fn coercivity_check(gs: &GroundState, kappa: f64, trials: &[TorusField]) -> Result<Vec<CoercivityReport>> {
    let Some(first) = trials.first() else { return Ok(Vec::new()) };
    let c = Coercivity::new(gs, first.grid, kappa)?;
    Ok(trials.iter().map(|u| c.check(u)).collect())
}
