//! Periodic grids on `[−L/2, L/2)^d`, spectral Sobolev norms, and the soliton-sum fields.
//!
//! The forward transform carries the factor `h^d`, so `v̂(ξ)` approximates the continuous
//! Fourier transform and `‖v‖²_{H^s} = V^{−1} Σ_k (1+|ξ_k|²)^s |v̂_k|²` approximates the
//! integral norm. Nodes sit at `x_j = (j − n/2) h`, which puts the origin on the grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::params::ProblemParams;

/// Margin added to the largest center norm in the torus size requirement.
pub const TAIL_MARGIN: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub d: usize,
    pub n: usize,
    pub l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    H1,
    L2,
    Hm1,
}

impl Norm {
    pub fn exponent(self) -> f64 {
        match self {
            Norm::H1 => 1.0,
            Norm::L2 => 0.0,
            Norm::Hm1 => -1.0,
        }
    }
}

impl TorusGrid {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParams(format!("full grids support d <= 3, got {d}")));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::GridTooSmall(format!("n = {n} must be a power of two >= 64")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParams(format!("side length {l}")));
        }
        Ok(Self { d, n, l })
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    pub fn cell(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.h()
    }

    /// Multi-index of a flat index; the last axis is contiguous.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = self.coordinate(m[a]);
        }
        x
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        let kk = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * PI * kk / self.l
    }

    pub fn xi2(&self, idx: usize) -> f64 {
        let m = self.multi_index(idx);
        (0..self.d).map(|a| self.wavenumber(m[a]).powi(2)).sum()
    }

    /// Minimal-image representative of a displacement component in `[−L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        x - self.l * (x / self.l + 0.5).floor()
    }

    /// Checks `L ≥ 4(max |y_k| + 20)`.
    pub fn check_fits(&self, centers: &[Vec<f64>]) -> Result<()> {
        let reach = centers.iter().map(|y| norm(y)).fold(0.0, f64::max);
        let need = 4.0 * (reach + TAIL_MARGIN);
        if self.l < need {
            return Err(Error::GridTooSmall(format!("L = {} but soliton configuration needs L >= {need}", self.l)));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache");
    guard
        .entry((n, dir == FftDirection::Forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(n, dir))
        .clone()
}

/// In-place unnormalized transform along every axis.
fn fft_nd(data: &mut [Complex64], n: usize, d: usize, dir: FftDirection) {
    let fft = plan(n, dir);
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(n).for_each(|line| fft.process(line));
            continue;
        }
        let block = n * stride;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..stride {
                for k in 0..n {
                    buf[k] = chunk[k * stride + i];
                }
                fft.process(&mut buf);
                for k in 0..n {
                    chunk[k * stride + i] = buf[k];
                }
            }
        });
    }
}

/// Samples on a torus grid. Real fields keep zero imaginary parts.
#[derive(Clone, Debug)]
pub struct TorusField {
    pub grid: TorusGrid,
    pub kind: ScalarKind,
    pub values: Vec<Complex64>,
}

/// Fourier coefficients with the `h^d` normalization.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: TorusGrid,
    pub kind: ScalarKind,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn to_field(&self) -> TorusField {
        let mut values = self.coeffs.clone();
        fft_nd(&mut values, self.grid.n, self.grid.d, FftDirection::Inverse);
        let s = 1.0 / self.grid.volume();
        for v in values.iter_mut() {
            *v *= s;
            if self.kind == ScalarKind::Real {
                v.im = 0.0;
            }
        }
        TorusField { grid: self.grid, kind: self.kind, values }
    }

    /// `Re V^{−1} Σ_k (1+|ξ|²)^s a_k conj(b_k)`.
    pub fn inner(&self, other: &Spectrum, s: f64) -> f64 {
        let g = self.grid;
        self.coeffs
            .par_iter()
            .zip(other.coeffs.par_iter())
            .enumerate()
            .map(|(i, (a, b))| weight(g.xi2(i), s) * (a * b.conj()).re)
            .sum::<f64>()
            / g.volume()
    }

    pub fn norm(&self, which: Norm) -> f64 {
        self.inner(self, which.exponent()).max(0.0).sqrt()
    }

    pub fn apply_multiplier<F: Fn(f64) -> f64 + Sync>(&mut self, m: F) {
        let g = self.grid;
        self.coeffs.par_iter_mut().enumerate().for_each(|(i, c)| *c *= m(g.xi2(i)));
    }
}

fn weight(xi2: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s == 1.0 {
        1.0 + xi2
    } else if s == -1.0 {
        1.0 / (1.0 + xi2)
    } else {
        (1.0 + xi2).powf(s)
    }
}

impl TorusField {
    pub fn zeros(grid: TorusGrid, kind: ScalarKind) -> Self {
        Self { grid, kind, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_real(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParams(format!("{} values for a grid of {}", values.len(), grid.len())));
        }
        Ok(Self { grid, kind: ScalarKind::Real, values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect() })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: TorusGrid, f: F) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                Complex64::new(f(&x[..grid.d]), 0.0)
            })
            .collect();
        Self { grid, kind: ScalarKind::Real, values }
    }

    pub fn from_fn_complex<F: Fn(&[f64]) -> Complex64 + Sync>(grid: TorusGrid, f: F) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                f(&x[..grid.d])
            })
            .collect();
        Self { grid, kind: ScalarKind::Complex, values }
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.kind == ScalarKind::Real
    }

    /// Promotes to the complex kind (values unchanged).
    pub fn into_complex(mut self) -> Self {
        self.kind = ScalarKind::Complex;
        self
    }

    fn joint_kind(&self, other: &Self) -> ScalarKind {
        if self.is_real() && other.is_real() {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        }
    }

    pub fn zip_with<F: Fn(Complex64, Complex64) -> Complex64 + Sync>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.par_iter().zip(other.values.par_iter()).map(|(a, b)| f(*a, *b)).collect();
        Self { grid: self.grid, kind: self.joint_kind(other), values }
    }

    pub fn map<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> Self {
        Self { grid: self.grid, kind: self.kind, values: self.values.par_iter().map(|v| f(*v)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn scale_complex(&self, z: Complex64) -> Self {
        let mut out = self.map(|v| v * z);
        if z.im != 0.0 {
            out.kind = ScalarKind::Complex;
        }
        out
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid, other.grid);
        self.values.par_iter_mut().zip(other.values.par_iter()).for_each(|(x, y)| *x += y * a);
        if !other.is_real() {
            self.kind = ScalarKind::Complex;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn spectrum(&self) -> Spectrum {
        let mut coeffs = self.values.clone();
        fft_nd(&mut coeffs, self.grid.n, self.grid.d, FftDirection::Forward);
        let c = self.grid.cell();
        coeffs.par_iter_mut().for_each(|v| *v *= c);
        Spectrum { grid: self.grid, kind: self.kind, coeffs }
    }

    pub fn norm(&self, which: Norm) -> f64 {
        self.spectrum().norm(which)
    }

    /// Riemann sum `h^d Σ |v|²`.
    pub fn l2_direct(&self) -> f64 {
        (self.grid.cell() * self.values.par_iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Real `H^s` inner product `Re ∫ (1+|ξ|²)^s v̂ conj(ŵ)`.
    pub fn inner(&self, other: &Self, which: Norm) -> f64 {
        self.spectrum().inner(&other.spectrum(), which.exponent())
    }

    /// Real `L²` inner product by direct summation.
    pub fn dot(&self, other: &Self) -> f64 {
        self.grid.cell() * self.values.par_iter().zip(other.values.par_iter()).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
    }

    pub fn apply_multiplier<F: Fn(f64) -> f64 + Sync>(&self, m: F) -> Self {
        let mut s = self.spectrum();
        s.apply_multiplier(m);
        s.to_field()
    }

    pub fn helmholtz_inverse(&self) -> Self {
        self.apply_multiplier(|xi2| 1.0 / (1.0 + xi2))
    }

    /// `(−Δ + 1) v`.
    pub fn helmholtz(&self) -> Self {
        self.apply_multiplier(|xi2| 1.0 + xi2)
    }

    pub fn laplacian(&self) -> Self {
        self.apply_multiplier(|xi2| -xi2)
    }

    /// Removes every Fourier mode with some `|k_a| > n/3` (two-thirds rule).
    pub fn dealiased(&self) -> Self {
        let g = self.grid;
        let cut = g.n / 3;
        let mut s = self.spectrum();
        s.coeffs.par_iter_mut().enumerate().for_each(|(i, c)| {
            let m = g.multi_index(i);
            if (0..g.d).any(|a| {
                let k = if m[a] < g.n / 2 { m[a] } else { g.n - m[a] };
                k > cut
            }) {
                *c = Complex64::new(0.0, 0.0);
            }
        });
        s.to_field()
    }

    /// Largest modulus over the boundary faces (any index equal to 0).
    pub fn boundary_max(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.multi_index(i)[..self.grid.d].contains(&0))
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }
}

/// `|u|^{p−1} u`, with exact integer powers for `p ∈ {2, 3}`.
pub fn odd_power(u: Complex64, p: f64) -> Complex64 {
    if p == 3.0 {
        u * u.norm_sqr()
    } else if p == 2.0 {
        u * u.norm()
    } else {
        let a = u.norm();
        if a == 0.0 {
            u
        } else {
            u * a.powf(p - 1.0)
        }
    }
}

fn real_power(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x.abs()
    } else if p == 3.0 {
        x * x * x
    } else {
        x.signum() * x.abs().powf(p)
    }
}

/// Centers `y_k` and unit phases `z_k` of `σ = Σ z_k Q(· + y_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonConfig {
    pub params: ProblemParams,
    pub centers: Vec<Vec<f64>>,
    pub phases: Vec<Complex64>,
}

impl SolitonConfig {
    pub fn new(params: ProblemParams, centers: Vec<Vec<f64>>, phases: Vec<Complex64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != phases.len() {
            return Err(Error::InvalidParams("need one unit phase per center".into()));
        }
        if centers.iter().any(|y| y.len() != params.d || y.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParams(format!("centers must be finite points of R^{}", params.d)));
        }
        if phases.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidParams("phases must have unit modulus".into()));
        }
        let cfg = Self { params, centers, phases };
        if cfg.centers.len() > 1 && !(cfg.min_separation(None) > 0.0) {
            return Err(Error::DegenerateInput("coincident soliton centers".into()));
        }
        Ok(cfg)
    }

    pub fn real(params: ProblemParams, centers: Vec<Vec<f64>>) -> Result<Self> {
        let m = centers.len();
        Self::new(params, centers, vec![Complex64::new(1.0, 0.0); m])
    }

    /// Two solitons on the first axis with centers `∓R/2`.
    pub fn pair(params: ProblemParams, r: f64) -> Result<Self> {
        let mut a = vec![0.0; params.d];
        let mut b = vec![0.0; params.d];
        a[0] = -r / 2.0;
        b[0] = r / 2.0;
        Self::real(params, vec![a, b])
    }

    pub fn single(params: ProblemParams) -> Self {
        Self::real(params, vec![vec![0.0; params.d]]).expect("valid single soliton")
    }

    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn is_real(&self) -> bool {
        self.phases.iter().all(|z| z.im == 0.0 && z.re == 1.0)
    }

    /// Smallest pairwise center distance, in the minimal-image metric when `side` is given.
    pub fn min_separation(&self, side: Option<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.m() {
            for j in i + 1..self.m() {
                let d2: f64 = self.centers[i]
                    .iter()
                    .zip(&self.centers[j])
                    .map(|(a, b)| {
                        let mut w = a - b;
                        if let Some(l) = side {
                            w -= l * (w / l + 0.5).floor();
                        }
                        w * w
                    })
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }
}

/// Minimal-image vector `x + y` and its length.
fn displacement(grid: &TorusGrid, x: &[f64], y: &[f64]) -> ([f64; 3], f64) {
    let mut w = [0.0; 3];
    for a in 0..grid.d {
        w[a] = grid.wrap(x[a] + y[a]);
    }
    let r = w.iter().map(|c| c * c).sum::<f64>().sqrt();
    (w, r)
}

/// `z Q(|x + y|)`.
pub fn soliton_component(gs: &GroundState, grid: TorusGrid, y: &[f64], z: Complex64) -> TorusField {
    let mut f = TorusField::from_fn(grid, |x| gs.value(displacement(&grid, x, y).1));
    if z != Complex64::new(1.0, 0.0) {
        f = f.scale_complex(z);
    }
    f
}

/// `z ∂_j Q(|x + y|) = z Q'(r) (x + y)_j / r`.
pub fn soliton_gradient(gs: &GroundState, grid: TorusGrid, y: &[f64], z: Complex64, j: usize) -> TorusField {
    let f = TorusField::from_fn(grid, |x| {
        let (w, r) = displacement(&grid, x, y);
        if r == 0.0 {
            0.0
        } else {
            gs.eval(r).1 * w[j] / r
        }
    });
    if z != Complex64::new(1.0, 0.0) {
        f.scale_complex(z)
    } else {
        f
    }
}

pub fn soliton_components(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid) -> Result<Vec<TorusField>> {
    check_setup(gs, cfg, grid)?;
    Ok(cfg.centers.iter().zip(&cfg.phases).map(|(y, z)| soliton_component(gs, grid, y, *z)).collect())
}

fn check_setup(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid) -> Result<()> {
    if gs.params.d != grid.d || cfg.params.d != grid.d || (gs.params.p - cfg.params.p).abs() > 0.0 {
        return Err(Error::InvalidParams("ground state, configuration and grid disagree on (d, p)".into()));
    }
    grid.check_fits(&cfg.centers)
}

/// `σ = Σ z_k Q(|x + y_k|)` with minimal-image distances.
pub fn sample_soliton_sum(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid) -> Result<TorusField> {
    let parts = soliton_components(gs, cfg, grid)?;
    let mut sum = TorusField::zeros(grid, if cfg.is_real() { ScalarKind::Real } else { ScalarKind::Complex });
    for part in &parts {
        sum.axpy(1.0, part);
    }
    Ok(sum)
}

/// `f = (Σ Q_i)^p − Σ Q_i^p`.
pub fn interaction_term_f(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid) -> Result<TorusField> {
    if !cfg.is_real() {
        return Err(Error::InvalidParams("the interaction term f is defined for real configurations".into()));
    }
    let parts = soliton_components(gs, cfg, grid)?;
    let p = cfg.params.p;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (mut s, mut sp) = (0.0, 0.0);
            for q in &parts {
                let v = q.values[i].re;
                s += v;
                sp += real_power(v, p);
            }
            Complex64::new(real_power(s, p) - sp, 0.0)
        })
        .collect();
    Ok(TorusField { grid, kind: ScalarKind::Real, values })
}

/// `h = −Δu + u − |u|^{p−1} u`.
pub fn residual_h(u: &TorusField, p: f64) -> TorusField {
    let lin = u.helmholtz();
    lin.zip_with(u, |a, b| a - odd_power(b, p))
}

/// `Γ(u) = ‖h‖_{H^{−1}}`, computed without leaving frequency space for the linear part.
pub fn gamma(u: &TorusField, p: f64) -> f64 {
    let nl = u.map(|v| odd_power(v, p));
    let mut s = nl.spectrum();
    let su = u.spectrum();
    s.coeffs.par_iter_mut().zip(su.coeffs.par_iter()).enumerate().for_each(|(i, (c, cu))| {
        *c = cu * (1.0 + u.grid.xi2(i)) - *c;
    });
    s.norm(Norm::Hm1)
}

/// `N(ρ) = |σ+ρ|^{p−1}(σ+ρ) − σ^p − pσ^{p−1}ρ` for real `σ`.
pub fn nonlinear_remainder_n(sigma: &TorusField, rho: &TorusField, p: f64) -> TorusField {
    let mut out = sigma.zip_with(rho, |s, r| {
        let s = s.re;
        odd_power(Complex64::new(s, 0.0) + r, p) - real_power(s, p) - r * (p * real_power(s, p - 1.0))
    });
    out.kind = rho.kind;
    out
}

/// Header and metadata written next to a binary snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub scalar_kind: ScalarKind,
    pub byte_order: String,
    pub layout: String,
    #[serde(default)]
    pub label: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `u32 d, u32 n, f64 L, u32 kind, u32 reserved` followed by little-endian doubles
/// (real values, or interleaved real/imaginary pairs), plus a JSON sidecar `<path>.json`.
pub fn write_snapshot(path: &Path, field: &TorusField, label: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = field.grid;
    w.write_u32::<LittleEndian>(g.d as u32)?;
    w.write_u32::<LittleEndian>(g.n as u32)?;
    w.write_f64::<LittleEndian>(g.l)?;
    w.write_u32::<LittleEndian>(if field.is_real() { 0 } else { 1 })?;
    w.write_u32::<LittleEndian>(0)?;
    for v in &field.values {
        w.write_f64::<LittleEndian>(v.re)?;
        if !field.is_real() {
            w.write_f64::<LittleEndian>(v.im)?;
        }
    }
    w.flush()?;
    let meta = SnapshotMeta {
        format: "solstab.field".into(),
        version: 1,
        d: g.d,
        n: g.n,
        l: g.l,
        scalar_kind: field.kind,
        byte_order: "little".into(),
        layout: "row-major, last axis fastest, x_j = (j - n/2) L/n".into(),
        label: label.into(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<TorusField> {
    let mut r = BufReader::new(File::open(path)?);
    let d = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let l = r.read_f64::<LittleEndian>()?;
    let kind = match r.read_u32::<LittleEndian>()? {
        0 => ScalarKind::Real,
        1 => ScalarKind::Complex,
        k => return Err(Error::Format(format!("unknown scalar kind {k}"))),
    };
    let _reserved = r.read_u32::<LittleEndian>()?;
    let grid = TorusGrid::new(d, n, l)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = r.read_f64::<LittleEndian>()?;
        let im = if kind == ScalarKind::Complex { r.read_f64::<LittleEndian>()? } else { 0.0 };
        values.push(Complex64::new(re, im));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes in snapshot", rest.len())));
    }
    Ok(TorusField { grid, kind, values })
}
