//! Sharp examples `u = σ + ρ` with `ρ ⊥ F` solving the projected fixed-point equation
//! `ρ = (id − P_{F⊥}K)^{−1} P_{F⊥}(−Δ+1)^{−1}(f + N(ρ))`, `K = p(−Δ+1)^{−1}(σ^{p−1} ·)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decomposition::{FitMode, ModulationBasis};
use crate::error::{Error, Result};
use crate::fields::{gamma, interaction_term_f, nonlinear_remainder_n, sample_soliton_sum, Norm, SolitonConfig, TorusField, TorusGrid};
use crate::groundstate::GroundState;
use crate::special::phi;

/// Default separation floor below which the linear problem is not attempted.
pub const SEPARATION_FLOOR: f64 = 10.0;

/// `v ↦ P_{F⊥}(v − K v)` on `F⊥`.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    pub cfg: SolitonConfig,
    pub grid: TorusGrid,
    pub basis: ModulationBasis,
    pub sigma: TorusField,
    /// `p σ^{p−1}`.
    weight: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub v: TorusField,
    pub iterations: usize,
    /// `‖(id − P_{F⊥}K)v − φ‖_{H¹} / ‖φ‖_{H¹}`.
    pub residual: f64,
    /// `‖v‖_{H¹} / ‖φ‖_{H¹}`.
    pub norm_ratio: f64,
}

fn h1(v: &TorusField) -> f64 {
    v.norm(Norm::H1)
}

impl LinearizedOperator {
    pub fn new(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid, floor: f64) -> Result<Self> {
        if !cfg.is_real() {
            return Err(Error::InvalidParams("sharp examples are built for real configurations".into()));
        }
        if cfg.m() > 1 && cfg.min_separation(None) < floor {
            return Err(Error::OutOfRange { value: cfg.min_separation(None), range: format!("separation >= {floor}") });
        }
        let basis = ModulationBasis::new(gs, cfg, grid, FitMode::Translations)?;
        let sigma = sample_soliton_sum(gs, cfg, grid)?;
        let p = cfg.params.p;
        let weight = sigma.values.iter().map(|s| p * s.re.max(0.0).powf(p - 1.0)).collect();
        Ok(Self { cfg: cfg.clone(), grid, basis, sigma, weight })
    }

    /// `K v = p(−Δ+1)^{−1}(σ^{p−1} v)`.
    pub fn k(&self, v: &TorusField) -> TorusField {
        let mut w = v.clone();
        w.values.iter_mut().zip(&self.weight).for_each(|(x, a)| *x *= *a);
        w.helmholtz_inverse()
    }

    pub fn apply(&self, v: &TorusField) -> TorusField {
        self.basis.project_perp(&v.sub(&self.k(v)))
    }

    /// Solves `(id − P_{F⊥}K)v = φ` by restarted GMRES in the `H¹` inner product.
    pub fn solve(&self, phi: &TorusField, tol: f64) -> Result<LinearSolve> {
        let pn = h1(phi);
        if pn == 0.0 {
            return Ok(LinearSolve { v: phi.scale(0.0), iterations: 0, residual: 0.0, norm_ratio: 0.0 });
        }
        let leak = h1(&self.basis.project(phi).0);
        if leak > 1e-10 * pn {
            return Err(Error::InvalidParams(format!("right-hand side leaves F⊥ by {:.2e}", leak / pn)));
        }
        let (v, iterations, residual) = gmres(|x| self.apply(x), phi, tol, 40, 25)?;
        Ok(LinearSolve { norm_ratio: h1(&v) / pn, v, iterations, residual })
    }
}

/// Restarted GMRES with modified Gram–Schmidt in `H¹`. Returns `(x, matvecs, relative residual)`.
fn gmres<A: Fn(&TorusField) -> TorusField>(
    apply: A,
    b: &TorusField,
    tol: f64,
    restart: usize,
    max_cycles: usize,
) -> Result<(TorusField, usize, f64)> {
    let inner = |a: &TorusField, c: &TorusField| a.inner(c, Norm::H1);
    let bn = h1(b);
    let mut x = b.scale(0.0);
    let mut r = b.clone();
    let mut rel = 1.0;
    let mut matvecs = 0;
    for _ in 0..max_cycles {
        let beta = h1(&r);
        rel = beta / bn;
        if rel <= tol {
            return Ok((x, matvecs, rel));
        }
        let start = rel;
        let mut basis = vec![r.scale(1.0 / beta)];
        let mut hess = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = apply(&basis[k]);
            matvecs += 1;
            for (i, q) in basis.iter().enumerate() {
                let h = inner(&w, q);
                hess[(i, k)] = h;
                w.axpy(-h, q);
            }
            let wn = h1(&w);
            hess[(k + 1, k)] = wn;
            k_used = k + 1;
            let est = least_squares_residual(&hess, k_used, beta) / bn;
            if est <= tol * 0.5 || wn <= 1e-14 * beta {
                break;
            }
            basis.push(w.scale(1.0 / wn));
        }
        let y = least_squares(&hess, k_used, beta);
        for (q, c) in basis.iter().zip(y.iter()) {
            x.axpy(*c, q);
        }
        r = b.sub(&apply(&x));
        matvecs += 1;
        rel = h1(&r) / bn;
        if rel <= tol {
            return Ok((x, matvecs, rel));
        }
        if rel > 0.5 * start {
            return Err(Error::SolverStalled { residual: rel, target: tol });
        }
    }
    Err(Error::SolverStalled { residual: rel, target: tol })
}

fn least_squares(hess: &DMatrix<f64>, k: usize, beta: f64) -> DVector<f64> {
    let h = hess.view((0, 0), (k + 1, k)).clone_owned();
    let mut rhs = DVector::zeros(k + 1);
    rhs[0] = beta;
    h.svd(true, true).solve(&rhs, 1e-300).expect("SVD with both factors")
}

fn least_squares_residual(hess: &DMatrix<f64>, k: usize, beta: f64) -> f64 {
    let y = least_squares(hess, k, beta);
    let h = hess.view((0, 0), (k + 1, k));
    let mut r = -(h * y);
    r[0] += beta;
    r.norm()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConstructionOptions {
    /// Outer stopping rule `‖ρ_{n+1} − ρ_n‖_{H¹} < tol ‖ρ_{n+1}‖_{H¹}`, or a step at the
    /// roundoff level of `σ`.
    pub tol: f64,
    pub linear_tol: f64,
    pub max_outer: usize,
    pub separation_floor: f64,
    /// Two-thirds dealiasing of `N(ρ)` (polynomial nonlinearities only).
    pub dealias: bool,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        Self { tol: 1e-10, linear_tol: 1e-12, max_outer: 60, separation_floor: SEPARATION_FLOOR, dealias: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SharpReport {
    pub d: usize,
    pub p: f64,
    pub m: usize,
    pub separation: f64,
    pub rho_h1: f64,
    /// `‖P_{F⊥}(−Δ+1)^{−1} f‖_{H¹}`.
    pub projected_f_h1: f64,
    pub rho_over_projected_f: f64,
    pub f_l2: f64,
    pub f_h1: f64,
    pub f_hm1: f64,
    pub gamma_u: f64,
    /// `R^{−(d−1)/2} e^{−R}`.
    pub tail_scale: f64,
    pub gamma_over_scale: f64,
    pub outer_iterations: usize,
    pub contraction_ratios: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    /// `‖P_{F⊥}(ρ − Kρ − (−Δ+1)^{−1}(f + N(ρ)))‖_{H¹} / ‖f‖_{H^{−1}}`.
    pub fixed_point_defect: f64,
    /// Largest `|⟨ρ, e_a⟩_{H¹}| / (‖ρ‖_{H¹} ‖e_a‖_{H¹})`.
    pub orthogonality: f64,
    pub within_ball: bool,
}

impl SharpReport {
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["format"] = "solstab.sharp_example".into();
        v["version"] = 1.into();
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

#[derive(Clone, Debug)]
pub struct SharpExample {
    pub u: TorusField,
    pub sigma: TorusField,
    pub rho: TorusField,
    pub report: SharpReport,
}

/// Picard iteration for `ρ`, with the contraction monitored at run time.
pub fn build_sharp_example(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid, opts: &ConstructionOptions) -> Result<SharpExample> {
    let op = LinearizedOperator::new(gs, cfg, grid, opts.separation_floor)?;
    let p = cfg.params.p;
    let f = interaction_term_f(gs, cfg, grid)?;
    let fs = f.spectrum();
    let (f_l2, f_h1, f_hm1) = (fs.norm(Norm::L2), fs.norm(Norm::H1), fs.norm(Norm::Hm1));
    let f_smooth = f.helmholtz_inverse();
    let projected_f = op.basis.project_perp(&f_smooth);
    let projected_f_h1 = h1(&projected_f);

    let dealias = opts.dealias && (p == 2.0 || p == 3.0);
    let remainder = |rho: &TorusField| {
        let n = nonlinear_remainder_n(&op.sigma, rho, p);
        if dealias {
            n.dealiased()
        } else {
            n
        }
    };
    let rhs = |rho: &TorusField| -> TorusField {
        let g = f.add(&remainder(rho)).helmholtz_inverse();
        op.basis.project_perp(&g)
    };

    let mut rho = op.sigma.scale(0.0);
    let mut ratios = Vec::new();
    let mut linear_iterations = Vec::new();
    let mut prev_step = f64::NAN;
    // Steps below this are roundoff in σ + ρ.
    let floor = 1e3 * f64::EPSILON * h1(&op.sigma);
    let mut outer = 0;
    loop {
        if outer == opts.max_outer {
            return Err(Error::NotContracting { ratio: ratios.last().copied().unwrap_or(f64::NAN) });
        }
        outer += 1;
        let sol = op.solve(&rhs(&rho), opts.linear_tol)?;
        linear_iterations.push(sol.iterations);
        let step = h1(&sol.v.sub(&rho));
        rho = sol.v;
        if prev_step.is_finite() && prev_step > 0.0 {
            ratios.push(step / prev_step);
            let n = ratios.len();
            if n >= 5 && ratios[n - 5..].iter().all(|&r| r >= 0.95) {
                return Err(Error::NotContracting { ratio: ratios[n - 1] });
            }
        }
        prev_step = step;
        let size = h1(&rho);
        if step <= opts.tol * size || step <= floor || size == 0.0 {
            break;
        }
    }

    let u = op.sigma.add(&rho);
    let rho_h1 = h1(&rho);
    let defect_field = op.basis.project_perp(&rho.sub(&op.k(&rho)).sub(&f.add(&remainder(&rho)).helmholtz_inverse()));
    let fixed_point_defect = if f_hm1 > 0.0 { h1(&defect_field) / f_hm1 } else { h1(&defect_field) };
    let ip = op.basis.inner_products(&rho);
    let orthogonality = if rho_h1 > 0.0 {
        ip.iter()
            .enumerate()
            .map(|(a, v)| v.abs() / (rho_h1 * op.basis.gram[(a, a)].sqrt()))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let separation = if cfg.m() > 1 { cfg.min_separation(None) } else { f64::INFINITY };
    let tail_scale = if separation.is_finite() { phi(cfg.params.d, separation) } else { 0.0 };
    let gamma_u = gamma(&u, p);
    let report = SharpReport {
        d: cfg.params.d,
        p,
        m: cfg.m(),
        separation,
        rho_h1,
        projected_f_h1,
        rho_over_projected_f: if projected_f_h1 > 0.0 { rho_h1 / projected_f_h1 } else { f64::NAN },
        f_l2,
        f_h1,
        f_hm1,
        gamma_u,
        tail_scale,
        gamma_over_scale: if tail_scale > 0.0 { gamma_u / tail_scale } else { f64::NAN },
        outer_iterations: outer,
        contraction_ratios: ratios,
        linear_iterations,
        fixed_point_defect,
        orthogonality,
        within_ball: !separation.is_finite() || rho_h1 <= 1.0 / separation,
    };
    Ok(SharpExample { u, sigma: op.sigma, rho, report })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PositivizeReport {
    /// `‖u⁻‖_{H¹}` with `u⁻ = max(−u, 0)`.
    pub negative_part_h1: f64,
    pub gamma_before: f64,
    pub gamma_after: f64,
}

/// `u⁺ = max(u, 0)` and the size of what was removed.
pub fn positivize(u: &TorusField, p: f64) -> Result<(TorusField, PositivizeReport)> {
    if !u.is_real() {
        return Err(Error::InvalidParams("positive part of a complex field".into()));
    }
    let plus = u.map(|v| num_complex::Complex64::new(v.re.max(0.0), 0.0));
    let minus = plus.sub(u);
    let report = PositivizeReport { negative_part_h1: h1(&minus), gamma_before: gamma(u, p), gamma_after: gamma(&plus, p) };
    Ok((plus, report))
}
