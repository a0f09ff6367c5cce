//! Modulation fitting: the H¹-closest soliton sum to a given field, the remainder `ρ`,
//! and the Gram-based projections onto the modulation directions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gamma, interaction_term_f, soliton_component, soliton_gradient, Norm, ScalarKind, SolitonConfig, TorusField, TorusGrid};
use crate::groundstate::GroundState;

/// Largest admitted condition number of the Gram matrix.
pub const COND_CAP: f64 = 1e6;

/// Smallest center separation accepted as an initial configuration.
pub const MIN_INIT_SEPARATION: f64 = 8.0;

/// Which parameters the fit moves besides the centers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// Centers only.
    #[default]
    Translations,
    /// Centers and unit phases.
    Phases,
    /// Centers and free complex amplitudes `z_k`.
    Amplitudes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModeKind {
    /// `z_k ∂_j Q_k`.
    Translation { axis: usize },
    /// `i z_k Q_k`.
    Phase,
    /// `ẑ_k Q_k` with `ẑ_k = z_k/|z_k|`.
    AmplitudeReal,
    /// `i ẑ_k Q_k`.
    AmplitudeImag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub soliton: usize,
    #[serde(flatten)]
    pub kind: ModeKind,
}

/// Centers and complex coefficients of `σ = Σ z_k Q(· + y_k)`.
#[derive(Clone, Debug, PartialEq)]
struct State {
    centers: Vec<Vec<f64>>,
    coeffs: Vec<Complex64>,
}

impl State {
    fn sample(&self, gs: &GroundState, grid: TorusGrid) -> TorusField {
        let real = self.coeffs.iter().all(|z| z.im == 0.0);
        let mut sum = TorusField::zeros(grid, if real { ScalarKind::Real } else { ScalarKind::Complex });
        for (y, z) in self.centers.iter().zip(&self.coeffs) {
            sum.axpy(1.0, &soliton_component(gs, grid, y, *z));
        }
        sum
    }

    fn step(&self, modes: &[Mode], delta: &DVector<f64>, t: f64) -> State {
        let mut next = self.clone();
        let unit: Vec<Complex64> = self.coeffs.iter().map(|z| z / z.norm()).collect();
        for (mode, c) in modes.iter().zip(delta.iter()) {
            let c = c * t;
            let k = mode.soliton;
            match mode.kind {
                ModeKind::Translation { axis } => next.centers[k][axis] += c,
                ModeKind::Phase => {
                    let z = next.coeffs[k] * Complex64::from_polar(1.0, c);
                    next.coeffs[k] = z / z.norm();
                }
                ModeKind::AmplitudeReal => next.coeffs[k] += unit[k] * c,
                ModeKind::AmplitudeImag => next.coeffs[k] += unit[k] * Complex64::new(0.0, c),
            }
        }
        next
    }

    fn drift(&self, other: &State) -> f64 {
        self.centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Modulation directions sampled on a grid together with their H¹ Gram matrix.
#[derive(Clone, Debug)]
pub struct ModulationBasis {
    pub grid: TorusGrid,
    pub modes: Vec<Mode>,
    pub fields: Vec<TorusField>,
    /// `(−Δ+1) e_a`, so that `⟨v, e_a⟩_{H¹}` is a plain `L²` sum.
    duals: Vec<TorusField>,
    pub gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    pub cond: f64,
}

impl ModulationBasis {
    /// Translation modes (and phase modes when `mode` asks for them) at `cfg`.
    pub fn new(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid, mode: FitMode) -> Result<Self> {
        check_inputs(gs, cfg, grid)?;
        let state = State { centers: cfg.centers.clone(), coeffs: cfg.phases.clone() };
        Self::at(gs, &state, grid, mode, COND_CAP)
    }

    fn at(gs: &GroundState, state: &State, grid: TorusGrid, mode: FitMode, cap: f64) -> Result<Self> {
        let d = grid.d;
        let mut modes = Vec::new();
        let mut fields = Vec::new();
        for (k, (y, z)) in state.centers.iter().zip(&state.coeffs).enumerate() {
            for j in 0..d {
                modes.push(Mode { soliton: k, kind: ModeKind::Translation { axis: j } });
                fields.push(soliton_gradient(gs, grid, y, *z, j));
            }
            let unit = z / z.norm();
            match mode {
                FitMode::Translations => {}
                FitMode::Phases => {
                    modes.push(Mode { soliton: k, kind: ModeKind::Phase });
                    fields.push(soliton_component(gs, grid, y, z * Complex64::i()));
                }
                FitMode::Amplitudes => {
                    modes.push(Mode { soliton: k, kind: ModeKind::AmplitudeReal });
                    fields.push(soliton_component(gs, grid, y, unit).into_complex());
                    modes.push(Mode { soliton: k, kind: ModeKind::AmplitudeImag });
                    fields.push(soliton_component(gs, grid, y, unit * Complex64::i()));
                }
            }
        }
        let duals: Vec<TorusField> = fields.iter().map(|f| f.helmholtz()).collect();
        let n = fields.len();
        let mut gram = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let g = fields[a].dot(&duals[b]);
                gram[(a, b)] = g;
                gram[(b, a)] = g;
            }
        }
        // The two triangles are computed from different samples; use the symmetric part.
        let gram = (&gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::new(gram.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= cap) {
            return Err(Error::IllConditioned { cond, cap });
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::IllConditioned { cond, cap })?;
        Ok(Self { grid, modes, fields, duals, gram, chol, cond })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `⟨v, e_a⟩_{H¹}` for every basis element.
    pub fn inner_products(&self, v: &TorusField) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.duals.iter().map(|e| v.dot(e)))
    }

    /// Coefficients `c` of `P_F v = Σ c_a e_a`.
    pub fn coefficients(&self, v: &TorusField) -> DVector<f64> {
        self.chol.solve(&self.inner_products(v))
    }

    pub fn combine(&self, c: &DVector<f64>) -> TorusField {
        let mut out = TorusField::zeros(self.grid, ScalarKind::Real);
        for (f, a) in self.fields.iter().zip(c.iter()) {
            out.axpy(*a, f);
        }
        out
    }

    /// `(P_F v, c)`.
    pub fn project(&self, v: &TorusField) -> (TorusField, DVector<f64>) {
        let c = self.coefficients(v);
        (self.combine(&c), c)
    }

    /// `P_{F⊥} v = v − P_F v`.
    pub fn project_perp(&self, v: &TorusField) -> TorusField {
        v.sub(&self.project(v).0)
    }

    /// Largest normalized off-diagonal block `‖G_{ij}‖_F / (‖G_{ii}‖_F ‖G_{jj}‖_F)^{1/2}`.
    pub fn block_coupling(&self) -> f64 {
        let m = self.modes.iter().map(|md| md.soliton + 1).max().unwrap_or(0);
        let idx: Vec<Vec<usize>> = (0..m).map(|k| (0..self.len()).filter(|&a| self.modes[a].soliton == k).collect()).collect();
        let block = |i: usize, j: usize| -> f64 {
            idx[i].iter().flat_map(|&a| idx[j].iter().map(move |&b| (a, b))).map(|(a, b)| self.gram[(a, b)].powi(2)).sum::<f64>().sqrt()
        };
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    worst = worst.max(block(i, j) / (block(i, i) * block(j, j)).sqrt());
                }
            }
        }
        worst
    }
}

pub fn project_f(basis: &ModulationBasis, v: &TorusField) -> (TorusField, Vec<f64>) {
    let (pf, c) = basis.project(v);
    (pf, c.iter().copied().collect())
}

fn check_inputs(gs: &GroundState, cfg: &SolitonConfig, grid: TorusGrid) -> Result<()> {
    if gs.params != cfg.params || grid.d != gs.params.d {
        return Err(Error::InvalidParams("ground state, configuration and grid disagree on (d, p)".into()));
    }
    grid.check_fits(&cfg.centers)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    /// Target for the largest gradient component `|⟨ρ, e_a⟩_{H¹}|`.
    pub tol: f64,
    pub max_iter: usize,
    pub mode: FitMode,
    pub cond_cap: f64,
    /// Largest center drift from the initial configuration before the fit is abandoned.
    /// Defaults to a quarter of the initial separation (4 for one soliton).
    pub basin_radius: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, mode: FitMode::Translations, cond_cap: COND_CAP, basin_radius: None }
    }
}

impl FitOptions {
    pub fn with_mode(mode: FitMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    GaussNewton,
    Gradient,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub distance: f64,
    pub gradient: f64,
    pub step: StepKind,
    pub step_length: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecompositionNorms {
    pub rho_h1: f64,
    pub gamma_u: f64,
    /// Norms of `f` at the fitted centers; absent for complex configurations.
    pub f_l2: Option<f64>,
    pub f_h1: Option<f64>,
    pub f_hm1: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalityResidual {
    pub mode: Mode,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionResult {
    pub mode: FitMode,
    /// Fitted centers and unit phases.
    pub config: SolitonConfig,
    /// `|z_k|`; all ones unless amplitudes were freed.
    pub amplitudes: Vec<f64>,
    #[serde(skip)]
    pub rho: TorusField,
    pub norms: DecompositionNorms,
    pub orthogonality_residuals: Vec<OrthogonalityResidual>,
    pub iterations: usize,
    pub initial_distance: f64,
    pub gram_condition: f64,
    pub trace: Vec<IterationRecord>,
}

impl DecompositionResult {
    pub fn max_residual(&self) -> f64 {
        self.orthogonality_residuals.iter().map(|r| r.value.abs()).fold(0.0, f64::max)
    }

    /// Complex coefficients `|z_k| ẑ_k`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.config.phases.iter().zip(&self.amplitudes).map(|(z, a)| z * *a).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["format"] = "solstab.decomposition".into();
        v["version"] = 1.into();
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// `‖u − σ(cfg)‖_{H¹}`.
pub fn distance(gs: &GroundState, u: &TorusField, cfg: &SolitonConfig) -> Result<f64> {
    check_inputs(gs, cfg, u.grid)?;
    let state = State { centers: cfg.centers.clone(), coeffs: cfg.phases.clone() };
    Ok(u.sub(&state.sample(gs, u.grid)).norm(Norm::H1))
}

/// Local minimizer of `‖u − Σ z_k Q(· + y_k)‖_{H¹}` started from `init`.
///
/// Gauss–Newton on the remainder with the modulation basis as Jacobian, backtracked; when
/// no backtracked Gauss–Newton step lowers the distance a gradient step is tried instead.
pub fn fit_modulation(gs: &GroundState, u: &TorusField, init: &SolitonConfig, opts: &FitOptions) -> Result<DecompositionResult> {
    let grid = u.grid;
    check_inputs(gs, init, grid)?;
    if init.m() > 1 && init.min_separation(None) < MIN_INIT_SEPARATION {
        return Err(Error::InvalidParams(format!(
            "initial centers {:.3} apart, need at least {MIN_INIT_SEPARATION}",
            init.min_separation(None)
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParams("fit tolerance and iteration budget must be positive".into()));
    }
    let radius = opts.basin_radius.unwrap_or(if init.m() > 1 { init.min_separation(None) / 4.0 } else { 4.0 });
    let start = State { centers: init.centers.clone(), coeffs: init.phases.clone() };
    let mut state = start.clone();
    let mut rho = u.sub(&state.sample(gs, grid));
    let mut dist = rho.norm(Norm::H1);
    let initial_distance = dist;
    let mut trace = Vec::new();
    let mut converged = None;
    for it in 0..=opts.max_iter {
        let basis = ModulationBasis::at(gs, &state, grid, opts.mode, opts.cond_cap)?;
        let b = basis.inner_products(&rho);
        let g = b.amax();
        if g <= opts.tol {
            trace.push(IterationRecord { iteration: it, distance: dist, gradient: g, step: StepKind::None, step_length: 0.0 });
            converged = Some((basis, b));
            break;
        }
        if it == opts.max_iter {
            return Err(Error::NotConverged { iterations: it, gradient: g });
        }
        let delta = basis.chol.solve(&b);
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..12 {
            let trial = state.step(&basis.modes, &delta, t);
            let r = u.sub(&trial.sample(gs, grid));
            let dn = r.norm(Norm::H1);
            if dn < dist {
                accepted = Some((trial, r, dn, StepKind::GaussNewton, t * delta.norm()));
                break;
            }
            t *= 0.5;
        }
        if accepted.is_none() {
            // Steepest descent in parameter space, scaled by the Gram diagonal.
            let scale = 1.0 / basis.gram.diagonal().max();
            let mut t = scale;
            for _ in 0..40 {
                let trial = state.step(&basis.modes, &b, t);
                let r = u.sub(&trial.sample(gs, grid));
                let dn = r.norm(Norm::H1);
                if dn < dist {
                    accepted = Some((trial, r, dn, StepKind::Gradient, t * b.norm()));
                    break;
                }
                t *= 0.5;
            }
        }
        let Some((next, r, dn, kind, len)) = accepted else {
            return Err(Error::NotConverged { iterations: it, gradient: g });
        };
        trace.push(IterationRecord { iteration: it, distance: dist, gradient: g, step: kind, step_length: len });
        if next.drift(&start) > radius {
            return Err(Error::LeftBasin { from: initial_distance, to: dn });
        }
        state = next;
        rho = r;
        dist = dn;
    }
    let (basis, b) = converged.expect("loop exits through convergence or an error");

    let amplitudes: Vec<f64> = state.coeffs.iter().map(|z| z.norm()).collect();
    let phases: Vec<Complex64> = state
        .coeffs
        .iter()
        .map(|z| {
            let w = z / z.norm();
            if w.im == 0.0 && (w.re - 1.0).abs() < 1e-15 {
                Complex64::new(1.0, 0.0)
            } else {
                w
            }
        })
        .collect();
    let config = SolitonConfig::new(init.params, state.centers.clone(), phases)?;
    let p = gs.params.p;
    let (f_l2, f_h1, f_hm1) = if config.is_real() {
        let f = interaction_term_f(gs, &config, grid)?.spectrum();
        (Some(f.norm(Norm::L2)), Some(f.norm(Norm::H1)), Some(f.norm(Norm::Hm1)))
    } else {
        (None, None, None)
    };
    let norms = DecompositionNorms { rho_h1: dist, gamma_u: gamma(u, p), f_l2, f_h1, f_hm1 };
    let orthogonality_residuals =
        basis.modes.iter().zip(b.iter()).map(|(mode, v)| OrthogonalityResidual { mode: *mode, value: *v }).collect();
    Ok(DecompositionResult {
        mode: opts.mode,
        config,
        amplitudes,
        rho,
        norms,
        orthogonality_residuals,
        iterations: trace.len() - 1,
        initial_distance,
        gram_condition: basis.cond,
        trace,
    })
}

/// Whether all pairwise `Re(z_j z̄_i)` exceed `c` or all fall below `−c`.
/// Vacuously true for a single soliton.
pub fn complex_phase_restriction_check(cfg: &SolitonConfig, c: f64) -> bool {
    let m = cfg.m();
    let cosines: Vec<f64> =
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).map(|(i, j)| (cfg.phases[j] * cfg.phases[i].conj()).re).collect();
    cosines.iter().all(|&v| v > c) || cosines.iter().all(|&v| v < -c)
}
