//! Radial ground state `Q` of `ΔQ − Q + Q^p = 0`.
//!
//! The amplitude `a = Q(0)` is located by bisection on the shooting dichotomy. Since the
//! decaying branch is unstable for outward integration, the profile itself is assembled
//! from two pieces: the outward solution up to a matching radius `r_m` in the core, and
//! an inward solution started at `r_max` on the exact decaying tail of the linearized
//! equation, `c · sqrt(2/π) r^{−ν} K_ν(r)` with `ν = (d−2)/2`. A small Newton iteration
//! on `(a, c)` makes value and slope continuous at `r_m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control, Dopri5};
use crate::params::ProblemParams;
use crate::quadrature::gauss_legendre;

/// Starting radius for the outward integration (d ≥ 2 has a coordinate singularity at 0).
const EPS: f64 = 1e-6;
/// Spacing of the uniform part of the output grid.
pub const DEFAULT_SPACING: f64 = 0.005;
const GEOMETRIC_START: f64 = 1e-3;
const GEOMETRIC_RATIO: f64 = 1.05;
/// Threshold on the model-subtracted plateau drift of `Q r^{(d−1)/2} e^r`.
pub const TAIL_DRIFT_TOL: f64 = 1e-3;
/// Floor for the stored ODE residual tolerance; finite differences of `Q'` cannot resolve less.
const RESIDUAL_FLOOR: f64 = 1e-11;
/// Half width of the window where the outward and inward solutions are blended.
const BLEND_HALF_WIDTH: f64 = 0.5;

const FORMAT: &str = "solstab.ground_state";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug)]
pub struct GroundStateOptions {
    pub tol: f64,
    /// Truncation radius; `max(40, 25 + 5 ln(1/tol))` when absent.
    pub r_max: Option<f64>,
    pub spacing: f64,
    /// Relative tolerance of the Runge–Kutta integration; derived from `tol` when absent.
    pub rtol: Option<f64>,
}

impl GroundStateOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, r_max: None, spacing: DEFAULT_SPACING, rtol: None }
    }
}

pub fn default_r_max(tol: f64) -> f64 {
    (25.0 + 5.0 * (1.0 / tol).ln()).max(40.0)
}

/// Radial profile of the ground state with its tail constant.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub params: ProblemParams,
    pub tol: f64,
    pub r_max: f64,
    pub c_q: f64,
    pub q0: f64,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    d2q: Vec<f64>,
    /// Index of the first node of the uniform part of the grid.
    uniform_from: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub match_radius: f64,
    pub match_mismatch: f64,
    pub bisection_steps: usize,
    pub max_ode_residual: f64,
    pub tail_drift: f64,
    pub tail_raw_variation: f64,
    pub residual_tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    d: usize,
    p: f64,
    tol: f64,
    r_max: f64,
    integrator_order: u32,
    c_q: f64,
    q0: f64,
    r: Vec<f64>,
    q: Vec<f64>,
    dq: Vec<f64>,
    #[serde(default)]
    diagnostics: Diagnostics,
}

/// Plateau fit of `Q r^{(d−1)/2} e^r` over the tail window.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub c_q: f64,
    /// Slope of `ln|Q r^{(d−1)/2} e^r − c_Q|` against `ln r` over the window; absent when
    /// the correction sits at rounding level (exact tails in d = 1, 3).
    pub correction_exponent: Option<f64>,
    /// Largest relative deviation of the data from the fitted model.
    pub drift: f64,
    /// Relative spread `(max − min)/c_q` of the raw plateau over the window.
    pub raw_variation: f64,
}

pub fn solve_ground_state(params: ProblemParams, tol: f64) -> Result<GroundState> {
    solve_ground_state_with(params, GroundStateOptions::new(tol))
}

pub fn solve_ground_state_with(params: ProblemParams, opts: GroundStateOptions) -> Result<GroundState> {
    let tol = opts.tol;
    if !(1e-14..=1e-4).contains(&tol) {
        return Err(Error::InvalidParams(format!("tol = {tol:e} outside [1e-14, 1e-4]")));
    }
    let r_max = opts.r_max.unwrap_or_else(|| default_r_max(tol));
    if r_max < 30.0 {
        return Err(Error::InvalidParams(format!("r_max = {r_max} below 30")));
    }
    if !(opts.spacing > 0.0 && opts.spacing <= 0.05) {
        return Err(Error::InvalidParams(format!("grid spacing {} outside (0, 0.05]", opts.spacing)));
    }
    let rtol = opts.rtol.unwrap_or((tol * 1e-3).clamp(1e-13, 1e-8));
    let solver = Dopri5 { rtol, atol: 1e-300, h_max: 0.25, max_steps: 5_000_000 };
    let sys = Radial::new(params);

    let (a_bis, steps) = bisect_amplitude(&sys, &solver, r_max)?;

    let grid = output_grid(r_max, opts.spacing);
    let (r, uniform_from) = (grid.nodes, grid.uniform_from);

    // Matching radius: first grid node where the outward profile has dropped to a quarter.
    let quarter = a_bis / 4.0;
    let probe = solver.integrate(
        |t, y| sys.rhs(t, y),
        EPS,
        sys.origin_state(a_bis),
        r_max,
        |_, y| if y[0] <= quarter || y[1] > 0.0 { Control::Stop } else { Control::Continue },
    )?;
    let im = r.partition_point(|&x| x < probe.t).min(r.len() - 2).max(1);
    let r_m = r[im];

    let mut matcher = Matcher { sys: &sys, solver: &solver, r_m, r_max };
    let (a, c, mismatch) = matcher.solve(a_bis)?;

    // Both solutions are sampled on an overlap window around r_m and blended with a
    // smooth weight, so the residual mismatch never shows up as a jump in Q'.
    let lo = r.partition_point(|&x| x < r_m - BLEND_HALF_WIDTH).max(1);
    let hi = r.partition_point(|&x| x <= r_m + BLEND_HALF_WIDTH).min(r.len() - 1) - 1;
    let outward = solver.sample(|t, y| sys.rhs(t, y), EPS, sys.origin_state(a), &r[1..=hi])?;
    let inward_nodes: Vec<f64> = r[lo..].iter().rev().copied().collect();
    let inward = solver.sample(|t, y| sys.rhs(t, y), r_max, sys.tail_state(c, r_max), &inward_nodes)?;
    let n = r.len();
    let mut q = vec![0.0; n];
    let mut dq = vec![0.0; n];
    q[0] = a;
    for i in 1..n {
        let out = (i <= hi).then(|| outward[i - 1]);
        let inn = (i >= lo).then(|| inward[n - 1 - i]);
        let (u, du) = match (out, inn) {
            (Some(o), None) => (o[0], o[1]),
            (None, Some(v)) => (v[0], v[1]),
            (Some(o), Some(v)) => {
                let (w, dw) = smoothstep((r[i] - (r_m - BLEND_HALF_WIDTH)) / (2.0 * BLEND_HALF_WIDTH));
                let dw = dw / (2.0 * BLEND_HALF_WIDTH);
                ((1.0 - w) * o[0] + w * v[0], (1.0 - w) * o[1] + w * v[1] + dw * (v[0] - o[0]))
            }
            (None, None) => unreachable!("outward and inward ranges cover the grid"),
        };
        q[i] = u;
        dq[i] = du;
    }

    let d2q: Vec<f64> = r.iter().zip(q.iter().zip(&dq)).map(|(&t, (&u, &du))| sys.second(t, u, du)).collect();
    let mut gs = GroundState {
        params,
        tol,
        r_max,
        c_q: c,
        q0: a,
        r,
        q,
        dq,
        d2q,
        uniform_from,
        diagnostics: Diagnostics {
            match_radius: r_m,
            match_mismatch: mismatch,
            bisection_steps: steps,
            residual_tolerance: tol.max(RESIDUAL_FLOOR * a.powf(params.p).max(1.0)),
            ..Default::default()
        },
    };

    if gs.q.iter().any(|&v| !(v > 0.0)) || gs.dq[1..].iter().any(|&v| !(v < 0.0)) {
        return Err(Error::NonConvergence { what: "ground state matching (profile not monotone)", iterations: steps });
    }
    let fit = extract_c_q(&gs)?;
    gs.c_q = fit.c_q;
    gs.diagnostics.tail_drift = fit.drift;
    gs.diagnostics.tail_raw_variation = fit.raw_variation;
    gs.diagnostics.max_ode_residual = gs.ode_residuals().into_iter().fold(0.0, f64::max);
    Ok(gs)
}

/// Right-hand side of the radial ODE for `y = (Q, Q')`.
struct Radial {
    d: f64,
    p: f64,
}

impl Radial {
    fn new(params: ProblemParams) -> Self {
        Self { d: params.d as f64, p: params.p }
    }

    fn power(&self, u: f64) -> f64 {
        u.signum() * u.abs().powf(self.p)
    }

    fn second(&self, r: f64, u: f64, du: f64) -> f64 {
        if r == 0.0 {
            (u - self.power(u)) / self.d
        } else {
            -(self.d - 1.0) / r * du + u - self.power(u)
        }
    }

    fn rhs(&self, r: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], self.second(r, y[0], y[1])]
    }

    /// Taylor start at `r = EPS`.
    fn origin_state(&self, a: f64) -> [f64; 2] {
        let curv = (a - self.power(a)) / self.d;
        [a + 0.5 * curv * EPS * EPS, curv * EPS]
    }

    /// Decaying solution `c · r^{−ν} sqrt(2/π) K_ν(r)` of the linearized equation.
    fn tail_state(&self, c: f64, r: f64) -> [f64; 2] {
        let nu = (self.d - 2.0) / 2.0;
        let scale = c * r.powf(-(self.d - 1.0) / 2.0) * (-r).exp();
        [scale * bessel_k_series(nu, r), -scale * bessel_k_series(nu + 1.0, r)]
    }
}

/// `sqrt(2r/π) e^r K_ν(r)` from its large-argument series, truncated at the smallest term.
fn bessel_k_series(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * r);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Shot {
    TooLarge,
    TooSmall,
}

fn classify(sys: &Radial, solver: &Dopri5, a: f64, r_max: f64) -> Result<Shot> {
    let mut verdict = Shot::TooSmall;
    solver.integrate(
        |t, y| sys.rhs(t, y),
        EPS,
        sys.origin_state(a),
        r_max,
        |_, y| {
            if y[0] < 0.0 {
                verdict = Shot::TooLarge;
                Control::Stop
            } else if y[1] > 0.0 {
                verdict = Shot::TooSmall;
                Control::Stop
            } else {
                Control::Continue
            }
        },
    )?;
    Ok(verdict)
}

fn bisect_amplitude(sys: &Radial, solver: &Dopri5, r_max: f64) -> Result<(f64, usize)> {
    let mut lo = 1.0 + 1e-3;
    if classify(sys, solver, lo, r_max)? != Shot::TooSmall {
        return Err(Error::NoBracket(format!("a = {lo} already overshoots")));
    }
    let mut hi = 2.0;
    while classify(sys, solver, hi, r_max)? != Shot::TooLarge {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBracket("no overshooting amplitude below 1e6".into()));
        }
    }
    let mut steps = 0;
    while hi - lo > 2.0 * f64::EPSILON * hi {
        steps += 1;
        if steps > 200 {
            return Err(Error::NonConvergence { what: "amplitude bisection", iterations: steps });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(sys, solver, mid, r_max)? {
            Shot::TooLarge => hi = mid,
            Shot::TooSmall => lo = mid,
        }
    }
    Ok((0.5 * (lo + hi), steps))
}

struct Matcher<'a> {
    sys: &'a Radial,
    solver: &'a Dopri5,
    r_m: f64,
    r_max: f64,
}

impl Matcher<'_> {
    fn outward(&self, a: f64) -> Result<[f64; 2]> {
        let o = self.solver.integrate(|t, y| self.sys.rhs(t, y), EPS, self.sys.origin_state(a), self.r_m, |_, _| {
            Control::Continue
        })?;
        Ok(o.y)
    }

    fn inward(&self, c: f64) -> Result<[f64; 2]> {
        let o = self.solver.integrate(
            |t, y| self.sys.rhs(t, y),
            self.r_max,
            self.sys.tail_state(c, self.r_max),
            self.r_m,
            |_, _| Control::Continue,
        )?;
        Ok(o.y)
    }

    fn mismatch(&self, a: f64, c: f64) -> Result<[f64; 2]> {
        let o = self.outward(a)?;
        let i = self.inward(c)?;
        Ok([(i[0] - o[0]) / o[0], (i[1] - o[1]) / o[1]])
    }

    /// Returns `(a, c, relative mismatch)`.
    fn solve(&mut self, a0: f64) -> Result<(f64, f64, f64)> {
        // Value match in c alone: ln Q_in(r_m) is close to linear in ln c.
        let target = self.outward(a0)?;
        let lin = self.sys.tail_state(1.0, self.r_m);
        let noise = 100.0 * self.solver.rtol;
        let mut lc = (target[0] / lin[0]).ln();
        let mut converged = false;
        for _ in 0..60 {
            let g = (self.inward(lc.exp())?[0] / target[0]).ln();
            if g.abs() < noise {
                converged = true;
                break;
            }
            let dl = 1e-6;
            let g2 = (self.inward((lc + dl).exp())?[0] / target[0]).ln();
            let slope = (g2 - g) / dl;
            let step = -g / slope;
            lc += step.clamp(-1.0, 1.0);
            if step.abs() < 1e-3 * noise {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { what: "tail constant matching", iterations: 60 });
        }

        let norm = |m: [f64; 2]| m[0].hypot(m[1]);
        let mut a = a0;
        let mut c = lc.exp();
        let mut m = self.mismatch(a, c)?;
        for _ in 0..12 {
            if norm(m) < noise {
                break;
            }
            let (ha, hc) = (1e-8 * a, 1e-7 * c);
            let ma = self.mismatch(a + ha, c)?;
            let mc = self.mismatch(a, c + hc)?;
            let j = [
                [(ma[0] - m[0]) / ha, (mc[0] - m[0]) / hc],
                [(ma[1] - m[1]) / ha, (mc[1] - m[1]) / hc],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let da = -(j[1][1] * m[0] - j[0][1] * m[1]) / det;
            let dc = -(-j[1][0] * m[0] + j[0][0] * m[1]) / det;
            let mut lambda = 1.0;
            let mut improved = false;
            while lambda > 1e-3 {
                let (a1, c1) = (a + lambda * da, c + lambda * dc);
                if c1 > 0.0 {
                    let m1 = self.mismatch(a1, c1)?;
                    if norm(m1) < norm(m) {
                        a = a1;
                        c = c1;
                        m = m1;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok((a, c, norm(m)))
    }
}

/// Quintic smoothstep on `[0, 1]` and its derivative, clamped outside.
fn smoothstep(x: f64) -> (f64, f64) {
    let x = x.clamp(0.0, 1.0);
    let w = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let dw = 30.0 * x * x * (1.0 - x) * (1.0 - x);
    (w, dw)
}

struct OutputGrid {
    nodes: Vec<f64>,
    uniform_from: usize,
}

/// `0`, then geometric nodes from `1e−3` with ratio 1.05 until the spacing reaches `h`,
/// then uniform nodes ending exactly at `r_max`.
fn output_grid(r_max: f64, h: f64) -> OutputGrid {
    let mut nodes = vec![0.0, GEOMETRIC_START];
    loop {
        let last = *nodes.last().unwrap();
        let next = last * GEOMETRIC_RATIO;
        if next - last >= h {
            break;
        }
        nodes.push(next);
    }
    let uniform_from = nodes.len() - 1;
    let start = nodes[uniform_from];
    let n = ((r_max - start) / h).ceil() as usize;
    let step = (r_max - start) / n as f64;
    for k in 1..n {
        nodes.push(start + k as f64 * step);
    }
    nodes.push(r_max);
    OutputGrid { nodes, uniform_from }
}

/// Quintic Hermite interpolation on `[0, 1]` in the local variable; returns value and `d/dt`.
fn hermite5(t: f64, h: f64, y0: [f64; 3], y1: [f64; 3]) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let g0 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let g1 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let g2 = 0.5 * (t3 - 2.0 * t4 + t5);
    let dh0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let dh1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let dh2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let dg0 = -dh0;
    let dg1 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let dg2 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let v = y0[0] * h0 + h * y0[1] * h1 + h * h * y0[2] * h2 + y1[0] * g0 + h * y1[1] * g1 + h * h * y1[2] * g2;
    let dv = y0[0] * dh0 + h * y0[1] * dh1 + h * h * y0[2] * dh2 + y1[0] * dg0 + h * y1[1] * dg1 + h * h * y1[2] * dg2;
    (v, dv / h)
}

impl GroundState {
    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    fn interval(&self, r: f64) -> usize {
        let u = self.uniform_from;
        let last = self.r.len() - 2;
        if r >= self.r[u] {
            let h = (self.r_max - self.r[u]) / (self.r.len() - 1 - u) as f64;
            let mut i = (u + ((r - self.r[u]) / h) as usize).min(last);
            while i > u && self.r[i] > r {
                i -= 1;
            }
            while i < last && self.r[i + 1] <= r {
                i += 1;
            }
            i
        } else {
            self.r[..=u].partition_point(|&x| x <= r).saturating_sub(1)
        }
    }

    /// Tail model `c_Q r^{−(d−1)/2} e^{−r}` and its derivative.
    pub fn tail(&self, r: f64) -> (f64, f64) {
        let k = self.params.tail_power();
        let v = self.c_q * r.powf(-k) * (-r).exp();
        (v, -v * (1.0 + k / r))
    }

    /// `(Q(r), Q'(r))` for `r ≥ 0`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r > self.r_max {
            return self.tail(r);
        }
        let i = self.interval(r);
        let h = self.r[i + 1] - self.r[i];
        let t = (r - self.r[i]) / h;
        hermite5(
            t,
            h,
            [self.q[i], self.dq[i], self.d2q[i]],
            [self.q[i + 1], self.dq[i + 1], self.d2q[i + 1]],
        )
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// `ln Q(r)`, finite for all `r` (the tail formula is used in log form beyond `r_max`).
    pub fn log_value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.r_max {
            self.c_q.ln() - self.params.tail_power() * r.ln() - r
        } else {
            self.value(r).ln()
        }
    }

    /// `Q''` at the grid nodes, from the ODE.
    pub fn second_derivatives(&self) -> &[f64] {
        &self.d2q
    }

    /// `|Q'' + (d−1)/r Q' − Q + Q^p|` at interior nodes, with `Q''` from a seven-point
    /// finite difference of the stored `Q'`.
    pub fn ode_residuals(&self) -> Vec<f64> {
        let n = self.r.len();
        let sys = Radial::new(self.params);
        (1..n - 1)
            .map(|i| {
                let lo = i.saturating_sub(3).min(n - 7);
                let x = &self.r[lo..lo + 7];
                let w = fornberg_first_derivative(self.r[i], x);
                let d2: f64 = w.iter().zip(&self.dq[lo..lo + 7]).map(|(w, v)| w * v).sum();
                (d2 - sys.second(self.r[i], self.q[i], self.dq[i])).abs()
            })
            .collect()
    }

    /// Both sides of `∫(|∇Q|² + Q²) = ∫Q^{p+1}` over the ball of radius `r_max`, radial
    /// measure `r^{d−1} dr` (the sphere area cancels).
    pub fn nehari_sides(&self) -> (f64, f64) {
        let (x, w) = gauss_legendre(8);
        let dm1 = self.params.d as i32 - 1;
        let p = self.params.p;
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for k in 0..self.r.len() - 1 {
            let (a, b) = (self.r[k], self.r[k + 1]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            for (xi, wi) in x.iter().zip(&w) {
                let r = c + h * xi;
                let (q, dq) = self.eval(r);
                let jac = wi * h * r.powi(dm1);
                lhs += jac * (dq * dq + q * q);
                rhs += jac * q.powf(p + 1.0);
            }
        }
        (lhs, rhs)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            format: FORMAT.into(),
            version: VERSION,
            d: self.params.d,
            p: self.params.p,
            tol: self.tol,
            r_max: self.r_max,
            integrator_order: ode::ORDER,
            c_q: self.c_q,
            q0: self.q0,
            r: self.r.clone(),
            q: self.q.clone(),
            dq: self.dq.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(s)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(Error::Format(format!("unsupported ground state document {} v{}", doc.format, doc.version)));
        }
        let params = ProblemParams::new(doc.d, doc.p)?;
        let n = doc.r.len();
        if n < 8 || doc.q.len() != n || doc.dq.len() != n || doc.r[0] != 0.0 || doc.r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("inconsistent ground state grid".into()));
        }
        let sys = Radial::new(params);
        let d2q = (0..n).map(|i| sys.second(doc.r[i], doc.q[i], doc.dq[i])).collect();
        // The uniform part starts where consecutive spacings stop growing.
        let h = doc.r[n - 1] - doc.r[n - 2];
        let uniform_from = (1..n - 1)
            .find(|&i| ((doc.r[i + 1] - doc.r[i]) - h).abs() < 1e-9 * h)
            .unwrap_or(n - 2);
        Ok(Self {
            params,
            tol: doc.tol,
            r_max: doc.r_max,
            c_q: doc.c_q,
            q0: doc.q0,
            r: doc.r,
            q: doc.q,
            dq: doc.dq,
            d2q,
            uniform_from,
            diagnostics: doc.diagnostics,
        })
    }
}

/// `eval_Q`: value and radial derivative at `r ≥ 0`.
pub fn eval_q(gs: &GroundState, r: f64) -> (f64, f64) {
    gs.eval(r)
}

/// Fits `Q r^{(d−1)/2} e^r ≈ c + b₁/r + b₂/r² + b₃/r³` over `[r_max/2, r_max]`.
pub fn extract_c_q(gs: &GroundState) -> Result<TailFit> {
    use nalgebra::{DMatrix, DVector};
    let k = gs.params.tail_power();
    let lo = gs.r_max / 2.0;
    let pts: Vec<(f64, f64)> = gs
        .r
        .iter()
        .zip(&gs.q)
        .filter(|(r, _)| **r >= lo)
        .step_by(5)
        .map(|(&r, &q)| (r, q * r.powf(k) * r.exp()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::TailNotResolved { drift: f64::INFINITY, tol: TAIL_DRIFT_TOL });
    }
    // Basis in x = r_max/r ∈ [1, 2] keeps the fit well conditioned.
    let a = DMatrix::from_fn(pts.len(), 4, |i, j| (gs.r_max / pts[i].0).powi(j as i32));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Format(format!("tail fit: {e}")))?;
    let c = coef[0];
    let fitted = &a * &coef;
    let drift = (0..pts.len()).map(|i| (pts[i].1 - fitted[i]).abs() / c.abs()).fold(0.0, f64::max);
    let (mn, mx) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(r, g)| (r.ln(), ((g - c) / c).abs())).collect();
    let correction_exponent = logs.iter().all(|l| l.1 > 1e-9).then(|| {
        let pairs: Vec<(f64, f64)> = logs.iter().map(|&(x, y)| (x, y.ln())).collect();
        crate::stats::linear_fit(&pairs).0
    });
    let fit = TailFit { c_q: c, correction_exponent, drift, raw_variation: (mx - mn) / c.abs() };
    if !(c > 0.0) || drift > TAIL_DRIFT_TOL {
        return Err(Error::TailNotResolved { drift, tol: TAIL_DRIFT_TOL });
    }
    Ok(fit)
}

/// Weights of the first derivative at `x0` from the nodes `x` (Fornberg's recursion).
pub fn fornberg_first_derivative(x0: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_quintic() {
        let f = |x: f64| [1.0 - 2.0 * x + x.powi(3) - 0.5 * x.powi(5), -2.0 + 3.0 * x * x - 2.5 * x.powi(4), 6.0 * x - 10.0 * x.powi(3)];
        let (a, b) = (0.3, 0.8);
        for t in [0.0, 0.17, 0.5, 0.93, 1.0] {
            let (v, dv) = hermite5(t, b - a, f(a), f(b));
            let x = a + t * (b - a);
            assert!((v - f(x)[0]).abs() < 1e-14);
            assert!((dv - f(x)[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn fornberg_matches_centered_difference() {
        let w = fornberg_first_derivative(0.0, &[-1.0, 0.0, 1.0]);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5, 0.7, 0.71];
        let w = fornberg_first_derivative(0.3, &xs);
        let d: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(6)).sum();
        assert!((d - 6.0 * 0.3f64.powi(5)).abs() < 1e-10);
    }

    #[test]
    fn bessel_series_half_integer_terminates() {
        // K_{1/2} and K_{3/2} in closed form: S_{1/2} = 1, S_{3/2} = 1 + 1/r.
        assert_eq!(bessel_k_series(0.5, 7.0), 1.0);
        assert!((bessel_k_series(1.5, 7.0) - (1.0 + 1.0 / 7.0)).abs() < 1e-16);
    }

    #[test]
    fn output_grid_shape() {
        let g = output_grid(40.0, 0.005);
        assert_eq!(g.nodes[0], 0.0);
        assert_eq!(*g.nodes.last().unwrap(), 40.0);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        let u = g.uniform_from;
        assert!(g.nodes[u] < 0.2);
        let h = g.nodes[u + 1] - g.nodes[u];
        assert!((h - 0.005).abs() < 1e-4);
    }
}
