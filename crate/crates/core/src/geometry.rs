//! Placing finitely many points in a half-cone: a direction, a base point and a rotation
//! after which every other point has first coordinate bounded below by a multiple of its norm.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 64;
const MAX_CANDIDATES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Unit vector `τ` that is rotated onto `e₁`.
    pub direction: Vec<f64>,
    /// Index of the input point sent to the origin.
    pub base_index: usize,
    /// Input indices sorted by transformed first coordinate; `order[0] == base_index`.
    pub order: Vec<usize>,
    /// `min_k x_k¹/|x_k|` over the transformed nonzero points.
    pub c_achieved: f64,
    /// `min_{i≠j} |⟨x_i − x_j, τ⟩|/|x_i − x_j|`.
    pub delta: f64,
    pub meets_target: bool,
    /// Orthogonal matrix `M` (row-major) with `M τ = e₁`; a rotation when `d ≥ 2`.
    pub rotation: Vec<Vec<f64>>,
    /// `M (x_{order[k]} − x_base)`.
    pub transformed: Vec<Vec<f64>>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic, roughly uniform directions on `S^{d−1}` (up to sign).
pub fn candidate_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match d {
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|k| {
                let th = PI * (k as f64 + 0.5) / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice.
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            // Kronecker sequence with the generalized golden ratio, pushed through Box–Muller.
            let dim = d + d % 2;
            let mut g = 2.0f64;
            for _ in 0..60 {
                g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
            }
            let alpha: Vec<f64> = (1..=dim).map(|j| g.powi(-(j as i32))).collect();
            (0..count)
                .map(|k| {
                    let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * (k + 1) as f64).fract()).collect();
                    let mut v = Vec::with_capacity(dim);
                    for pair in u.chunks(2) {
                        let r = (-2.0 * (1.0 - pair[0]).ln()).sqrt();
                        let (s, c) = (2.0 * PI * pair[1]).sin_cos();
                        v.push(r * c);
                        v.push(r * s);
                    }
                    v.truncate(d);
                    unit(&v)
                })
                .collect()
        }
    }
}

/// Orthogonal `M` with `M τ = e₁`: a Householder reflection, composed with a sign flip of
/// the last axis so that `det M = 1` when `d ≥ 2`.
fn rotation_to_e1(tau: &[f64]) -> DMatrix<f64> {
    let d = tau.len();
    let t = DVector::from_column_slice(tau);
    let mut v = t.clone();
    v[0] -= 1.0;
    let vn = v.norm_squared();
    if vn < 1e-30 {
        return DMatrix::identity(d, d);
    }
    let mut m = DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / vn);
    if d >= 2 {
        m.row_mut(d - 1).neg_mut();
    }
    m
}

/// Finds `τ`, the base point and the rotation; `delta_target` is the separation floor
/// reported through `meets_target`.
pub fn project_points(points: &[Vec<f64>], delta_target: f64) -> Result<ProjectionResult> {
    let n = points.len();
    if n == 0 || n > MAX_POINTS {
        return Err(Error::InvalidParams(format!("need 1..={MAX_POINTS} points, got {n}")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|c| !c.is_finite())) {
        return Err(Error::InvalidParams("points must be finite and share one dimension".into()));
    }
    if !(delta_target > 0.0 && delta_target < 1.0) {
        return Err(Error::OutOfRange { value: delta_target, range: "(0, 1)".into() });
    }
    let mut diffs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| b - a).collect();
            if w.iter().all(|&c| c == 0.0) {
                return Err(Error::DegenerateInput(format!("points {i} and {j} coincide")));
            }
            diffs.push(unit(&w));
        }
    }
    let m = n - 1;
    let mut candidates = diffs.clone();
    if d > 1 {
        candidates.extend(candidate_directions(d, (400 * m * m).clamp(400, MAX_CANDIDATES)));
    }
    let score = |tau: &[f64]| diffs.iter().map(|u| dot(u, tau).abs()).fold(f64::INFINITY, f64::min);
    let (best, delta) = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| (i, score(c)))
        .reduce(|| (usize::MAX, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    let (tau, delta) = if n == 1 {
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        (e1, 1.0)
    } else {
        let mut t = candidates[best].clone();
        // Canonical sign: first nonzero component positive.
        if t.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        (t, delta)
    };

    let proj: Vec<f64> = points.iter().map(|p| dot(p, &tau)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let base_index = order[0];

    let rot = rotation_to_e1(&tau);
    let base = DVector::from_column_slice(&points[base_index]);
    let transformed: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let y = &rot * (DVector::from_column_slice(&points[k]) - &base);
            y.iter().copied().collect()
        })
        .collect();
    let c_achieved = transformed[1..]
        .iter()
        .map(|y| y[0] / y.iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(1.0, f64::min);
    Ok(ProjectionResult {
        direction: tau,
        base_index,
        order,
        c_achieved,
        delta,
        meets_target: delta > delta_target,
        rotation: rot.row_iter().map(|r| r.iter().copied().collect()).collect(),
        transformed,
    })
}

/// Exhaustive check of the transformed configuration: `x₀ = 0`, `x_k¹ > 0` and
/// `x_k¹/|x_k| ≥ c`. Returns the smallest ratio found.
pub fn verify_projection(res: &ProjectionResult, c: f64) -> Result<f64> {
    let origin = &res.transformed[0];
    if origin.iter().any(|&v| v.abs() > 1e-12) {
        return Err(Error::DegenerateInput("base point not at the origin".into()));
    }
    let mut worst: f64 = 1.0;
    for (k, y) in res.transformed.iter().enumerate().skip(1) {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ratio = y[0] / norm;
        if !(y[0] > 0.0) || ratio < c * (1.0 - 1e-12) {
            return Err(Error::DegenerateInput(format!("point {k} has ratio {ratio:.3e} below {c:.3e}")));
        }
        worst = worst.min(ratio);
    }
    Ok(worst)
}
