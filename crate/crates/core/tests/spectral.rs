use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solstab::fields::{soliton_component, soliton_gradient, TorusField, TorusGrid};
use solstab::groundstate::{solve_ground_state, GroundState};
use solstab::spectral::*;
use solstab::{Error, ProblemParams};

fn gs(d: usize, p: f64) -> &'static GroundState {
    static G: OnceLock<Vec<GroundState>> = OnceLock::new();
    let all = G.get_or_init(|| {
        [(1, 3.0), (1, 2.0), (3, 2.0), (2, 2.0)]
            .iter()
            .map(|&(d, p)| solve_ground_state(ProblemParams::new(d, p).unwrap(), 1e-10).unwrap())
            .collect()
    });
    all.iter().find(|g| g.d() == d && g.p() == p).unwrap()
}

/// Pöschl–Teller levels of `−φ'' + φ = λ (p+1)/2 sech²((p−1)x/2) φ`.
fn poschl_teller(p: f64, n: usize) -> f64 {
    let s = n as f64 + 2.0 / (p - 1.0);
    s * (s + 1.0) * (p - 1.0).powi(2) / (2.0 * (p + 1.0))
}

#[test]
fn one_dimensional_levels_match_poschl_teller() {
    for p in [2.0, 3.0] {
        let g = gs(1, p);
        let even = sector_spectrum(g, 0, 3, &SpectralOptions::default()).unwrap();
        let odd = sector_spectrum(g, 1, 3, &SpectralOptions::default()).unwrap();
        for k in 0..3 {
            let (e, o) = (poschl_teller(p, 2 * k), poschl_teller(p, 2 * k + 1));
            assert!((even.eigenvalues[k] / e - 1.0).abs() < 1e-4, "p={p} n={}: {} vs {e}", 2 * k, even.eigenvalues[k]);
            assert!((odd.eigenvalues[k] / o - 1.0).abs() < 1e-4, "p={p} n={}: {} vs {o}", 2 * k + 1, odd.eigenvalues[k]);
        }
    }
}

#[test]
fn structural_eigenvalues_and_vectors() {
    for (d, p) in [(1, 3.0), (3, 2.0)] {
        let g = gs(d, p);
        let s0 = sector_spectrum(g, 0, 2, &SpectralOptions::default()).unwrap();
        let s1 = sector_spectrum(g, 1, 2, &SpectralOptions::default()).unwrap();
        assert!((s0.eigenvalues[0] - 1.0).abs() < 1e-4, "{:?}", s0.eigenvalues);
        assert!((s1.eigenvalues[0] - p).abs() < 1e-3, "{:?}", s1.eigenvalues);
        assert!(s0.cosine_with(0, |r| g.value(r)) > 0.9999);
        assert!(s1.cosine_with(0, |r| -g.eval(r).1) > 0.9999);
        assert!(s0.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        assert!(s0.eigenvalues[0] > 1.0 - 1e-4);
    }
}

#[test]
fn kappa_matches_closed_form_in_one_dimension() {
    for p in [2.0, 3.0] {
        let k = estimate_kappa(gs(1, p), &SpectralOptions::default()).unwrap();
        let exact = 2.0 * p * (p - 1.0) / (p + 1.0);
        assert!((k.kappa - exact).abs() < 1e-3 * exact, "p={p}: {} vs {exact}", k.kappa);
    }
}

#[test]
fn kappa_positive_and_stable_under_refinement() {
    for (d, p) in [(1, 3.0), (3, 2.0), (2, 2.0)] {
        let coarse = estimate_kappa(gs(d, p), &SpectralOptions::default()).unwrap();
        let fine = estimate_kappa(gs(d, p), &SpectralOptions { h: 0.0025, ..Default::default() }).unwrap();
        assert!(coarse.kappa > 0.0);
        assert!((coarse.kappa - fine.kappa).abs() < 1e-3 * fine.kappa.max(1.0), "d={d}: {} vs {}", coarse.kappa, fine.kappa);
    }
}

#[test]
fn eigenvalues_stable_under_doubling_resolution() {
    let g = gs(3, 2.0);
    for ell in 0..3 {
        let a = sector_spectrum(g, ell, 3, &SpectralOptions::default()).unwrap();
        let b = sector_spectrum(g, ell, 3, &SpectralOptions { h: 0.0025, ..Default::default() }).unwrap();
        for k in 0..3 {
            assert!((a.eigenvalues[k] / b.eigenvalues[k] - 1.0).abs() < 1e-4, "ℓ={ell} k={k}");
        }
    }
}

#[test]
fn eigenvectors_are_b_orthonormal() {
    let g = gs(3, 2.0);
    let s = sector_spectrum(g, 1, 3, &SpectralOptions::default()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let v = s.b_inner(g, i, j);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-8, "({i},{j}) = {v}");
        }
    }
}

#[test]
fn short_domain_is_rejected() {
    let g = gs(1, 3.0);
    let r = sector_spectrum(g, 0, 6, &SpectralOptions { r_max: 3.0, ..Default::default() });
    assert!(matches!(r, Err(Error::Discretization(_))));
    assert!(sector_spectrum(g, 2, 1, &SpectralOptions::default()).is_err());
    assert!(sector_spectrum(gs(3, 2.0), 5, 1, &SpectralOptions::default()).is_err());
}

#[test]
fn csv_layout() {
    let s = sector_spectrum(gs(1, 3.0), 0, 2, &SpectralOptions { h: 0.05, ..Default::default() }).unwrap();
    let csv = s.eigenvectors_csv(2);
    assert!(csv.starts_with("r,phi0,phi1\n"));
    assert_eq!(csv.lines().count(), s.r.len() + 1);
}

fn coercivity_grid(d: usize) -> TorusGrid {
    match d {
        1 => TorusGrid::new(1, 1024, 80.0).unwrap(),
        _ => TorusGrid::new(d, 64, 80.0).unwrap(),
    }
}

#[test]
fn coercivity_saturated_by_ground_state_and_translations() {
    let g = gs(1, 3.0);
    let kappa = estimate_kappa(g, &SpectralOptions::default()).unwrap().kappa;
    let grid = coercivity_grid(1);
    let one = num_complex::Complex64::new(1.0, 0.0);
    let q = soliton_component(g, grid, &[0.0], one);
    let dq = soliton_gradient(g, grid, &[0.0], one, 0);
    let reps = coercivity_check(g, kappa, &[q, dq]).unwrap();
    for r in &reps {
        assert!(r.margin >= -1e-6 * r.lhs, "{r:?}");
        assert!(r.relative_margin.abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn coercivity_holds_for_random_fields() {
    let g = gs(1, 3.0);
    let kappa = estimate_kappa(g, &SpectralOptions::default()).unwrap().kappa;
    let grid = coercivity_grid(1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials: Vec<TorusField> = (0..100)
        .map(|_| {
            let modes: Vec<(f64, f64, f64, f64)> = (0..6)
                .map(|_| {
                    let k = rng.random_range(0..24) as f64 * 2.0 * PI / grid.l;
                    (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI), rng.random_range(1.0..8.0))
                })
                .collect();
            TorusField::from_fn(grid, move |x| {
                modes.iter().map(|(k, a, ph, w)| a * (k * x[0] + ph).cos() * (-(x[0] / w).powi(2)).exp()).sum()
            })
        })
        .collect();
    for r in coercivity_check(g, kappa, &trials).unwrap() {
        assert!(r.margin >= -1e-6 * r.lhs, "{r:?}");
    }
}

#[test]
fn coercivity_in_three_dimensions_for_near_kernel_fields() {
    let g = gs(3, 2.0);
    let kappa = estimate_kappa(g, &SpectralOptions::default()).unwrap().kappa;
    let grid = TorusGrid::new(3, 128, 80.0).unwrap();
    let one = num_complex::Complex64::new(1.0, 0.0);
    let q = soliton_component(g, grid, &[0.0; 3], one);
    let dq = soliton_gradient(g, grid, &[0.0; 3], one, 2);
    let mix = q.add(&dq.scale(0.5));
    for r in coercivity_check(g, kappa, &[q, dq, mix]).unwrap() {
        assert!(r.margin >= -1e-3 * r.lhs, "{r:?}");
    }
}
