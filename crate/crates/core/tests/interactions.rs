use std::sync::OnceLock;

use proptest::prelude::*;
use solstab::fields::{interaction_term_f, Norm, SolitonConfig, TorusGrid};
use solstab::groundstate::{solve_ground_state, GroundState};
use solstab::interactions::*;
use solstab::quadrature::{integrate, QuadOptions};
use solstab::ProblemParams;

fn gs(d: usize, p: f64) -> &'static GroundState {
    static G: OnceLock<Vec<GroundState>> = OnceLock::new();
    let all = G.get_or_init(|| {
        [(1, 3.0), (1, 2.0), (2, 2.0), (3, 2.0), (1, 1.5), (2, 1.5)]
            .iter()
            .map(|&(d, p)| solve_ground_state(ProblemParams::new(d, p).unwrap(), 1e-10).unwrap())
            .collect()
    });
    all.iter().find(|g| g.d() == d && g.p() == p).expect("ground state in fixture list")
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn direct(f: impl Fn(f64) -> f64, sep: f64) -> f64 {
    let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 0.0, max_intervals: 4000 };
    integrate(f, -sep - 50.0, 50.0, &[0.0, -sep / 2.0, -sep], opts).unwrap().value
}

#[test]
fn overlap_matches_closed_form_quadrature_in_one_dimension() {
    let sep = 10.0;
    let shift = 2.0 * sep;
    let q = |x: f64| 2f64.sqrt() * sech(x);
    let oracle = direct(|x| q(x).powi(4) * q(x + sep).powi(2) * shift.exp(), sep).ln() - shift;
    let got = overlap_integral(gs(1, 3.0), 4.0, 2.0, sep).unwrap();
    assert!(((got - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
    assert!((got.exp() / oracle.exp() - 1.0).abs() < 1e-8);
}

#[test]
fn square_square_matches_sech_identity() {
    // ∫ sech²x sech²(x+R) dx = 4 (R coth R − 1) / sinh² R
    for sep in [6.0, 10.0, 20.0, 40.0] {
        let ln_sinh = sep + (-(-2.0 * sep as f64).exp_m1()).ln() - 2f64.ln();
        let oracle = (16.0 * (sep / sep.tanh() - 1.0)).ln() - 2.0 * ln_sinh;
        let got = square_square_integral(gs(1, 3.0), sep).unwrap();
        assert!((got.exp() / oracle.exp() - 1.0).abs() < 1e-8, "R={sep}: {got} vs {oracle}");
        let quad = direct(|x| 4.0 * (sech(x) * sech(x + sep)).powi(2) * (2.0 * sep).exp(), sep).ln() - 2.0 * sep;
        assert!((quad - oracle).abs() < 1e-10);
    }
}

#[test]
fn gradient_overlap_matches_closed_form_quadrature() {
    let sep = 12.0;
    let q = |x: f64| 2f64.sqrt() * sech(x);
    let dq = |x: f64| -2f64.sqrt() * sech(x) * x.tanh();
    let oracle = direct(|x| q(x).powi(2) * dq(x) * q(x + sep) * sep.exp(), sep);
    let got = gradient_overlap(gs(1, 3.0), sep).unwrap();
    assert_eq!(got.sign, 1.0);
    assert!(((got.ln_abs + sep).exp() / oracle - 1.0).abs() < 1e-8);
}

#[test]
fn subquadratic_matches_closed_form_quadrature() {
    let p = 1.5;
    let q = |x: f64| 1.5625 * sech(x / 4.0).powi(4);
    for sep in [10.0, 16.0] {
        let f = |x: f64| {
            let (a, b) = (q(x), q(x + sep));
            ((a + b).powf(p) - a.powf(p) - b.powf(p)).powi(2) * (p * sep).exp()
        };
        let oracle = direct(f, sep);
        let got = subquadratic_cross_norm(gs(1, 1.5), sep).unwrap();
        assert!(((got + p * sep).exp() / oracle - 1.0).abs() < 1e-8, "R={sep}");
    }
}

#[test]
fn c_bar_closed_forms() {
    // p = 3: (2√2/3)·2√2·∫cosh x sech³x = 16/3. p = 2: 3·(9/4)·(8 − 8/3) = 36.
    assert!((c_bar(gs(1, 3.0)).unwrap() - 16.0 / 3.0).abs() < 1e-9);
    assert!((c_bar(gs(1, 2.0)).unwrap() - 36.0).abs() < 1e-8);
}

#[test]
fn overlap_is_symmetric_in_exponents() {
    let g = gs(2, 2.0);
    for sep in [8.0, 14.0] {
        let a = overlap_integral(g, 3.0, 1.5, sep).unwrap();
        let b = overlap_integral(g, 1.5, 3.0, sep).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn reduced_quadrature_matches_cartesian_sum_in_two_dimensions() {
    let g = gs(2, 2.0);
    let sep = 10.0;
    let h = 0.04;
    let (nx, ny) = (((sep + 24.0) / h) as i64, (12.0 / h) as i64);
    let mut s = 0.0;
    for i in 0..=nx {
        let x = -sep - 12.0 + i as f64 * h;
        for j in -ny..=ny {
            let y = j as f64 * h;
            let (r, t) = ((x * x + y * y).sqrt(), ((x + sep).powi(2) + y * y).sqrt());
            s += (2.0 * (g.log_value(r) + g.log_value(t)) + 2.0 * sep).exp();
        }
    }
    let cart = (s * h * h).ln() - 2.0 * sep;
    assert!((cart - square_square_integral(g, sep).unwrap()).abs() < 1e-8);
}

#[test]
fn subquadratic_agrees_with_grid_interaction_term() {
    for (d, n) in [(1usize, 4096usize), (2, 512)] {
        let g = gs(d, 1.5);
        let sep = 10.0;
        let grid = TorusGrid::new(d, n, 2.0 * sep + 80.0).unwrap();
        let cfg = SolitonConfig::pair(g.params, sep).unwrap();
        let f = interaction_term_f(g, &cfg, grid).unwrap();
        let grid_val = 2.0 * f.norm(Norm::L2).ln();
        let quad = subquadratic_cross_norm(g, sep).unwrap();
        assert!((grid_val - quad).exp_m1().abs() < 0.05, "d={d}: {grid_val} vs {quad}");
    }
}

#[test]
fn integrals_decrease_in_separation() {
    let g = gs(2, 2.0);
    let s = gs(2, 1.5);
    let mut last = [f64::INFINITY; 4];
    for sep in (8..=20).map(f64::from) {
        let now = [
            overlap_integral(g, 2.0, 1.0, sep).unwrap(),
            square_square_integral(g, sep).unwrap(),
            gradient_overlap(g, sep).unwrap().ln_abs,
            subquadratic_cross_norm(s, sep).unwrap(),
        ];
        for k in 0..4 {
            assert!(now[k] < last[k], "kind {k} at R={sep}");
        }
        last = now;
    }
}

#[test]
fn finite_in_log_space_far_beyond_underflow() {
    let g = gs(3, 2.0);
    let ss = square_square_integral(g, 60.0).unwrap();
    assert!(ss.is_finite() && ss < -100.0 && ss > -140.0, "{ss}");
    let gr = gradient_overlap(g, 60.0).unwrap();
    assert!(gr.ln_abs.is_finite() && gr.sign == 1.0);
    let sq = subquadratic_cross_norm(gs(2, 1.5), 60.0).unwrap();
    assert!(sq.is_finite() && sq < -75.0, "{sq}");
    // Well past e^{−745}.
    let far = square_square_integral(gs(1, 3.0), 400.0).unwrap();
    assert!((far - (16.0 * 399f64).ln() + 800.0 - 4f64.ln()).abs() < 1e-6);
}

#[test]
fn gradient_overlap_positive_and_doubles_per_leading_law() {
    for (d, p) in [(1, 3.0), (2, 2.0), (3, 2.0)] {
        let g = gs(d, p);
        let a = gradient_overlap(g, 12.0).unwrap();
        let b = gradient_overlap(g, 24.0).unwrap();
        assert!(a.sign > 0.0 && b.sign > 0.0);
        let predicted = -12.0 - (d as f64 - 1.0) / 2.0 * 2f64.ln();
        let diff = b.ln_abs - a.ln_abs;
        assert!(((diff - predicted) / predicted).abs() < 0.02, "d={d}: {diff} vs {predicted}");
    }
}

#[test]
fn overlap_law_in_three_dimensions() {
    let g = gs(3, 2.0);
    let rs: Vec<f64> = (10..=20).map(f64::from).collect();
    let s = scan(g, InteractionKind::Overlap { alpha: 2.0, beta: 1.0 }, &rs).unwrap();
    assert_eq!(s.law.rate, -1.0);
    assert_eq!(s.law.power, -1.0);
    assert!(s.rate_error() < 0.01 && s.power_error() < 0.05, "{:?}", s.fit);
    assert!(!s.fit.unreliable);
}

#[test]
fn fit_recovers_synthetic_laws() {
    let rs: Vec<f64> = (10..=24).map(f64::from).collect();
    let ys: Vec<f64> = rs.iter().map(|r| -1.7 * r - 0.75 * r.ln() + 2.5).collect();
    let fit = fit_law(&rs, &ys, FitModel::Plain).unwrap();
    assert!((fit.rate + 1.7).abs() < 1e-10 && (fit.power + 0.75).abs() < 1e-8 && (fit.log_prefactor - 2.5).abs() < 1e-8);
    assert!(fit.rms_residual < 1e-10);

    let ys: Vec<f64> = rs.iter().map(|r| -2.0 * r - 2.0 * r.ln() + (r.ln() + 0.7).ln() + 1.0).collect();
    let fit = fit_law(&rs, &ys, FitModel::LogLog).unwrap();
    assert!((fit.log_shift.unwrap() - 0.7).abs() < 1e-4, "{:?}", fit.log_shift);
    assert!((fit.rate + 2.0).abs() < 1e-6 && (fit.power + 2.0).abs() < 1e-5);
    assert!((fit.predict(17.0) - ys[7]).abs() < 1e-8);
}

#[test]
fn fit_rejects_short_or_unsorted_samples() {
    let rs = [10.0, 11.0, 12.0, 13.0, 14.0];
    assert!(fit_law(&rs, &[0.0; 5], FitModel::Plain).is_err());
    let rs = [10.0, 12.0, 11.0, 13.0, 14.0, 15.0];
    assert!(fit_law(&rs, &[0.0; 6], FitModel::Plain).is_err());
}

#[test]
fn noisy_fit_is_flagged() {
    let rs: Vec<f64> = (10..=24).map(f64::from).collect();
    let ys: Vec<f64> = rs.iter().enumerate().map(|(i, r)| -r + if i % 2 == 0 { 0.2 } else { -0.2 }).collect();
    assert!(fit_law(&rs, &ys, FitModel::Plain).unwrap().unreliable);
}

#[test]
fn scan_csv_and_summary() {
    let rs: Vec<f64> = (10..=16).map(f64::from).collect();
    let s = scan(gs(1, 3.0), InteractionKind::SquareSquare, &rs).unwrap();
    let csv = s.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "R,log_integral,predicted_log,residual");
    assert_eq!(lines.len(), rs.len() + 1);
    assert!(!csv.contains('\r'));
    let cols: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[0], 10.0);
    assert!((cols[1] - cols[2] - cols[3]).abs() < 1e-12);
    let v: serde_json::Value = serde_json::from_str(&s.summary_json().unwrap()).unwrap();
    assert_eq!(v["kind"]["kind"], "square-square");
    assert_eq!(v["fit"]["samples"], 7);
}

#[test]
fn rejects_bad_arguments() {
    assert!(overlap_integral(gs(1, 3.0), 2.0, 1.0, 1.5).is_err());
    assert!(overlap_integral(gs(1, 3.0), -1.0, 1.0, 10.0).is_err());
    assert!(subquadratic_cross_norm(gs(1, 3.0), 10.0).is_err());
}

#[test]
fn sum_power_single_summand_vanishes() {
    for p in [1.5, 2.0, 2.5, 3.5] {
        let r = check_sum_power_inequalities(p, &[0.7, 0.0, 0.0, 0.0]).unwrap();
        assert!(r.lhs.abs() < 1e-15);
        assert_eq!(r.ratio, 0.0);
    }
}

#[test]
fn sum_power_quadratic_identity() {
    let r = check_sum_power_inequalities(2.0, &[0.3, 1.7]).unwrap();
    assert_eq!(r.branch, SumPowerBranch::Pairwise);
    assert!((r.lhs - 2.0 * 0.3 * 1.7).abs() < 1e-14);
    assert!((r.ratio - 0.5).abs() < 1e-14);
    assert_eq!(check_sum_power_inequalities(2.5, &[1.0, 1.0]).unwrap().branch, SumPowerBranch::Moderate);
    assert_eq!(check_sum_power_inequalities(3.5, &[1.0, 1.0]).unwrap().branch, SumPowerBranch::Large);
    assert!(check_sum_power_inequalities(2.0, &[-1.0]).is_err());
}

#[test]
fn sum_power_constant_is_stable_under_resampling() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    for p in [1.5, 2.5, 3.5] {
        let worst = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut max: f64 = 0.0;
            for _ in 0..100_000 {
                let m = rng.random_range(2..=5);
                let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0f64).powi(3) * 10f64.powf(rng.random_range(-3.0..3.0))).collect();
                max = max.max(check_sum_power_inequalities(p, &a).unwrap().ratio);
            }
            max
        };
        let (a, b) = (worst(1), worst(2));
        assert!(a.is_finite() && a < 50.0, "p={p}: {a}");
        assert!((a / b - 1.0).abs() < 0.25, "p={p}: {a} vs {b}");
    }
}

proptest! {
    #[test]
    fn sum_power_ratio_bounded(p in 1.05f64..6.0, a in prop::collection::vec(0.0f64..5.0, 1..6)) {
        let r = check_sum_power_inequalities(p, &a).unwrap();
        prop_assert!(r.ratio.is_finite());
        prop_assert!(r.ratio < 100.0, "ratio {}", r.ratio);
    }

    #[test]
    fn sum_power_scales_homogeneously(p in 1.05f64..6.0, a in prop::collection::vec(0.01f64..5.0, 2..5), s in 0.1f64..10.0) {
        let r1 = check_sum_power_inequalities(p, &a).unwrap();
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let r2 = check_sum_power_inequalities(p, &scaled).unwrap();
        prop_assert!((r1.ratio - r2.ratio).abs() <= 1e-8 * r1.ratio.max(1e-3));
    }
}
