use solstab::groundstate::{extract_c_q, solve_ground_state, solve_ground_state_with, GroundState, GroundStateOptions};
use solstab::{Error, ProblemParams};

fn gs(d: usize, p: f64) -> GroundState {
    solve_ground_state(ProblemParams::new(d, p).unwrap(), 1e-10).unwrap()
}

fn closed_form(p: f64, x: f64) -> (f64, f64) {
    let k = (p - 1.0) / 2.0;
    let base = (p + 1.0) / (2.0 * (k * x).cosh().powi(2));
    let q = base.powf(1.0 / (p - 1.0));
    // Q' = −(2/(p−1)) k tanh(kx) Q = −tanh(kx) Q
    (q, -(k * x).tanh() * q)
}

/// Fixed-step RK4 shooting with bisection; shares nothing with the library integrator.
fn rk4_amplitude(d: usize, p: f64, h: f64) -> f64 {
    let dd = d as f64;
    let f = |r: f64, y: [f64; 2]| {
        let nl = y[0].signum() * y[0].abs().powf(p);
        [y[1], -(dd - 1.0) / r * y[1] + y[0] - nl]
    };
    let overshoots = |a: f64| -> bool {
        let r0 = 1e-4;
        let c = (a - a.powf(p)) / dd;
        let mut y = [a + 0.5 * c * r0 * r0, c * r0];
        let mut r = r0;
        while r < 40.0 {
            let k1 = f(r, y);
            let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            r += h;
            if y[0] < 0.0 {
                return true;
            }
            if y[1] > 0.0 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (1.0, 20.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if overshoots(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn one_dimensional_amplitudes_match_closed_form() {
    assert!((gs(1, 3.0).q0 - 2f64.sqrt()).abs() < 1e-10);
    assert!((gs(1, 2.0).q0 - 1.5).abs() < 1e-10);
}

#[test]
fn one_dimensional_profile_matches_closed_form_uniformly() {
    for p in [2.0, 3.0, 1.5, 4.0] {
        let g = gs(1, p);
        let mut worst: f64 = 0.0;
        let mut worst_d: f64 = 0.0;
        for k in 0..=30_000 {
            let x = k as f64 * 1e-3;
            let (q, dq) = g.eval(x);
            let (qe, dqe) = closed_form(p, x);
            worst = worst.max((q - qe).abs());
            worst_d = worst_d.max((dq - dqe).abs());
        }
        assert!(worst < 1e-9, "p={p}: {worst:e}");
        assert!(worst_d < 1e-9, "p={p}: {worst_d:e}");
        // Uniform bound over the whole truncated domain at the requested tolerance.
        let sup = g.r.iter().map(|&x| (g.value(x) - closed_form(p, x).0).abs()).fold(0.0, f64::max);
        assert!(sup < g.tol, "p={p}: {sup:e}");
    }
}

#[test]
fn eval_at_ten_matches_sech_formula() {
    let g = gs(1, 3.0);
    let s = 2f64.sqrt();
    let sech = 1.0 / 10f64.cosh();
    let (q, dq) = g.eval(10.0);
    assert!((q - s * sech).abs() < 1e-12);
    assert!((dq + s * sech * 10f64.tanh()).abs() < 1e-12);
    assert_eq!(g.eval(0.0), (g.q0, 0.0));
}

#[test]
fn tail_constant_from_closed_form_expansion() {
    // √2 sech r = 2√2 e^{−r}(1 + O(e^{−2r})) and (3/2) sech²(r/2) = 6 e^{−r}(1 + O(e^{−r})).
    assert!((gs(1, 3.0).c_q / (2.0 * 2f64.sqrt()) - 1.0).abs() < 1e-9);
    assert!((gs(1, 2.0).c_q / 6.0 - 1.0).abs() < 1e-9);
    let fit = extract_c_q(&gs(3, 2.0)).unwrap();
    assert!(fit.c_q > 0.0 && fit.drift < 1e-3 && fit.raw_variation < 1e-3);
}

#[test]
fn three_dimensional_amplitude_against_rk4_oracle() {
    let g = gs(3, 2.0);
    let a1 = rk4_amplitude(3, 2.0, 2e-3);
    let a2 = rk4_amplitude(3, 2.0, 1e-3);
    assert!((a1 - a2).abs() < 1e-8, "oracle not converged: {a1} {a2}");
    assert!((g.q0 - a2).abs() < 1e-6, "{} vs {a2}", g.q0);
}

#[test]
fn profile_is_positive_decreasing_and_regular() {
    for (d, p) in [(1, 3.0), (2, 2.0), (3, 2.0), (3, 3.0), (4, 1.8), (5, 2.0)] {
        let g = gs(d, p);
        assert_eq!(g.dq[0], 0.0);
        assert!(g.q.iter().all(|&v| v > 0.0));
        assert!(g.q.windows(2).all(|w| w[1] < w[0]), "d={d} p={p}");
        assert!(g.dq[1..].iter().all(|&v| v < 0.0));
    }
}

#[test]
fn ode_residual_below_stored_tolerance() {
    for (d, p) in [(1, 3.0), (2, 2.0), (3, 2.0), (3, 3.0), (2, 1.5), (5, 2.0)] {
        let g = gs(d, p);
        let worst = g.ode_residuals().into_iter().fold(0.0, f64::max);
        assert!(worst < g.diagnostics.residual_tolerance, "d={d} p={p}: {worst:e}");
    }
}

#[test]
fn residual_shrinks_with_integrator_tolerance() {
    let params = ProblemParams::new(3, 2.0).unwrap();
    let residual = |rtol: f64| {
        let mut o = GroundStateOptions::new(1e-6);
        o.rtol = Some(rtol);
        let g = solve_ground_state_with(params, o).unwrap();
        g.ode_residuals().into_iter().fold(0.0, f64::max)
    };
    let coarse = residual(1e-8);
    let fine = residual(1e-11);
    assert!(fine < coarse / 30.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn nehari_identity() {
    for (d, p) in [(1, 3.0), (2, 2.0), (3, 2.0), (3, 3.0), (4, 2.0), (5, 2.0)] {
        let (lhs, rhs) = gs(d, p).nehari_sides();
        assert!(((lhs - rhs) / lhs).abs() < 1e-6, "d={d} p={p}");
    }
}

#[test]
fn tail_formula_beyond_truncation() {
    let g = gs(2, 2.0);
    let r = 2.0 * g.r_max;
    let model = g.c_q * r.powf(-0.5) * (-r).exp();
    assert_eq!(g.value(r) / model, 1.0);
    let (inside, _) = g.eval(g.r_max);
    let (outside, _) = g.eval(g.r_max * (1.0 + 1e-12));
    assert!((inside - outside).abs() < g.tol * inside.max(1e-300).max(g.tol));
    assert!((g.log_value(r) - model.ln()).abs() < 1e-12);
    assert!(g.log_value(3000.0).is_finite());
}

#[test]
fn tail_correction_decays_like_inverse_r() {
    // In d = 2 the plateau Q r^{1/2} e^r approaches c_Q with a −1/(8r) correction.
    let g = gs(2, 2.0);
    let pts: Vec<(f64, f64)> = g
        .r
        .iter()
        .zip(&g.q)
        .filter(|(r, _)| **r >= g.r_max / 2.0)
        .step_by(50)
        .map(|(&r, &q)| (r.ln(), (q * r.sqrt() * r.exp() / g.c_q - 1.0).abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.2, "{slope}");
    let fit = extract_c_q(&g).unwrap();
    assert!((fit.correction_exponent.unwrap() + 1.0).abs() < 0.2);
    assert!(extract_c_q(&gs(3, 2.0)).unwrap().correction_exponent.is_none());
}

#[test]
fn json_round_trip_preserves_evaluation() {
    let g = gs(3, 2.0);
    let back = GroundState::from_json(&g.to_json().unwrap()).unwrap();
    for r in [0.0, 1e-3, 0.05, 0.7, 3.3, 17.0, g.r_max, 2.0 * g.r_max] {
        assert_eq!(g.eval(r), back.eval(r));
    }
    let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["integrator_order"], 5);
    assert!(GroundState::from_json("{\"format\":\"x\"}").is_err());
}

#[test]
fn rejects_out_of_range_tolerance() {
    let params = ProblemParams::new(1, 3.0).unwrap();
    assert!(matches!(solve_ground_state(params, 1e-3), Err(Error::InvalidParams(_))));
    assert!(matches!(solve_ground_state(params, 1e-16), Err(Error::InvalidParams(_))));
}

#[test]
fn short_truncation_is_rejected_by_tail_fit() {
    let params = ProblemParams::new(2, 1.2).unwrap();
    let mut o = GroundStateOptions::new(1e-8);
    o.r_max = Some(30.0);
    // p close to 1: nonlinear corrections e^{−(p−1)r} still visible at r = 15..30.
    match solve_ground_state_with(params, o) {
        Err(Error::TailNotResolved { drift, .. }) => assert!(drift > 1e-3),
        other => panic!("expected TailNotResolved, got {:?}", other.map(|g| g.diagnostics)),
    }
}
