use proptest::prelude::*;
use solstab::special::{phi, psi, Branch, PhiPsi, StabilityModulus};
use solstab::ProblemParams;

fn modulus(d: usize, p: f64) -> StabilityModulus {
    StabilityModulus::new(ProblemParams::new(d, p).unwrap()).unwrap()
}

#[test]
fn phi_examples() {
    assert!((phi(1, 5.0) - (-5f64).exp()).abs() < 1e-18);
    assert!((phi(3, 10.0) - (-10f64).exp() / 10.0).abs() < 1e-20);
    assert!((phi(2, 4.0) - 0.5 * (-4f64).exp()).abs() < 1e-18);
    assert!((phi(1, 5.0) - 6.7379e-3).abs() < 1e-7);
    assert!((phi(3, 10.0) - 4.5400e-6).abs() < 1e-9);
    assert!((phi(2, 4.0) - 9.1578e-3).abs() < 1e-7);
}

#[test]
fn psi_examples() {
    assert!((psi(1, (-5f64).exp()).unwrap() - 5.0).abs() < 1e-13);
    assert!((psi(3, (-10f64).exp() / 10.0).unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn psi_round_trip_fifty_points() {
    for d in 1..=5 {
        let pp = PhiPsi::new(d);
        let mut last = 0.0;
        for k in 0..50 {
            let s = 10f64.powf(-1.0 - 0.2 * k as f64);
            let t = pp.psi(s).unwrap();
            assert!(((pp.phi(t) - s) / s).abs() < 1e-12);
            assert!(t > last, "psi must decrease in s");
            last = t;
        }
    }
}

#[test]
fn psi_in_log_space_below_underflow() {
    let pp = PhiPsi::new(3);
    let ln_s = -2000.0;
    let t = pp.psi_log(ln_s).unwrap();
    assert!(((pp.log_phi(t) - ln_s) / ln_s).abs() < 1e-14);
}

#[test]
fn branch_table() {
    assert_eq!(Branch::for_params(3, 3.0).unwrap(), Branch::Linear);
    assert_eq!(Branch::for_params(4, 2.0).unwrap(), Branch::Linear);
    assert_eq!(Branch::for_params(5, 2.0).unwrap(), Branch::Linear);
    assert_eq!(Branch::for_params(1, 2.0).unwrap(), Branch::LogD1);
    assert_eq!(Branch::for_params(2, 2.0).unwrap(), Branch::PsiD2);
    assert_eq!(Branch::for_params(3, 2.0).unwrap(), Branch::PsiD3);
    for d in 1..=5 {
        assert_eq!(Branch::for_params(d, 1.5).unwrap(), Branch::Subquadratic);
        assert_eq!(Branch::for_params(d, 2.5).unwrap(), Branch::Linear);
    }
    assert!(Branch::for_params(6, 2.0).is_err());
    assert!(Branch::for_params(2, 1.0).is_err());
}

#[test]
fn modulus_examples() {
    assert_eq!(modulus(3, 3.0).eval(0.01).unwrap(), 0.01);
    let e1 = (-1f64).exp();
    assert!((modulus(1, 2.0).eval(e1).unwrap() - 2f64.sqrt() * e1).abs() < 1e-15);
    assert!((modulus(1, 2.0).eval(e1).unwrap() - 0.5203).abs() < 1e-4);
    let f = modulus(2, 2.0).eval(phi(2, 8.0)).unwrap();
    let direct = 8f64.powf(-0.25) * (-8f64).exp();
    assert!((f / direct - 1.0).abs() < 1e-12);
    for (d, p) in [(1, 2.0), (2, 2.0), (3, 2.0), (2, 1.5), (4, 2.0)] {
        assert_eq!(modulus(d, p).eval(0.0).unwrap(), 0.0);
        assert!(modulus(d, p).eval(1e-280).unwrap() < 1e-120);
    }
}

#[test]
fn psi_d3_matches_composition() {
    let m = modulus(3, 2.0);
    for t in [0.5, 3.0, 12.0, 40.0] {
        let f = m.eval(phi(3, t)).unwrap();
        let direct = (-t).exp() / t * (t + 2.0).ln().sqrt();
        assert!((f / direct - 1.0).abs() < 1e-12);
    }
}

#[test]
fn subquadratic_composition_identity() {
    for d in 1..=5 {
        for p in [1.1, 1.5, 1.9] {
            let m = modulus(d, p);
            for t in [0.01, 1.0, 7.5, 30.0, 300.0] {
                let ln_f = m.log_eval(m.phipsi.log_phi(t)).unwrap();
                let direct = (0.25 - 0.5 * p) * (d as f64 - 1.0) * t.ln() - 0.5 * p * t;
                assert!((ln_f - direct).abs() < 1e-11 * direct.abs().max(1.0), "d={d} p={p} t={t}");
            }
        }
    }
}

#[test]
fn monotone_limits() {
    assert!(modulus(3, 3.0).monotone_limit().is_infinite());
    assert!(modulus(1, 2.0).monotone_limit().is_infinite());
    let m = modulus(2, 2.0);
    assert_eq!(m.monotone_limit(), m.phipsi.s_max());
    assert!(m.eval(m.monotone_limit() * 1.5).is_err());
}

proptest! {
    #[test]
    fn psi_inverts_phi_over_ten_decades(d in 1usize..=5, e in -12.0f64..-2.0) {
        let s = 10f64.powf(e);
        let pp = PhiPsi::new(d);
        let t = pp.psi(s).unwrap();
        prop_assert!(((pp.phi(t) - s) / s).abs() < 1e-12);
    }

    #[test]
    fn phi_of_psi_fixes_t(d in 1usize..=5, t in 1e-3f64..600.0) {
        let pp = PhiPsi::new(d);
        let back = pp.psi_log(pp.log_phi(t)).unwrap();
        prop_assert!(((back - t) / t).abs() < 1e-12);
    }

    #[test]
    fn modulus_is_monotone(case in 0usize..7, a in -300.0f64..-0.01, b in -300.0f64..-0.01) {
        let (d, p) = [(1, 2.0), (2, 2.0), (3, 2.0), (4, 2.0), (1, 1.5), (3, 1.2), (2, 3.0)][case];
        let m = modulus(d, p);
        let lim = m.monotone_limit().min(1.0).ln();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi < lim);
        prop_assert!(m.log_eval(lo).unwrap() <= m.log_eval(hi).unwrap());
    }
}
