use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solstab::geometry::*;
use solstab::Error;

fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect()).collect()
}

/// Brute force over every transformed point, independent of the library's own check.
fn brute_force(points: &[Vec<f64>], res: &ProjectionResult) {
    let d = points[0].len();
    let m = &res.rotation;
    for i in 0..d {
        for j in 0..d {
            let g: f64 = (0..d).map(|k| m[i][k] * m[j][k]).sum();
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let e: f64 = (0..d).map(|k| m[i][k] * res.direction[k]).sum();
        assert!((e - if i == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
    }
    let base = &points[res.base_index];
    let mut seen = vec![false; points.len()];
    for (pos, &k) in res.order.iter().enumerate() {
        seen[k] = true;
        let y: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i][j] * (points[k][j] - base[j])).sum()).collect();
        for (a, b) in y.iter().zip(&res.transformed[pos]) {
            assert!((a - b).abs() < 1e-10);
        }
        if pos == 0 {
            assert!(y.iter().all(|v| v.abs() < 1e-14));
            continue;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(y[0] > 0.0);
        assert!(y[0] / norm >= res.c_achieved - 1e-14);
    }
    assert!(seen.iter().all(|&s| s));
    assert!(res.c_achieved > 0.0);
    assert!(res.c_achieved >= res.delta - 1e-12);
}

#[test]
fn collinear_points_use_the_line() {
    let pts: Vec<Vec<f64>> = [3.0, -1.0, 0.5, 7.0].iter().map(|&t| vec![1.0 + 2.0 * t, -t, 0.5 * t]).collect();
    let res = project_points(&pts, 0.1).unwrap();
    assert!((res.c_achieved - 1.0).abs() < 1e-12);
    assert_eq!(res.base_index, 1);
    assert_eq!(res.order, vec![1, 2, 0, 3]);
    brute_force(&pts, &res);
}

#[test]
fn two_points_give_their_difference() {
    let pts = vec![vec![1.0, 2.0], vec![4.0, 6.0]];
    let res = project_points(&pts, 0.5).unwrap();
    assert!((res.direction[0] - 0.6).abs() < 1e-15 && (res.direction[1] - 0.8).abs() < 1e-15);
    assert_eq!(res.base_index, 0);
    assert_eq!(res.c_achieved, 1.0);
    assert!(res.meets_target);
}

#[test]
fn six_points_in_three_dimensions() {
    let pts = random_points(7, 6, 3);
    let res = project_points(&pts, 0.01).unwrap();
    brute_force(&pts, &res);
    assert!(res.meets_target);
    assert!((verify_projection(&res, res.c_achieved).unwrap() - res.c_achieved).abs() < 1e-15);
}

#[test]
fn rotation_is_proper() {
    let pts = random_points(3, 4, 3);
    let res = project_points(&pts, 0.01).unwrap();
    let m = &res.rotation;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    assert!((det - 1.0).abs() < 1e-12);
}

#[test]
fn deterministic_point_sets_pass() {
    for s in 0..60u64 {
        let d = 1 + (s % 4) as usize;
        let n = 2 + (s % 6) as usize;
        let pts = random_points(100 + s, n, d);
        let res = project_points(&pts, 1e-3).unwrap();
        brute_force(&pts, &res);
        assert_eq!(res, project_points(&pts, 1e-3).unwrap());
    }
}

#[test]
fn rejects_duplicates_and_mismatched_dimensions() {
    assert!(matches!(project_points(&[vec![1.0, 2.0], vec![1.0, 2.0]], 0.1), Err(Error::DegenerateInput(_))));
    assert!(project_points(&[vec![1.0, 2.0], vec![1.0]], 0.1).is_err());
    assert!(project_points(&vec![vec![1.0]; 65], 0.1).is_err());
    assert!(project_points(&[vec![0.0], vec![1.0]], 1.5).is_err());
}

#[test]
fn single_point_is_the_origin() {
    let res = project_points(&[vec![2.0, -1.0]], 0.1).unwrap();
    assert_eq!(res.transformed, vec![vec![0.0, 0.0]]);
    assert_eq!(res.c_achieved, 1.0);
}

#[test]
fn candidates_are_unit_vectors() {
    for d in 1..=5 {
        for v in candidate_directions(d, 200) {
            assert_eq!(v.len(), d);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn projection_postcondition(seed in 0u64..10_000, n in 2usize..7, d in 1usize..5) {
        let pts = random_points(seed, n, d);
        let res = project_points(&pts, 1e-3).unwrap();
        brute_force(&pts, &res);
    }

    #[test]
    fn invariant_under_translation(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let pts = random_points(seed, 5, 3);
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x + shift).collect()).collect();
        let a = project_points(&pts, 1e-3).unwrap();
        let b = project_points(&moved, 1e-3).unwrap();
        prop_assert_eq!(a.base_index, b.base_index);
        prop_assert!((a.c_achieved - b.c_achieved).abs() < 1e-9);
    }
}
