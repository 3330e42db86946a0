use std::sync::Arc;

use jetvar_core::{JetScalar, JetShape};
use proptest::prelude::*;

fn close(a: &JetScalar, b: &JetScalar, tol: f64) -> bool {
    let scale = 1f64.max(a.max_abs()).max(b.max_abs());
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).abs() <= tol * scale)
}

fn shape_strategy() -> impl Strategy<Value = Arc<JetShape>> {
    prop::collection::vec(0usize..=3, 0..=2).prop_map(|o| JetShape::new(&o).unwrap())
}

fn jets(n: usize) -> impl Strategy<Value = (Arc<JetShape>, Vec<JetScalar>)> {
    shape_strategy().prop_flat_map(move |s| {
        let len = s.len();
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, len), n).prop_map(move |cs| {
            let js = cs
                .into_iter()
                .map(|c| JetScalar::from_coeffs(&s, c).unwrap())
                .collect();
            (s.clone(), js)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms((_, j) in jets(3)) {
        let (a, b, c) = (&j[0], &j[1], &j[2]);
        prop_assert!(close(&(a * b), &(b * a), 1e-12));
        prop_assert!(close(&(&(a * b) * c), &(a * &(b * c)), 1e-12));
        prop_assert!(close(&(a * &(b + c)), &(&(a * b) + &(a * c)), 1e-12));
    }

    #[test]
    fn exponential_is_a_homomorphism((_, j) in jets(2)) {
        let (a, b) = (&j[0], &j[1]);
        prop_assert!(close(&(a + b).exp(), &(&a.exp() * &b.exp()), 1e-10));
    }

    #[test]
    fn log_inverts_exp((_, j) in jets(1)) {
        prop_assert!(close(&j[0].exp().ln().unwrap(), &j[0], 1e-10));
    }

    #[test]
    fn pythagoras((s, j) in jets(1)) {
        let (sn, cs) = (j[0].sin(), j[0].cos());
        prop_assert!(close(&(&(&sn * &sn) + &(&cs * &cs)), &JetScalar::constant(&s, 1.0), 1e-12));
    }

    #[test]
    fn division_inverts_multiplication((_, j) in jets(2)) {
        let b = j[1].add_scalar(3.0);
        let q = (&j[0] * &b).try_div(&b).unwrap();
        prop_assert!(close(&q, &j[0], 1e-10));
    }

    #[test]
    fn split_then_merge_is_identity(
        n in 0usize..=5,
        cut in 0usize..=5,
        c in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let cut = cut.min(n);
        let s = JetShape::new(&[n]).unwrap();
        let x = JetScalar::from_coeffs(&s, c[..=n].to_vec()).unwrap();
        let split = x.split_axes(&[vec![cut, n - cut]]).unwrap();
        prop_assert_eq!(split.merge_axes(&[2], 1e-12).unwrap(), x);
    }

    #[test]
    fn permutation_round_trip((s, j) in jets(1)) {
        let r = s.rank();
        let perm: Vec<usize> = (0..r).rev().collect();
        let back = j[0].permute_axes(&perm).unwrap().permute_axes(&perm).unwrap();
        prop_assert_eq!(back, j[0].clone());
    }
}

#[test]
fn merge_then_split_on_symmetric_input() {
    let s = JetShape::new(&[2, 1]).unwrap();
    // coefficients depend on total degree only: (0,0)=1, (1,0)=(0,1)=2, (2,0)=(1,1)=3, (2,1)=4
    let sym = JetScalar::from_coeffs(&s, vec![1.0, 2.0, 3.0, 2.0, 3.0, 4.0]).unwrap();
    let merged = sym.merge_axes(&[2], 1e-12).unwrap();
    assert_eq!(merged.coeffs(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(merged.split_axes(&[vec![2, 1]]).unwrap(), sym);
}

#[test]
fn lifts_match_central_differences() {
    // a(t) = 0.7 + 0.3 t + 0.2 t², first two derivatives of f(a(t)) at t = 0.4
    let a = |t: f64| 0.7 + 0.3 * t + 0.2 * t * t;
    let t0 = 0.4;
    let s = JetShape::new(&[2]).unwrap();
    let jet = JetScalar::from_coeffs(&s, vec![a(t0), 0.3 + 0.4 * t0, 0.4]).unwrap();
    let h = 1e-4;
    let fns: Vec<(fn(f64) -> f64, JetScalar)> = vec![
        (f64::exp, jet.exp()),
        (f64::ln, jet.ln().unwrap()),
        (f64::sin, jet.sin()),
        (f64::cos, jet.cos()),
        (f64::sqrt, jet.sqrt().unwrap()),
        (f64::atan, jet.atan()),
        (|x| x.powf(1.7), jet.powf(1.7).unwrap()),
    ];
    for (f, lifted) in fns {
        let g = |t: f64| f(a(t));
        let d1 = (g(t0 + h) - g(t0 - h)) / (2.0 * h);
        let d2 = (g(t0 + h) - 2.0 * g(t0) + g(t0 - h)) / (h * h);
        let c = lifted.coeffs();
        assert!((c[1] - d1).abs() <= 1e-6 * 1f64.max(d1.abs()));
        assert!((c[2] - d2).abs() <= 1e-6 * 1f64.max(d2.abs()));
    }
}
