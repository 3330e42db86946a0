use std::sync::Arc;

use jetvar_core::bundles::{FnCurve, PolynomialCurve};
use jetvar_core::expr::{ExprCurve, ExprLagrangian, ExprMetric};
use jetvar_core::geometry::{metric_at, MetricField, Sphere2};
use jetvar_core::variational::{
    action_variation, force_along, lambda_jet, momentum_along, momentum_local_oracle,
    transversality_check, BoundaryPreset, FnLagrangian, DEFAULT_PANELS,
};
use jetvar_core::{curve_jet, CurveEvaluator, JetScalar, JetShape};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn wobbly() -> PolynomialCurve {
    PolynomialCurve::new(vec![
        vec![0.3, -1.0, 0.5, 0.2, -0.1, 0.05],
        vec![1.0, 0.4, -0.3, 0.1, 0.02, -0.01],
    ])
}

#[test]
fn expression_lagrangian_matches_closure() {
    let src = "0.5 * (x0''^2 + x1''^2) + x0 * x1' - sin(x1) * x0'^2";
    let parsed = ExprLagrangian::parse(src, 2, 2).unwrap();
    let closure = FnLagrangian::new(2, 2, |x: &[Vec<JetScalar>]| {
        let kin = (&(&x[0][2] * &x[0][2]) + &(&x[1][2] * &x[1][2])).scale(0.5);
        let cross = &x[0][0] * &x[1][1];
        let pot = &x[1][0].sin() * &(&x[0][1] * &x[0][1]);
        Ok(&(&kin + &cross) - &pot)
    });
    let curve = wobbly();
    for t in [-0.5, 0.0, 0.7] {
        let a = force_along(&parsed, &curve, t).unwrap();
        let b = force_along(&closure, &curve, t).unwrap();
        for (x, y) in a.f.iter().zip(&b.f) {
            assert!(rel(*x, *y) <= 1e-13);
        }
        let ma = momentum_along(&parsed, &curve, t).unwrap();
        let mb = momentum_along(&closure, &curve, t).unwrap();
        assert_eq!(ma.p.len(), mb.p.len());
        for (ra, rb) in ma.p.iter().zip(&mb.p) {
            for (x, y) in ra.iter().zip(rb) {
                assert!(rel(*x, *y) <= 1e-13);
            }
        }
    }
}

#[test]
fn expression_curve_matches_closure() {
    let parsed = ExprCurve::parse(&["cos(t) + t^3", "exp(-t) * atan(t)"]).unwrap();
    let closure = FnCurve::new(2, |t: &JetScalar| {
        let t3 = &(t * t) * t;
        Ok(vec![&t.cos() + &t3, &t.scale(-1.0).exp() * &t.atan()])
    });
    let a = curve_jet(&parsed, 0.4, 5).unwrap();
    let b = curve_jet(&closure, 0.4, 5).unwrap();
    for (x, y) in a.coords().iter().zip(b.coords()) {
        for (p, q) in x.coeffs().iter().zip(y.coeffs()) {
            assert!(rel(*p, *q) <= 1e-13);
        }
    }
}

#[test]
fn expression_metric_matches_preset() {
    let parsed = ExprMetric::parse(&[vec!["1", "0"], vec!["0", "sin(x0)^2"]]).unwrap();
    let shape = JetShape::new(&[3]).unwrap();
    let x = vec![
        JetScalar::seed(&shape, 1.1, 0).unwrap(),
        JetScalar::seed(&shape, 0.3, 0).unwrap().scale(2.0),
    ];
    let a = metric_at(&parsed as &dyn MetricField, &x).unwrap();
    let b = metric_at(&Sphere2, &x).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            for (p, q) in a[i][j].coeffs().iter().zip(b[i][j].coeffs()) {
                assert!(rel(*p, *q) <= 1e-13);
            }
        }
    }
}

#[test]
fn curve_jets_commute_with_time_shift() {
    let c = wobbly();
    let s = 0.25;
    let shifted = FnCurve::new(2, move |t: &JetScalar| c.eval(&t.add_scalar(s)));
    let a = curve_jet(&shifted, 0.1, 4).unwrap();
    let b = curve_jet(&wobbly(), 0.35, 4).unwrap();
    for (x, y) in a.coords().iter().zip(b.coords()) {
        for (p, q) in x.coeffs().iter().zip(y.coeffs()) {
            assert!(rel(*p, *q) <= 1e-13);
        }
    }
}

#[test]
fn projected_inclusions_truncate() {
    let v = curve_jet(&wobbly(), 0.2, 4).unwrap();
    let inc = v.holonomic_include(&[2, 2]).unwrap();
    assert!(inc.is_holonomic());
    assert_eq!(inc.holonomic_merge().unwrap(), v);
    let trunc = v.project(&[2]).unwrap();
    let short = curve_jet(&wobbly(), 0.2, 2).unwrap();
    assert_eq!(trunc, short);
}

#[test]
fn lambda_jet_sits_over_the_curve_jet() {
    let l = FnLagrangian::new(2, 2, |x: &[Vec<JetScalar>]| {
        Ok(&(&x[0][2] * &x[1][1]) + &x[0][0].exp())
    });
    let jet = curve_jet(&wobbly(), 0.3, 4).unwrap();
    let lam = lambda_jet(&l, &jet).unwrap();
    assert!(lam.base().is_holonomic());
    assert_eq!(lam.base().point(), jet.point());
}

#[test]
fn first_order_momentum_is_the_usual_one() {
    // L = ½ m ẋ² − V(x): p = m ẋ
    let m = 2.5;
    let l = FnLagrangian::new(1, 1, move |x: &[Vec<JetScalar>]| {
        Ok(&(&x[0][1] * &x[0][1]).scale(0.5 * m) - &x[0][0].cos())
    });
    let curve = PolynomialCurve::new(vec![vec![0.1, 0.7, -0.4]]);
    for t in [0.0, 0.5, 1.0] {
        let p = momentum_along(&l, &curve, t).unwrap();
        let vel = 0.7 - 0.8 * t;
        assert!(rel(p.p[0][0], m * vel) <= 1e-14);
        let q = momentum_local_oracle(&l, &curve, t).unwrap();
        assert!(rel(p.p[0][0], q.p[0][0]) <= 1e-14);
    }
}

#[test]
fn action_variation_balances_for_a_second_order_lagrangian() {
    let l = FnLagrangian::new(2, 2, |x: &[Vec<JetScalar>]| {
        Ok(&(&(&x[0][2] * &x[0][2]) + &(&x[1][2] * &x[1][1])) + &(&x[0][0] * &x[1][0]).sin())
    });
    let var = PolynomialCurve::new(vec![vec![0.2, 0.1, -0.3, 0.4], vec![-0.5, 0.3, 0.2, 0.1]]);
    let av = action_variation(&l, &wobbly(), &var, 0.0, 1.0, DEFAULT_PANELS).unwrap();
    assert!(av.converged);
    assert!(rel(av.lhs, av.rhs) <= 1e-6, "{av:?}");
}

#[test]
fn free_final_transversality_fails_on_a_generic_curve() {
    let l = FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| Ok((&x[0][1] * &x[0][1]).scale(0.5)));
    let curve: Arc<dyn CurveEvaluator> = Arc::new(PolynomialCurve::new(vec![vec![0.0, 1.0]]));
    let rep = transversality_check(
        &l,
        curve.as_ref(),
        0.0,
        1.0,
        &BoundaryPreset::FreeFinal.basis(1, 1),
        1e-9,
    )
    .unwrap();
    assert!(!rep.satisfied);
    let fixed =
        transversality_check(&l, curve.as_ref(), 0.0, 1.0, &BoundaryPreset::Fixed.basis(1, 1), 1e-9)
            .unwrap();
    assert!(fixed.satisfied);
}
