use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use jetvar_core::bundles::FnCurve;
use jetvar_core::geometry::{
    christoffel, covariant_derivatives_jet, cubic_boundary_term, cubic_el_residual, metric_at,
    raise_index, CubicLagrangian, Hyperbolic2, MetricField, Sphere2,
};
use jetvar_core::variational::{boundary_pairing, force_along};
use jetvar_core::{CurveEvaluator, JetScalar, JetShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Cubic polynomial in `t` per coordinate, `θ` kept well inside the chart.
fn random_sphere_curve(rng: &mut ChaCha8Rng) -> impl CurveEvaluator {
    let c: Vec<Vec<f64>> = vec![
        vec![
            rng.gen_range(1.0..2.1),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.2..0.2),
        ],
        (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    ];
    FnCurve::new(2, move |t: &JetScalar| {
        Ok(c.iter()
            .map(|co| {
                co.iter()
                    .rev()
                    .fold(JetScalar::zeros(t.shape()), |acc, v| (&acc * t).add_scalar(*v))
            })
            .collect())
    })
}

#[test]
fn force_is_twice_the_lowered_cubic_residual() {
    let g: Arc<dyn MetricField> = Arc::new(Sphere2);
    let l = CubicLagrangian::new(g.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let curve = random_sphere_curve(&mut rng);
        let t = rng.gen_range(-0.3..0.3);
        let f = force_along(&l, &curve, t).unwrap();
        let raised = raise_index(g.as_ref(), &f.point, &f.f).unwrap();
        let res = cubic_el_residual(g.as_ref(), &curve, t).unwrap();
        for (a, b) in raised.iter().zip(&res) {
            assert!(rel(a / 2.0, *b) <= 1e-8, "{a} vs {b}");
        }
    }
}

/// Unit-speed great circle through `(1, 0, 0)` tilted by `β`, in `(θ, φ)`.
fn great_circle(beta: f64) -> impl CurveEvaluator {
    FnCurve::new(2, move |t: &JetScalar| {
        let (c, s) = (t.cos(), t.sin());
        let y = s.scale(beta.cos());
        let z = s.scale(beta.sin());
        let one_minus = (&z * &z).scale(-1.0).add_scalar(1.0);
        let theta = z.try_div(&one_minus.sqrt()?)?.atan().scale(-1.0).add_scalar(FRAC_PI_2);
        let phi = y.try_div(&c)?.atan();
        Ok(vec![theta, phi])
    })
}

#[test]
fn geodesics_solve_the_cubic_equation() {
    for beta in [0.0, 0.3, 1.1] {
        for t in [-0.4, 0.0, 0.5] {
            let r = cubic_el_residual(&Sphere2, &great_circle(beta), t).unwrap();
            assert!(r.iter().all(|v| v.abs() <= 1e-10), "{r:?}");
        }
    }
}

#[test]
fn boundary_term_matches_momentum() {
    let g: Arc<dyn MetricField> = Arc::new(Sphere2);
    let l = CubicLagrangian::new(g.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let curve = random_sphere_curve(&mut rng);
        let var = random_sphere_curve(&mut rng);
        let t = rng.gen_range(-0.3..0.3);
        let a = cubic_boundary_term(g.as_ref(), &curve, &var, t).unwrap();
        let b = boundary_pairing(&l, &curve, &var, t).unwrap();
        assert!(rel(a, b) <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn covariant_derivative_is_metric_compatible() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shape = JetShape::new(&[1]).unwrap();
    for g in [&Sphere2 as &dyn MetricField, &Hyperbolic2] {
        for _ in 0..10 {
            let t = rng.gen_range(-0.2..0.2);
            let time = JetScalar::seed(&shape, t, 0).unwrap();
            let lin = |c: [f64; 2]| time.scale(c[1]).add_scalar(c[0]);
            let gamma = vec![
                lin([rng.gen_range(1.0..2.0), rng.gen_range(-0.5..0.5)]),
                lin([rng.gen_range(1.0..2.0), rng.gen_range(-0.5..0.5)]),
            ];
            let v = vec![
                lin([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
                lin([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
            ];
            let w = vec![
                lin([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
                lin([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
            ];
            let gm = metric_at(g, &gamma).unwrap();
            let mut gvw = JetScalar::zeros(&shape);
            for i in 0..2 {
                for j in 0..2 {
                    gvw = &gvw + &(&(&gm[i][j] * &v[i]) * &w[j]);
                }
            }
            let dv = &covariant_derivatives_jet(g, &gamma, v.clone(), 1).unwrap()[1];
            let dw = &covariant_derivatives_jet(g, &gamma, w.clone(), 1).unwrap()[1];
            let mut rhs = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let gij = gm[i][j].value();
                    rhs += gij * (dv[i].value() * w[j].value() + v[i].value() * dw[j].value());
                }
            }
            assert!(rel(gvw.coeffs()[1], rhs) <= 1e-9);
        }
    }
}

#[test]
fn christoffel_symbols_are_symmetric() {
    for g in [&Sphere2 as &dyn MetricField, &Hyperbolic2] {
        let gam = christoffel(g, &[1.2, 0.7]).unwrap();
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(gam[c][a][b], gam[c][b][a]);
                }
            }
        }
    }
}
