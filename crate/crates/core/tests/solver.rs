use jetvar_core::solver::{
    cubic_spline_oracle, integrate_el, shoot_bvp, SolverConfig, TerminalCondition,
};
use jetvar_core::variational::{force_at, FnLagrangian, Lagrangian};
use jetvar_core::JetScalar;

fn accel_squared() -> impl Lagrangian {
    FnLagrangian::new(1, 2, |x: &[Vec<JetScalar>]| Ok(&x[0][2] * &x[0][2]))
}

fn harmonic() -> impl Lagrangian {
    FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| {
        Ok((&x[0][1] * &x[0][1] - &x[0][0] * &x[0][0]).scale(0.5))
    })
}

fn cfg(step: f64) -> SolverConfig {
    SolverConfig {
        step,
        ..Default::default()
    }
}

#[test]
fn rk4_error_drops_by_sixteen() {
    let err = |h: f64| {
        let tr = integrate_el(&harmonic(), &[1.0, 0.0], 0.0, 1.0, &cfg(h)).unwrap();
        (tr.last().z[0] - 1f64.cos()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn clamped_cubic_matches_spline() {
    let l = accel_squared();
    let c = cfg(1e-3);
    let (x0, v0, x1, v1) = (0.2, -0.7, 1.3, 0.4);
    let r = shoot_bvp(
        &l,
        0.0,
        1.0,
        &[vec![x0, v0]],
        &TerminalCondition::Fixed(vec![vec![x1, v1]]),
        &c,
    )
    .unwrap();
    let spline = cubic_spline_oracle(&[(0.0, x0), (1.0, x1)], v0, v1).unwrap();
    let mut sup: f64 = 0.0;
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let x = r.trajectory.position_at(&l, t, &c).unwrap()[0];
        sup = sup.max((x - spline.eval(t)).abs());
    }
    assert!(sup <= 1e-7, "sup error {sup}");
    for i in 0..r.trajectory.states.len() {
        let jet = r.trajectory.full_jet(&l, i, &c).unwrap();
        assert!(jet.coords()[0].coeffs()[4].abs() <= 1e-8);
    }
}

#[test]
fn free_end_oscillator_has_zero_final_velocity() {
    let l = harmonic();
    let r = shoot_bvp(&l, 0.0, 1.0, &[vec![1.0]], &TerminalCondition::Free, &cfg(1e-3)).unwrap();
    let vel = r.trajectory.last().z[1];
    assert!(vel.abs() <= 1e-6, "final velocity {vel}");
    // x = cos t + tan(1) sin t satisfies x(0) = 1 and x'(1) = 0
    assert!((r.unknowns[0] - 1f64.tan()).abs() <= 1e-6);
}

#[test]
fn solved_trajectory_has_vanishing_force() {
    let l = accel_squared();
    let c = cfg(1e-2);
    let tr = integrate_el(&l, &[0.1, 0.5, -1.0, 2.0], 0.0, 1.0, &c).unwrap();
    let stride = tr.states.len() / 32;
    for i in (0..tr.states.len()).step_by(stride.max(1)).take(32) {
        let f = force_at(&l, &tr.full_jet(&l, i, &c).unwrap()).unwrap();
        assert!(f.f.iter().all(|v| v.abs() <= 1e-6), "{:?}", f.f);
    }
}
