//! Riemannian data in one chart: Christoffel symbols, curvature, covariant derivatives along
//! curves, and the Lagrangian and Euler-Lagrange residual of Riemannian cubics.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::bundles::{CurveEvaluator, HigherVelocity};
use crate::error::{Error, Result};
use crate::linalg::{determinant, invert_jet_matrix};
use crate::variational::Lagrangian;
use crate::weil::{JetScalar, JetShape};

/// Jet matrix `[row][col]`.
pub type JetMatrix = Vec<Vec<JetScalar>>;

/// A metric `x ↦ g_{ab}(x)` that accepts jet-valued coordinates.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix>;
}

/// `δ_{ab}` on `R^dim`.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean(pub usize);

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix> {
        let shape = jet_shape_of(x);
        Ok((0..self.0)
            .map(|i| {
                (0..self.0)
                    .map(|j| JetScalar::constant(&shape, if i == j { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect())
    }
}

/// Round unit sphere in `(θ, φ)`: `g = diag(1, sin²θ)`; rejects points within 0.1 of a pole.
#[derive(Debug, Clone, Copy)]
pub struct Sphere2;

/// Minimal distance of `θ` from the poles accepted by [`Sphere2`].
pub const POLE_MARGIN: f64 = 0.1;

impl MetricField for Sphere2 {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix> {
        let theta = &x[0];
        let th = theta.value();
        if !(th > POLE_MARGIN && th < PI - POLE_MARGIN) {
            return Err(Error::Domain(format!(
                "θ = {th} is within {POLE_MARGIN} of a pole of the sphere chart"
            )));
        }
        let s = theta.sin();
        let shape = theta.shape();
        Ok(vec![
            vec![JetScalar::constant(shape, 1.0), JetScalar::zeros(shape)],
            vec![JetScalar::zeros(shape), &s * &s],
        ])
    }
}

/// Upper half-plane: `g = diag(1, 1) / y²`, `y > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Hyperbolic2;

impl MetricField for Hyperbolic2 {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix> {
        let y = &x[1];
        if !(y.value() > 0.0) {
            return Err(Error::Domain(format!(
                "y = {} is outside the upper half-plane",
                y.value()
            )));
        }
        let w = y.powi(-2)?;
        let shape = y.shape();
        Ok(vec![
            vec![w.clone(), JetScalar::zeros(shape)],
            vec![JetScalar::zeros(shape), w],
        ])
    }
}

/// Adapter turning a closure into a [`MetricField`].
pub struct FnMetric<F> {
    dim: usize,
    f: F,
}

impl<F> FnMetric<F>
where
    F: Fn(&[JetScalar]) -> Result<JetMatrix> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnMetric { dim, f }
    }
}

impl<F> MetricField for FnMetric<F>
where
    F: Fn(&[JetScalar]) -> Result<JetMatrix> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetMatrix> {
        (self.f)(x)
    }
}

fn jet_shape_of(x: &[JetScalar]) -> Arc<JetShape> {
    x.first()
        .map(|j| j.shape().clone())
        .unwrap_or_else(JetShape::scalar)
}

/// Evaluate, symmetrize and check positive-definiteness (leading principal minors of the
/// constant terms).
pub fn metric_at(g: &dyn MetricField, x: &[JetScalar]) -> Result<JetMatrix> {
    let n = g.dim();
    if x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "metric on dimension {n} evaluated at {} coordinates",
            x.len()
        )));
    }
    let raw = g.eval(x)?;
    if raw.len() != n || raw.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("metric must be {n}×{n}")));
    }
    let sym: JetMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        raw[i][i].clone()
                    } else {
                        (&raw[i][j] + &raw[j][i]).scale(0.5)
                    }
                })
                .collect()
        })
        .collect();
    for m in 1..=n {
        let minor: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| sym[i][j].value()).collect())
            .collect();
        if !(determinant(&minor) > 0.0) {
            return Err(Error::Domain(format!(
                "metric is not positive-definite (leading minor {m})"
            )));
        }
    }
    Ok(sym)
}

/// `∂_d g_{ab}` for every `d`, as jets of the input shape: `out[d][a][b]`.
fn metric_partials(g: &dyn MetricField, x: &[JetScalar]) -> Result<Vec<JetMatrix>> {
    let ext = x
        .iter()
        .map(|j| j.extend_axis(1))
        .collect::<Result<Vec<_>>>()?;
    (0..x.len())
        .map(|d| {
            let mut seeded = ext.clone();
            let off = x[d].shape().len();
            seeded[d].coeffs_mut()[off] = 1.0;
            let m = metric_at(g, &seeded)?;
            m.iter()
                .map(|row| {
                    row.iter()
                        .map(|e| e.slice_axis(e.shape().rank() - 1, 1))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<JetMatrix>>()
        })
        .collect()
}

/// `Γ^c_{ab}` as jets, `out[c][a][b] = ½ g^{cd}(∂_a g_{db} + ∂_b g_{da} − ∂_d g_{ab})`.
pub fn christoffel_jet(g: &dyn MetricField, x: &[JetScalar]) -> Result<Vec<JetMatrix>> {
    let n = g.dim();
    let gm = metric_at(g, x)?;
    let inv = invert_jet_matrix(&gm)?;
    let dg = metric_partials(g, x)?;
    let shape = jet_shape_of(x);
    let mut out = vec![vec![vec![JetScalar::zeros(&shape); n]; n]; n];
    for a in 0..n {
        for b in a..n {
            // first-kind symbols Γ_{d,ab}
            let first: Vec<JetScalar> = (0..n)
                .map(|d| (&(&dg[a][d][b] + &dg[b][d][a]) - &dg[d][a][b]).scale(0.5))
                .collect();
            for c in 0..n {
                let mut acc = JetScalar::zeros(&shape);
                for (d, f) in first.iter().enumerate() {
                    acc += &(&inv[c][d] * f);
                }
                out[c][b][a] = acc.clone();
                out[c][a][b] = acc;
            }
        }
    }
    Ok(out)
}

fn constants(x: &[f64]) -> Vec<JetScalar> {
    let s = JetShape::scalar();
    x.iter().map(|&v| JetScalar::constant(&s, v)).collect()
}

/// `Γ^c_{ab}(x)`, indexed `[c][a][b]`.
pub fn christoffel(g: &dyn MetricField, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let gam = christoffel_jet(g, &constants(x))?;
    Ok(gam
        .iter()
        .map(|m| m.iter().map(|r| r.iter().map(|j| j.value()).collect()).collect())
        .collect())
}

/// Curvature at a point: `up[d][c][a][b] = R^d_{cab}` and `down[d][c][a][b] = g_{de} R^e_{cab}`,
/// with `R(X,Y)Z^d = R^d_{cab} Z^c X^a Y^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    pub up: Vec<Vec<Vec<Vec<f64>>>>,
    pub down: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Curvature {
    /// `R(X, Y) Z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|d| {
                let mut acc = 0.0;
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            acc += self.up[d][c][a][b] * z[c] * x[a] * y[b];
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

pub fn curvature(g: &dyn MetricField, x: &[f64]) -> Result<Curvature> {
    let n = g.dim();
    if x.len() != n {
        return Err(Error::InvalidArgument("point has wrong dimension".into()));
    }
    let shape = JetShape::new(&vec![1; n])?;
    let xs = x
        .iter()
        .enumerate()
        .map(|(i, &v)| JetScalar::seed(&shape, v, i))
        .collect::<Result<Vec<_>>>()?;
    let gam = christoffel_jet(g, &xs)?;
    let val = |j: &JetScalar| j.value();
    let unit: Vec<usize> = (0..n).map(|a| shape.stride(a)).collect();
    let d_of = |j: &JetScalar, a: usize| j.coeffs()[unit[a]];
    let mut up = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for d in 0..n {
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut r = d_of(&gam[d][b][c], a) - d_of(&gam[d][a][c], b);
                    for e in 0..n {
                        r += val(&gam[d][a][e]) * val(&gam[e][b][c])
                            - val(&gam[d][b][e]) * val(&gam[e][a][c]);
                    }
                    up[d][c][a][b] = r;
                }
            }
        }
    }
    let gm = metric_at(g, &constants(x))?;
    let mut down = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for d in 0..n {
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    down[d][c][a][b] = (0..n).map(|e| gm[d][e].value() * up[e][c][a][b]).sum();
                }
            }
        }
    }
    Ok(Curvature { up, down })
}

/// `[D_t^0 V, …, D_t^m V]` along a curve, all as time jets.
///
/// `gamma` and `v` are jets in `t` of a common order; each application of `D_t` loses the top
/// coefficient, so entry `i` is exact up to coefficient `order − i`.
pub fn covariant_derivatives_jet(
    g: &dyn MetricField,
    gamma: &[JetScalar],
    v: Vec<JetScalar>,
    m: usize,
) -> Result<Vec<Vec<JetScalar>>> {
    let n = g.dim();
    let gam = christoffel_jet(g, gamma)?;
    let vel = gamma
        .iter()
        .map(|c| c.shift_axis(0))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![v];
    for _ in 0..m {
        let w = out.last().expect("nonempty");
        let mut next = Vec::with_capacity(n);
        for c in 0..n {
            let mut acc = w[c].shift_axis(0)?;
            for a in 0..n {
                for b in 0..n {
                    acc += &(&(&gam[c][a][b] * &vel[a]) * &w[b]);
                }
            }
            next.push(acc);
        }
        out.push(next);
    }
    Ok(out)
}

/// `D_t^m V` at time `t`, where `V` is a vector field along `γ` given in closed form.
pub fn covariant_derivative_along(
    g: &dyn MetricField,
    curve: &dyn CurveEvaluator,
    field: &dyn CurveEvaluator,
    t: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let shape = JetShape::new(&[m])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let gamma = curve.eval(&time)?;
    let v = field.eval(&time)?;
    let ders = covariant_derivatives_jet(g, &gamma, v, m)?;
    Ok(ders[m].iter().map(|j| j.value()).collect())
}

/// `L = g(D_t γ̇, D_t γ̇)` on `T²M`, with `D_t γ̇ = (ẍ^c + Γ^c_{ab} ẋ^a ẋ^b) ∂_c`.
pub struct CubicLagrangian {
    metric: Arc<dyn MetricField>,
}

impl CubicLagrangian {
    pub fn new(metric: Arc<dyn MetricField>) -> Self {
        CubicLagrangian { metric }
    }
}

/// Covariant acceleration from coordinate jets `x[a][α]`, `α ≤ 2`.
fn covariant_acceleration(
    g: &dyn MetricField,
    x: &[Vec<JetScalar>],
) -> Result<(JetMatrix, Vec<JetScalar>)> {
    let n = g.dim();
    let pos: Vec<JetScalar> = x.iter().map(|r| r[0].clone()).collect();
    let gam = christoffel_jet(g, &pos)?;
    let acc = (0..n)
        .map(|c| {
            let mut s = x[c][2].clone();
            for a in 0..n {
                for b in 0..n {
                    s += &(&(&gam[c][a][b] * &x[a][1]) * &x[b][1]);
                }
            }
            s
        })
        .collect();
    Ok((metric_at(g, &pos)?, acc))
}

impl Lagrangian for CubicLagrangian {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn order(&self) -> usize {
        2
    }
    fn eval(&self, x: &[Vec<JetScalar>]) -> Result<JetScalar> {
        let (gm, a) = covariant_acceleration(self.metric.as_ref(), x)?;
        let mut out = JetScalar::zeros(a[0].shape());
        for (c, row) in gm.iter().enumerate() {
            for (d, gcd) in row.iter().enumerate() {
                out += &(&(gcd * &a[c]) * &a[d]);
            }
        }
        Ok(out)
    }
}

/// `D_t³ γ̇ + R(D_t γ̇, γ̇) γ̇` at time `t`.
pub fn cubic_el_residual(
    g: &dyn MetricField,
    curve: &dyn CurveEvaluator,
    t: f64,
) -> Result<Vec<f64>> {
    let shape = JetShape::new(&[4])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let gamma = curve.eval(&time)?;
    cubic_residual_from_jet(g, &HigherVelocity::new(&shape, gamma)?)
}

/// Same as [`cubic_el_residual`], from `j^4 γ(t)`.
pub fn cubic_residual_from_jet(g: &dyn MetricField, jet4: &HigherVelocity) -> Result<Vec<f64>> {
    let gamma = jet4.project(&[4])?.into_coords();
    let vel = gamma
        .iter()
        .map(|c| c.shift_axis(0))
        .collect::<Result<Vec<_>>>()?;
    let ders = covariant_derivatives_jet(g, &gamma, vel.clone(), 3)?;
    let point: Vec<f64> = gamma.iter().map(|c| c.value()).collect();
    let r = curvature(g, &point)?;
    let v0: Vec<f64> = vel.iter().map(|c| c.value()).collect();
    let a0: Vec<f64> = ders[1].iter().map(|c| c.value()).collect();
    let rv = r.apply(&a0, &v0, &v0);
    Ok(ders[3]
        .iter()
        .zip(rv)
        .map(|(d, x)| d.value() + x)
        .collect())
}

/// `2[g(D_t δγ, D_t γ̇) − g(δγ, D_t² γ̇)]`, the boundary term of the first variation of the
/// cubic action.
pub fn cubic_boundary_term(
    g: &dyn MetricField,
    curve: &dyn CurveEvaluator,
    variation: &dyn CurveEvaluator,
    t: f64,
) -> Result<f64> {
    let shape = JetShape::new(&[3])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let gamma = curve.eval(&time)?;
    let vel = gamma
        .iter()
        .map(|c| c.shift_axis(0))
        .collect::<Result<Vec<_>>>()?;
    let dv = covariant_derivatives_jet(g, &gamma, vel, 2)?;
    let dd = covariant_derivatives_jet(g, &gamma, variation.eval(&time)?, 1)?;
    let point: Vec<f64> = gamma.iter().map(|c| c.value()).collect();
    let gm = metric_at(g, &constants(&point))?;
    let inner = |u: &[JetScalar], w: &[JetScalar]| -> f64 {
        let mut s = 0.0;
        for (a, row) in gm.iter().enumerate() {
            for (b, gab) in row.iter().enumerate() {
                s += gab.value() * u[a].value() * w[b].value();
            }
        }
        s
    };
    Ok(2.0 * (inner(&dd[1], &dv[1]) - inner(&dd[0], &dv[2])))
}

/// Raise a covector with `g^{-1}` at a point.
pub fn raise_index(g: &dyn MetricField, x: &[f64], covector: &[f64]) -> Result<Vec<f64>> {
    let gm = metric_at(g, &constants(x))?;
    let m: Vec<Vec<f64>> = gm.iter().map(|r| r.iter().map(|j| j.value()).collect()).collect();
    Ok(crate::linalg::solve(&m, covector)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::{FnCurve, PolynomialCurve};

    #[test]
    fn euclidean_is_flat() {
        let e = Euclidean(3);
        let gam = christoffel(&e, &[0.1, 0.2, 0.3]).unwrap();
        assert!(gam.iter().flatten().flatten().all(|&v| v == 0.0));
        let r = curvature(&e, &[0.1, 0.2, 0.3]).unwrap();
        assert!(r.up.iter().flatten().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn sphere_christoffel_and_curvature() {
        let th: f64 = 0.8;
        let gam = christoffel(&Sphere2, &[th, 0.3]).unwrap();
        assert!((gam[0][1][1] + th.sin() * th.cos()).abs() < 1e-14);
        assert!((gam[1][0][1] - th.cos() / th.sin()).abs() < 1e-14);
        assert_eq!(gam[1][0][1], gam[1][1][0]);
        let r = curvature(&Sphere2, &[th, 0.3]).unwrap();
        assert!((r.up[0][1][0][1] - th.sin().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn conformal_line() {
        // g = e^{2u}, u = x², so Γ = u' = 2x
        let g = FnMetric::new(1, |x: &[JetScalar]| Ok(vec![vec![(&x[0] * &x[0]).scale(2.0).exp()]]));
        let gam = christoffel(&g, &[0.7]).unwrap();
        assert!((gam[0][0][0] - 1.4).abs() < 1e-13);
    }

    #[test]
    fn pole_and_half_plane_domains() {
        assert!(matches!(christoffel(&Sphere2, &[0.05, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(christoffel(&Hyperbolic2, &[0.0, -1.0]), Err(Error::Domain(_))));
        let bad = FnMetric::new(1, |x: &[JetScalar]| Ok(vec![vec![x[0].scale(-1.0)]]));
        assert!(matches!(christoffel(&bad, &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn equator_is_a_geodesic() {
        let eq = FnCurve::new(2, |t: &JetScalar| {
            Ok(vec![JetScalar::constant(t.shape(), std::f64::consts::FRAC_PI_2), t.clone()])
        });
        let vel = FnCurve::new(2, |t: &JetScalar| {
            Ok(vec![JetScalar::zeros(t.shape()), JetScalar::constant(t.shape(), 1.0)])
        });
        let d = covariant_derivative_along(&Sphere2, &eq, &vel, 0.4, 1).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
        let res = cubic_el_residual(&Sphere2, &eq, 0.4).unwrap();
        assert!(res.iter().all(|v| v.abs() < 1e-14));
        let l = CubicLagrangian::new(Arc::new(Sphere2));
        let s = JetShape::scalar();
        let c = |v: f64| JetScalar::constant(&s, v);
        let x = vec![
            vec![c(std::f64::consts::FRAC_PI_2), c(0.0), c(0.0)],
            vec![c(0.4), c(1.0), c(0.0)],
        ];
        assert!(l.eval(&x).unwrap().value().abs() < 1e-15);
    }

    #[test]
    fn flat_residual_is_fourth_derivative() {
        let p = PolynomialCurve::new(vec![vec![0.0, 1.0, 0.0, 0.0, 2.0], vec![1.0, 0.0, 3.0]]);
        let r = cubic_el_residual(&Euclidean(2), &p, 0.5).unwrap();
        assert!((r[0] - 48.0).abs() < 1e-12 && r[1].abs() < 1e-12);
    }
}
