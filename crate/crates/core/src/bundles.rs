//! Points of iterated higher tangent bundles and of their lifted vector bundles, in one chart.
//!
//! A [`HigherVelocity`] of shape `(n_1, …, n_r)` stores, for every chart coordinate `a`, the
//! jet `x^{a,(ε)}`. Axis 0 is the outermost functor, so shape `(l, k)` is `T^l T^k M`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::weil::{JetScalar, JetShape};

/// Tolerance for holonomicity tests, absolute after dividing by `1 + max|coeff|`.
pub const HOLONOMY_TOL: f64 = 1e-12;

/// A curve `t ↦ γ(t) ∈ R^dim` that accepts jet-valued time.
pub trait CurveEvaluator: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>>;
}

/// A scalar function on the chart that accepts jet-valued coordinates.
pub trait ChartFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[JetScalar]) -> Result<JetScalar>;
}

/// Adapter turning a closure into a [`CurveEvaluator`].
pub struct FnCurve<F> {
    dim: usize,
    f: F,
}

impl<F> FnCurve<F>
where
    F: Fn(&JetScalar) -> Result<Vec<JetScalar>> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnCurve { dim, f }
    }
}

impl<F> CurveEvaluator for FnCurve<F>
where
    F: Fn(&JetScalar) -> Result<Vec<JetScalar>> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>> {
        (self.f)(t)
    }
}

/// Adapter turning a closure into a [`ChartFunction`].
pub struct FnChart<F> {
    dim: usize,
    f: F,
}

impl<F> FnChart<F>
where
    F: Fn(&[JetScalar]) -> Result<JetScalar> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnChart { dim, f }
    }
}

impl<F> ChartFunction for FnChart<F>
where
    F: Fn(&[JetScalar]) -> Result<JetScalar> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[JetScalar]) -> Result<JetScalar> {
        (self.f)(x)
    }
}

/// `γ^a(t) = Σ_n coeffs[a][n] t^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCurve {
    pub coeffs: Vec<Vec<f64>>,
}

impl PolynomialCurve {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        PolynomialCurve { coeffs }
    }

    /// Plain evaluation of the `m`-th derivative at a real time.
    pub fn derivative_at(&self, a: usize, m: usize, t: f64) -> f64 {
        let c = &self.coeffs[a];
        let mut acc = 0.0;
        for n in (m..c.len()).rev() {
            let falling: f64 = (0..m).map(|i| (n - i) as f64).product();
            acc = acc * t + c[n] * falling;
        }
        acc
    }
}

impl CurveEvaluator for PolynomialCurve {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>> {
        Ok(self
            .coeffs
            .iter()
            .map(|c| {
                let mut acc = JetScalar::zeros(t.shape());
                for &cn in c.iter().rev() {
                    acc = (&acc * t).add_scalar(cn);
                }
                acc
            })
            .collect())
    }
}

fn check_uniform(shape: &Arc<JetShape>, jets: &[JetScalar]) -> Result<()> {
    for j in jets {
        if j.orders() != shape.orders() {
            return Err(Error::shape(shape.orders(), j.orders()));
        }
    }
    Ok(())
}

/// Point of `T^{n_1} … T^{n_r} M` in adapted coordinates `x^{a,(ε)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherVelocity {
    shape: Arc<JetShape>,
    coords: Vec<JetScalar>,
}

impl HigherVelocity {
    pub fn new(shape: &Arc<JetShape>, coords: Vec<JetScalar>) -> Result<Self> {
        check_uniform(shape, &coords)?;
        Ok(HigherVelocity {
            shape: shape.clone(),
            coords,
        })
    }

    /// Build from raw coefficient arrays, one per chart coordinate.
    pub fn from_arrays(orders: &[usize], arrays: Vec<Vec<f64>>) -> Result<Self> {
        let shape = JetShape::new(orders)?;
        let coords = arrays
            .into_iter()
            .map(|c| JetScalar::from_coeffs(&shape, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(HigherVelocity { shape, coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn orders(&self) -> &[usize] {
        self.shape.orders()
    }

    pub fn coords(&self) -> &[JetScalar] {
        &self.coords
    }

    pub fn coord(&self, a: usize) -> &JetScalar {
        &self.coords[a]
    }

    pub fn into_coords(self) -> Vec<JetScalar> {
        self.coords
    }

    /// The base point `x^{a,(0,…,0)}`.
    pub fn point(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.value()).collect()
    }

    /// Apply the same index-set map to every coordinate.
    pub fn map(&self, f: impl Fn(&JetScalar) -> Result<JetScalar>) -> Result<Self> {
        let coords = self.coords.iter().map(&f).collect::<Result<Vec<_>>>()?;
        let shape = match coords.first() {
            Some(c) => c.shape().clone(),
            None => {
                // an empty chart still needs a target shape; probe it on a zero jet
                f(&JetScalar::zeros(&self.shape))?.shape().clone()
            }
        };
        Ok(HigherVelocity { shape, coords })
    }

    /// Canonical projection to lower orders.
    pub fn project(&self, to: &[usize]) -> Result<Self> {
        self.map(|c| c.truncate(to))
    }

    /// The inclusion `T^{n_1+…+n_r} M ⊂ T^{n_1} … T^{n_r} M`, `x^{(ε)} := x^{(|ε|)}`.
    pub fn holonomic_include(&self, parts: &[usize]) -> Result<Self> {
        if self.shape.rank() != 1 {
            return Err(Error::InvalidArgument(
                "holonomic inclusion starts from a single order".into(),
            ));
        }
        let parts = parts.to_vec();
        self.map(|c| c.split_axes(std::slice::from_ref(&parts)))
    }

    /// Whether the point lies in the image of the holonomic inclusion.
    pub fn is_holonomic(&self) -> bool {
        let r = self.shape.rank();
        self.coords
            .iter()
            .all(|c| c.is_group_symmetric(&[r], HOLONOMY_TOL))
    }

    /// Inverse of [`holonomic_include`](Self::holonomic_include); fails off the image.
    pub fn holonomic_merge(&self) -> Result<Self> {
        let r = self.shape.rank();
        self.map(|c| c.merge_axes(&[r], HOLONOMY_TOL))
    }

    pub(crate) fn agrees_with(&self, other: &HigherVelocity, tol: f64) -> bool {
        self.orders() == other.orders()
            && self.dim() == other.dim()
            && self.coords.iter().zip(&other.coords).all(|(a, b)| {
                a.coeffs()
                    .iter()
                    .zip(b.coeffs())
                    .all(|(x, y)| (x - y).abs() <= tol * 1f64.max(x.abs()).max(y.abs()))
            })
    }
}

/// `j^m_t γ`: the Taylor coefficients of `γ(t + ν)` up to order `m`.
pub fn curve_jet(curve: &dyn CurveEvaluator, t: f64, m: usize) -> Result<HigherVelocity> {
    let shape = JetShape::new(&[m])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let coords = curve.eval(&time)?;
    if coords.len() != curve.dim() {
        return Err(Error::InvalidArgument(format!(
            "curve returned {} coordinates, declared dimension {}",
            coords.len(),
            curve.dim()
        )));
    }
    HigherVelocity::new(&shape, coords)
}

/// `f^{(α)}(v)` for a `k`-velocity `v`: the `α`-th time derivative of `f` along any curve
/// representing `v`.
pub fn alpha_lift_eval(f: &dyn ChartFunction, v: &HigherVelocity, alpha: usize) -> Result<f64> {
    if v.shape.rank() != 1 {
        return Err(Error::InvalidArgument("α-lifts act on single-order velocities".into()));
    }
    let k = v.orders()[0];
    if alpha > k {
        return Err(Error::OrderOverflow {
            requested: alpha,
            available: k,
        });
    }
    // the coordinate jets of v are exactly the Taylor data of a representative curve
    let val = f.eval(v.coords())?;
    if val.orders() != v.orders() {
        return Err(Error::shape(v.orders(), val.orders()));
    }
    Ok(val.coeffs()[alpha])
}

/// Point of the lifted vector bundle `T^{n_1} … T^{n_r} E` with coordinates
/// `(x^{a,(ε)}, y^{i,(ε)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVectorElement {
    base: HigherVelocity,
    fiber: Vec<JetScalar>,
}

impl LiftedVectorElement {
    pub fn new(base: HigherVelocity, fiber: Vec<JetScalar>) -> Result<Self> {
        check_uniform(base.shape(), &fiber)?;
        Ok(LiftedVectorElement { base, fiber })
    }

    pub fn from_arrays(
        orders: &[usize],
        base: Vec<Vec<f64>>,
        fiber: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let base = HigherVelocity::from_arrays(orders, base)?;
        let fiber = fiber
            .into_iter()
            .map(|c| JetScalar::from_coeffs(base.shape(), c))
            .collect::<Result<Vec<_>>>()?;
        Ok(LiftedVectorElement { base, fiber })
    }

    pub fn base(&self) -> &HigherVelocity {
        &self.base
    }

    pub fn fiber(&self) -> &[JetScalar] {
        &self.fiber
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.len()
    }

    pub fn orders(&self) -> &[usize] {
        self.base.orders()
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        self.base.shape()
    }

    pub fn into_parts(self) -> (HigherVelocity, Vec<JetScalar>) {
        (self.base, self.fiber)
    }

    /// Apply an index-set map to base and fiber alike.
    pub fn map(&self, f: impl Fn(&JetScalar) -> Result<JetScalar>) -> Result<Self> {
        let base = self.base.map(&f)?;
        let fiber = self.fiber.iter().map(&f).collect::<Result<Vec<_>>>()?;
        LiftedVectorElement::new(base, fiber)
    }

    /// Apply a map to the fiber only, keeping the base.
    pub fn map_fiber(&self, f: impl Fn(&JetScalar) -> JetScalar) -> Result<Self> {
        LiftedVectorElement::new(self.base.clone(), self.fiber.iter().map(f).collect())
    }

    pub fn project(&self, to: &[usize]) -> Result<Self> {
        self.map(|c| c.truncate(to))
    }

    pub fn holonomic_include(&self, parts: &[usize]) -> Result<Self> {
        if self.shape().rank() != 1 {
            return Err(Error::InvalidArgument(
                "holonomic inclusion starts from a single order".into(),
            ));
        }
        let parts = parts.to_vec();
        self.map(|c| c.split_axes(std::slice::from_ref(&parts)))
    }

    pub fn split_axes(&self, parts: &[Vec<usize>]) -> Result<Self> {
        self.map(|c| c.split_axes(parts))
    }

    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        self.map(|c| c.permute_axes(perm))
    }

    /// Fiberwise sum over a common base.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.orders() != other.orders() {
            return Err(Error::shape(self.orders(), other.orders()));
        }
        if self.fiber_dim() != other.fiber_dim() {
            return Err(Error::InvalidArgument("fiber dimensions differ".into()));
        }
        let fiber = self
            .fiber
            .iter()
            .zip(&other.fiber)
            .map(|(a, b)| a + b)
            .collect();
        LiftedVectorElement::new(self.base.clone(), fiber)
    }

    pub fn scale_fiber(&self, s: f64) -> Self {
        LiftedVectorElement {
            base: self.base.clone(),
            fiber: self.fiber.iter().map(|y| y.scale(s)).collect(),
        }
    }

    /// View `T^{outer} T^{inner} E` as `T^{outer} E'` where `E' = T^{inner} E` is a vector
    /// bundle over `T^{inner} M`. The last `count` axes are absorbed into the coordinate index:
    /// coordinate `(a, τ)` becomes `a · T + τ`, with `T` the number of inner coefficients.
    pub fn absorb_trailing_axes(&self, count: usize) -> Result<Self> {
        let orders = self.orders();
        let r = orders.len();
        if count > r {
            return Err(Error::IndexOutOfRange {
                index: count,
                bound: r,
            });
        }
        let outer = JetShape::new(&orders[..r - count])?;
        let inner = JetShape::new(&orders[r - count..])?;
        let absorb = |jets: &[JetScalar]| -> Result<Vec<JetScalar>> {
            let mut out = Vec::with_capacity(jets.len() * inner.len());
            for j in jets {
                for tau in 0..inner.len() {
                    let block = &j.coeffs()[tau * outer.len()..(tau + 1) * outer.len()];
                    out.push(JetScalar::from_coeffs(&outer, block.to_vec())?);
                }
            }
            Ok(out)
        };
        let base = HigherVelocity::new(&outer, absorb(self.base.coords())?)?;
        LiftedVectorElement::new(base, absorb(&self.fiber)?)
    }

    /// Inverse of [`absorb_trailing_axes`](Self::absorb_trailing_axes).
    pub fn emit_trailing_axes(&self, inner_orders: &[usize]) -> Result<Self> {
        let inner = JetShape::new(inner_orders)?;
        let mut orders = self.orders().to_vec();
        orders.extend_from_slice(inner_orders);
        let full = JetShape::new(&orders)?;
        let outer_len = self.shape().len();
        let emit = |jets: &[JetScalar]| -> Result<Vec<JetScalar>> {
            if jets.len() % inner.len() != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{} coordinates cannot be grouped by {}",
                    jets.len(),
                    inner.len()
                )));
            }
            jets.chunks(inner.len())
                .map(|group| {
                    let mut c = vec![0.0; full.len()];
                    for (tau, j) in group.iter().enumerate() {
                        c[tau * outer_len..(tau + 1) * outer_len].copy_from_slice(j.coeffs());
                    }
                    JetScalar::from_coeffs(&full, c)
                })
                .collect()
        };
        let base = HigherVelocity::new(&full, emit(self.base.coords())?)?;
        LiftedVectorElement::new(base, emit(&self.fiber)?)
    }
}

/// A point of a vector bundle: base coordinates and fiber coordinates, no jets.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorBundlePoint {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl VectorBundlePoint {
    pub fn into_lifted(self) -> LiftedVectorElement {
        let s = JetShape::scalar();
        let wrap = |v: Vec<f64>| -> Vec<JetScalar> {
            v.into_iter().map(|x| JetScalar::constant(&s, x)).collect()
        };
        LiftedVectorElement {
            base: HigherVelocity {
                shape: s.clone(),
                coords: wrap(self.base),
            },
            fiber: wrap(self.fiber),
        }
    }
}

/// Element of the semi-holonomic bundle `T̂^{(k,k)} E ⊂ T^k T^k E`: the base is a genuine
/// `2k`-velocity, the fiber carries a full `(k, k)` grid `y^{i,(β,γ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiHolonomicElement {
    k: usize,
    base: HigherVelocity,
    fiber: Vec<JetScalar>,
}

impl SemiHolonomicElement {
    pub fn new(base: HigherVelocity, fiber: Vec<JetScalar>) -> Result<Self> {
        let bo = base.orders();
        if bo.len() != 1 || bo[0] % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "semi-holonomic base must have a single even order, got {bo:?}"
            )));
        }
        let k = bo[0] / 2;
        let fshape = JetShape::new(&[k, k])?;
        check_uniform(&fshape, &fiber)?;
        Ok(SemiHolonomicElement { k, base, fiber })
    }

    pub fn from_arrays(k: usize, base: Vec<Vec<f64>>, fiber: Vec<Vec<f64>>) -> Result<Self> {
        let base = HigherVelocity::from_arrays(&[2 * k], base)?;
        let fshape = JetShape::new(&[k, k])?;
        let fiber = fiber
            .into_iter()
            .map(|c| JetScalar::from_coeffs(&fshape, c))
            .collect::<Result<Vec<_>>>()?;
        SemiHolonomicElement::new(base, fiber)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self) -> &HigherVelocity {
        &self.base
    }

    pub fn fiber(&self) -> &[JetScalar] {
        &self.fiber
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.len()
    }

    /// `Φ^{(m,n)} ∈ T^m T^n E`: fiber truncated to `(m, n)`, base truncated to `m + n` and
    /// included holonomically.
    pub fn projection(&self, m: usize, n: usize) -> Result<LiftedVectorElement> {
        if m > self.k || n > self.k {
            return Err(Error::OrderOverflow {
                requested: m.max(n),
                available: self.k,
            });
        }
        let base = self.base.project(&[m + n])?.holonomic_include(&[m, n])?;
        let fiber = self
            .fiber
            .iter()
            .map(|y| y.truncate(&[m, n]))
            .collect::<Result<Vec<_>>>()?;
        LiftedVectorElement::new(base, fiber)
    }

    /// Projection keeping the semi-holonomic structure, `T̂^{(k,k)} → T̂^{(m,m)}`.
    pub fn project(&self, m: usize) -> Result<SemiHolonomicElement> {
        let lve = self.projection(m, m)?;
        let base = self.base.project(&[2 * m])?;
        SemiHolonomicElement::new(base, lve.fiber)
    }

    /// The same point viewed in `T^k T^k E`.
    pub fn to_lifted(&self) -> Result<LiftedVectorElement> {
        self.projection(self.k, self.k)
    }

    /// Recognize a point of `T^k T^k E` with holonomic base.
    pub fn from_lifted(lve: &LiftedVectorElement) -> Result<Self> {
        let o = lve.orders();
        if o.len() != 2 || o[0] != o[1] {
            return Err(Error::InvalidArgument(format!(
                "expected a (k,k) shape, got {o:?}"
            )));
        }
        let base = lve.base().holonomic_merge()?;
        SemiHolonomicElement::new(base, lve.fiber().to_vec())
    }
}
