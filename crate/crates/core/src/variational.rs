//! Forces, momenta and the first variation of higher-order actions.
//!
//! The force is `Υ_k` applied to the `k`-jet of `Λ_L = ε_k ∘ dL` along `j^k γ`, and the momentum
//! is `μ_{k−1}` applied to the `(k−1)`-jet of `λ_L`. Both are assembled from the partials of `L`
//! evaluated on jet-valued time.

use crate::bundles::{
    curve_jet, CurveEvaluator, HigherVelocity, LiftedVectorElement, SemiHolonomicElement,
};
use crate::canonical::{
    cotangent_pairing, dual_eps, dual_eps_inverse, flip_kappa, momenta, pairing_higher, upsilon,
    CotangentLift, CovectorVelocity,
};
use crate::error::{Error, Result};
use crate::weil::{binom_f, JetScalar, JetShape};

/// A Lagrangian `L : T^k M → R` that accepts jet-valued coordinates `x[a][α]`, `α ≤ k`.
pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn order(&self) -> usize;
    fn eval(&self, x: &[Vec<JetScalar>]) -> Result<JetScalar>;
}

/// Adapter turning a closure into a [`Lagrangian`].
pub struct FnLagrangian<F> {
    dim: usize,
    k: usize,
    f: F,
}

impl<F> FnLagrangian<F>
where
    F: Fn(&[Vec<JetScalar>]) -> Result<JetScalar> + Send + Sync,
{
    pub fn new(dim: usize, k: usize, f: F) -> Self {
        FnLagrangian { dim, k, f }
    }
}

impl<F> Lagrangian for FnLagrangian<F>
where
    F: Fn(&[Vec<JetScalar>]) -> Result<JetScalar> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn order(&self) -> usize {
        self.k
    }
    fn eval(&self, x: &[Vec<JetScalar>]) -> Result<JetScalar> {
        (self.f)(x)
    }
}

/// One monomial `c · Π (x^{a,(α)})^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// `(a, α, p)` factors with `p ≥ 1`.
    pub factors: Vec<(usize, usize, u32)>,
}

/// Polynomial Lagrangian with exact symbolic partial derivatives, used as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialLagrangian {
    pub dim: usize,
    pub k: usize,
    pub terms: Vec<Monomial>,
}

impl PolynomialLagrangian {
    /// `∂L/∂x^{a,(α)}`, computed term by term.
    pub fn partial(&self, a: usize, alpha: usize) -> PolynomialLagrangian {
        let terms = self
            .terms
            .iter()
            .filter_map(|m| {
                let pos = m.factors.iter().position(|&(b, order, _)| b == a && order == alpha)?;
                let (_, _, p) = m.factors[pos];
                let mut factors = m.factors.clone();
                if p == 1 {
                    factors.remove(pos);
                } else {
                    factors[pos].2 = p - 1;
                }
                Some(Monomial {
                    coef: m.coef * p as f64,
                    factors,
                })
            })
            .collect();
        PolynomialLagrangian {
            dim: self.dim,
            k: self.k,
            terms,
        }
    }
}

impl Lagrangian for PolynomialLagrangian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn order(&self) -> usize {
        self.k
    }
    fn eval(&self, x: &[Vec<JetScalar>]) -> Result<JetScalar> {
        let shape = x
            .first()
            .and_then(|r| r.first())
            .map(|j| j.shape().clone())
            .unwrap_or_else(JetShape::scalar);
        let mut acc = JetScalar::zeros(&shape);
        for m in &self.terms {
            let mut term = JetScalar::constant(&shape, m.coef);
            for &(a, alpha, p) in &m.factors {
                term = &term * &x[a][alpha].powi(p as i32)?;
            }
            acc += &term;
        }
        Ok(acc)
    }
}

fn check_input(l: &dyn Lagrangian, x: &[Vec<JetScalar>]) -> Result<()> {
    if x.len() != l.dim() || x.iter().any(|r| r.len() != l.order() + 1) {
        return Err(Error::InvalidArgument(format!(
            "Lagrangian expects {} coordinates with {} derivative slots",
            l.dim(),
            l.order() + 1
        )));
    }
    Ok(())
}

/// All first partials `∂L/∂x^{a,(α)}` as jets of the input shape, by forward seeding along an
/// extra first-order generator.
pub fn partials_along(l: &dyn Lagrangian, x: &[Vec<JetScalar>]) -> Result<Vec<Vec<JetScalar>>> {
    check_input(l, x)?;
    let extended = x
        .iter()
        .map(|row| row.iter().map(|j| j.extend_axis(1)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(x.len());
    for a in 0..x.len() {
        let mut row = Vec::with_capacity(l.order() + 1);
        for alpha in 0..=l.order() {
            let mut seeded = extended.clone();
            let j = &mut seeded[a][alpha];
            let off = x[a][alpha].shape().len();
            j.coeffs_mut()[off] = 1.0;
            let val = l.eval(&seeded)?;
            let last = val.shape().rank() - 1;
            row.push(val.slice_axis(last, 1)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// `dL` at a `k`-velocity, as an element of `T*T^k M`.
pub fn differential_dl(l: &dyn Lagrangian, v: &HigherVelocity) -> Result<CotangentLift> {
    let k = l.order();
    if v.orders() != [k] || v.dim() != l.dim() {
        return Err(Error::shape(&[k], v.orders()));
    }
    let s = JetShape::scalar();
    let x: Vec<Vec<JetScalar>> = v
        .coords()
        .iter()
        .map(|c| c.coeffs().iter().map(|&x| JetScalar::constant(&s, x)).collect())
        .collect();
    let d = partials_along(l, &x)?;
    let p = d
        .iter()
        .map(|row| row.iter().map(|j| j.value()).collect())
        .collect();
    CotangentLift::new(v.clone(), p)
}

/// `Λ_L = ε_k ∘ dL`.
pub fn lambda_full(l: &dyn Lagrangian, v: &HigherVelocity) -> Result<CovectorVelocity> {
    dual_eps(&differential_dl(l, v)?)
}

/// `λ_L`, the projection of `Λ_L` to `T^{k−1} T*M`.
pub fn lambda_reduced(l: &dyn Lagrangian, v: &HigherVelocity) -> Result<CovectorVelocity> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("λ_L needs k ≥ 1".into()));
    }
    lambda_full(l, v)?.truncate(k - 1)
}

/// Jet-of-a-jet coordinates: `X^{a,(β)}` of shape `(r, s)` with coefficient `(j, σ)` equal to
/// `x^{a,(β + j + σ)}`, read off a single-order curve jet.
fn nested_coordinates(
    jet: &HigherVelocity,
    k: usize,
    r: usize,
    s: usize,
) -> Result<Vec<Vec<JetScalar>>> {
    let m = jet.orders()[0];
    if k + r + s > m {
        return Err(Error::OrderOverflow {
            requested: k + r + s,
            available: m,
        });
    }
    let shape = JetShape::new(&[r, s])?;
    jet.coords()
        .iter()
        .map(|c| {
            (0..=k)
                .map(|beta| {
                    let coeffs = (0..shape.len())
                        .map(|idx| {
                            let e = shape.exponents(idx);
                            c.coeffs()[beta + e[0] + e[1]]
                        })
                        .collect();
                    JetScalar::from_coeffs(&shape, coeffs)
                })
                .collect()
        })
        .collect()
}

/// The fiber of `j^r Λ_L` along the curve, optionally differentiated `s` more times in `t`:
/// `out[σ][a]` is a `(r, k)` grid `y^{a,(α,β)} = ∂_t^σ ∂_t^α p_a^{(β)}`.
fn lambda_fibers(
    l: &dyn Lagrangian,
    jet: &HigherVelocity,
    r: usize,
    s: usize,
    beta_max: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let k = l.order();
    let x = nested_coordinates(jet, k, r, s)?;
    let d = partials_along(l, &x)?;
    let grid = JetShape::new(&[r, beta_max])?;
    let tshape = JetShape::new(&[r, s])?;
    let mut out = vec![vec![vec![0.0; grid.len()]; l.dim()]; s + 1];
    for (a, row) in d.iter().enumerate() {
        for beta in 0..=beta_max {
            // p^{(β)} = C(k,β)^{-1} p_{(k−β)}
            let jet = &row[k - beta];
            let w = binom_f(k, beta);
            for alpha in 0..=r {
                for (sigma, slot) in out.iter_mut().enumerate() {
                    let v = jet.coeffs()[tshape.index(&[alpha, sigma])?] / w;
                    slot[a][grid.index(&[alpha, beta])?] = v;
                }
            }
        }
    }
    Ok(out)
}

fn fiber_jets(shape: &std::sync::Arc<JetShape>, rows: Vec<Vec<f64>>) -> Result<Vec<JetScalar>> {
    rows.into_iter()
        .map(|c| JetScalar::from_coeffs(shape, c))
        .collect()
}

/// A covector at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceValue {
    pub point: Vec<f64>,
    pub f: Vec<f64>,
}

/// `j^k Λ_L(j^k γ(t))` as a semi-holonomic element, from `j^{2k} γ(t)`.
pub fn lambda_jet(l: &dyn Lagrangian, jet2k: &HigherVelocity) -> Result<SemiHolonomicElement> {
    let k = l.order();
    let base = jet2k.project(&[2 * k])?;
    let fib = lambda_fibers(l, jet2k, k, 0, k)?.remove(0);
    let shape = JetShape::new(&[k, k])?;
    SemiHolonomicElement::new(base, fiber_jets(&shape, fib)?)
}

/// `F_{L,γ}(t) = Υ_k(j^k Λ_L(j^k γ(t)))` from the `2k`-jet of the curve.
pub fn force_at(l: &dyn Lagrangian, jet2k: &HigherVelocity) -> Result<ForceValue> {
    let p = upsilon(&lambda_jet(l, jet2k)?)?;
    Ok(ForceValue {
        point: p.base,
        f: p.fiber,
    })
}

pub fn force_along(l: &dyn Lagrangian, curve: &dyn CurveEvaluator, t: f64) -> Result<ForceValue> {
    force_at(l, &curve_jet(curve, t, 2 * l.order())?)
}

/// `F_a = Σ_α (−1)^α d^α/dt^α ∂L/∂x^{a,(α)}`, with the partials evaluated on `γ(t + ν)` and the
/// time derivatives read off the resulting jets.
pub fn force_local_oracle(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    t: f64,
) -> Result<ForceValue> {
    let k = l.order();
    let shape = JetShape::new(&[2 * k])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let x = time_derivatives(curve, &time, k)?;
    let d = partials_along(l, &x)?;
    let f = d
        .iter()
        .map(|row| {
            (0..=k)
                .map(|alpha| sign(alpha) * row[alpha].coeffs()[alpha])
                .sum()
        })
        .collect();
    Ok(ForceValue {
        point: x.iter().map(|r| r[0].value()).collect(),
        f,
    })
}

/// `[a][α] ↦ d^α/dt^α γ^a` as jets in `t`; higher coefficients lost to shifting are zero.
fn time_derivatives(
    curve: &dyn CurveEvaluator,
    time: &JetScalar,
    k: usize,
) -> Result<Vec<Vec<JetScalar>>> {
    let pos = curve.eval(time)?;
    pos.into_iter()
        .map(|g| {
            let mut row = vec![g];
            for _ in 0..k {
                let next = row.last().expect("nonempty").shift_axis(0)?;
                row.push(next);
            }
            Ok(row)
        })
        .collect()
}

fn sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `j^{k−1} λ_L(j^k γ(t))` as a semi-holonomic element, from `j^{2k−1} γ(t)`.
pub fn lambda_reduced_jet(
    l: &dyn Lagrangian,
    jet: &HigherVelocity,
) -> Result<SemiHolonomicElement> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("momenta need k ≥ 1".into()));
    }
    let base = jet.project(&[2 * k - 2])?;
    let fib = lambda_fibers(l, jet, k - 1, 0, k - 1)?.remove(0);
    let shape = JetShape::new(&[k - 1, k - 1])?;
    SemiHolonomicElement::new(base, fiber_jets(&shape, fib)?)
}

fn momentum_from_lve(m: LiftedVectorElement) -> Result<CovectorVelocity> {
    let (base, fiber) = m.into_parts();
    let p = fiber.into_iter().map(|j| j.into_coeffs()).collect();
    CovectorVelocity::new(base, p)
}

/// `M_{L,γ}(t) = μ_{k−1}(j^{k−1} λ_L(j^k γ(t)))`, from a jet of order at least `2k − 1`.
pub fn momentum_at(l: &dyn Lagrangian, jet: &HigherVelocity) -> Result<CovectorVelocity> {
    momentum_from_lve(momenta(&lambda_reduced_jet(l, jet)?)?)
}

pub fn momentum_along(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    t: f64,
) -> Result<CovectorVelocity> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("momenta need k ≥ 1".into()));
    }
    momentum_at(l, &curve_jet(curve, t, 2 * k - 1)?)
}

/// `M_{L,γ}(t)` and its time derivative `Ṁ` (fiber only), from `j^{2k} γ(t)`.
///
/// `μ_{k−1}` acts on fibers with constant coefficients, so differentiating its input in `t`
/// differentiates its output.
pub fn momentum_with_rate(
    l: &dyn Lagrangian,
    jet2k: &HigherVelocity,
) -> Result<(CovectorVelocity, Vec<Vec<f64>>)> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("momenta need k ≥ 1".into()));
    }
    let base = jet2k.project(&[2 * k - 2])?;
    let mut fibs = lambda_fibers(l, jet2k, k - 1, 1, k - 1)?;
    let shape = JetShape::new(&[k - 1, k - 1])?;
    let rate_fib = fibs.pop().expect("two time orders");
    let val_fib = fibs.pop().expect("two time orders");
    let m = momenta(&SemiHolonomicElement::new(base.clone(), fiber_jets(&shape, val_fib)?)?)?;
    let dm = momenta(&SemiHolonomicElement::new(base, fiber_jets(&shape, rate_fib)?)?)?;
    let rate = dm.fiber().iter().map(|j| j.coeffs().to_vec()).collect();
    Ok((momentum_from_lve(m)?, rate))
}

/// `p_{a,(α)} = Σ_β (−1)^β d^β/dt^β ∂L/∂x^{a,(α+β+1)}`, converted to `T^{k−1}T*M` by `ε_{k−1}`.
pub fn momentum_local_oracle(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    t: f64,
) -> Result<CovectorVelocity> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("momenta need k ≥ 1".into()));
    }
    let shape = JetShape::new(&[2 * k - 1])?;
    let time = JetScalar::seed(&shape, t, 0)?;
    let x = time_derivatives(curve, &time, k)?;
    let d = partials_along(l, &x)?;
    let lower: Vec<Vec<f64>> = d
        .iter()
        .map(|row| {
            (0..k)
                .map(|alpha| {
                    (0..k - alpha)
                        .map(|beta| sign(beta) * row[alpha + beta + 1].coeffs()[beta])
                        .sum()
                })
                .collect()
        })
        .collect();
    let base = curve_jet(curve, t, k - 1)?;
    dual_eps(&CotangentLift::new(base, lower)?)
}

/// The integrand `⟨dL(j^k γ), κ_k(j^k δγ)⟩` at one time.
pub fn variation_integrand(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    variation: &dyn CurveEvaluator,
    t: f64,
) -> Result<f64> {
    let k = l.order();
    let g = curve_jet(curve, t, k)?;
    let dg = curve_jet(variation, t, k)?;
    if dg.dim() != g.dim() {
        return Err(Error::InvalidArgument("variation and curve dimensions differ".into()));
    }
    let shape = JetShape::new(&[k, 1])?;
    let coords = g
        .coords()
        .iter()
        .zip(dg.coords())
        .map(|(x, dx)| {
            let mut c = x.coeffs().to_vec();
            c.extend_from_slice(dx.coeffs());
            JetScalar::from_coeffs(&shape, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let v = HigherVelocity::new(&shape, coords)?;
    let dl = differential_dl(l, &g)?;
    cotangent_pairing(&dl, &flip_kappa(&v)?)
}

/// `⟨M_{L,γ}(t), j^{k−1} δγ(t)⟩` via the pairing on `T^{k−1} TM`.
pub fn boundary_pairing(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    variation: &dyn CurveEvaluator,
    t: f64,
) -> Result<f64> {
    let k = l.order();
    let m = momentum_along(l, curve, t)?;
    let dg = curve_jet(variation, t, k - 1)?;
    let lve = LiftedVectorElement::new(m.base.clone(), dg.into_coords())?;
    pairing_higher(&m.to_lifted()?, &lve)
}

/// Pointwise form of the first variation, with `d/dt⟨M, j^{k−1}δγ⟩` taken on jets.
/// Returns `(⟨dL, δj^kγ⟩, ⟨F, δγ⟩ + d/dt⟨M, j^{k−1}δγ⟩)`.
pub fn infinitesimal_identity(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    variation: &dyn CurveEvaluator,
    t: f64,
) -> Result<(f64, f64)> {
    let k = l.order();
    let lhs = variation_integrand(l, curve, variation, t)?;
    let jet = curve_jet(curve, t, 2 * k)?;
    let force = force_at(l, &jet)?;
    let dg = curve_jet(variation, t, k)?;
    let fd: f64 = force
        .f
        .iter()
        .zip(dg.coords())
        .map(|(f, d)| f * d.value())
        .sum();
    let (m, mdot) = momentum_with_rate(l, &jet)?;
    // ⟨Ṁ, j^{k−1}δγ⟩ + ⟨M, d/dt j^{k−1}δγ⟩, both with the weights C(k−1, α)
    let mut bd = 0.0;
    for a in 0..l.dim() {
        let dc = dg.coord(a).coeffs();
        for alpha in 0..k {
            let w = binom_f(k - 1, alpha);
            bd += w * mdot[a][alpha] * dc[k - 1 - alpha];
            bd += w * m.p[a][alpha] * dc[k - alpha];
        }
    }
    Ok((lhs, fd + bd))
}

/// Composite 5-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<f64> {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    if panels == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one panel".into()));
    }
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            acc += w * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(acc * 0.5 * h)
}

/// Default panel count of the variation quadrature.
pub const DEFAULT_PANELS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ActionVariation {
    pub lhs: f64,
    pub rhs: f64,
    pub force_integral: f64,
    pub boundary: f64,
    /// `false` when halving the panel count changes either integral by more than `1e-9`
    /// relative.
    pub converged: bool,
}

impl ActionVariation {
    pub fn difference(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Both sides of `⟨dS, δj^kγ⟩ = ∫⟨F, δγ⟩dt + ⟨M, j^{k−1}δγ⟩|_{t0}^{t1}`.
pub fn action_variation(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    variation: &dyn CurveEvaluator,
    t0: f64,
    t1: f64,
    panels: usize,
) -> Result<ActionVariation> {
    let k = l.order();
    if k == 0 {
        return Err(Error::InvalidArgument("action variation needs k ≥ 1".into()));
    }
    let lhs_f = |t: f64| variation_integrand(l, curve, variation, t);
    let rhs_f = |t: f64| -> Result<f64> {
        let force = force_along(l, curve, t)?;
        let d = variation.eval(&JetScalar::scalar(t))?;
        Ok(force.f.iter().zip(&d).map(|(f, x)| f * x.value()).sum())
    };
    let lhs = gauss_legendre(&lhs_f, t0, t1, panels)?;
    let fi = gauss_legendre(&rhs_f, t0, t1, panels)?;
    let converged = if panels >= 2 {
        let lhs2 = gauss_legendre(&lhs_f, t0, t1, panels / 2)?;
        let fi2 = gauss_legendre(&rhs_f, t0, t1, panels / 2)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs());
        close(lhs, lhs2) && close(fi, fi2)
    } else {
        true
    };
    let boundary = boundary_pairing(l, curve, variation, t1)? - boundary_pairing(l, curve, variation, t0)?;
    Ok(ActionVariation {
        lhs,
        rhs: fi + boundary,
        force_integral: fi,
        boundary,
        converged,
    })
}

/// Boundary submanifolds `S ⊂ T^{k−1}M × T^{k−1}M` with a closed-form tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPreset {
    /// Both `(k−1)`-velocities fixed: `TS = 0`.
    Fixed,
    /// Initial `(k−1)`-velocity fixed, final one free.
    FreeFinal,
    /// The diagonal: initial and final `(k−1)`-velocities coincide.
    Periodic,
}

impl BoundaryPreset {
    /// Tangent basis; vectors are laid out `[end][a][α]` with length `2 · dim · k`.
    pub fn basis(self, dim: usize, k: usize) -> Vec<Vec<f64>> {
        let n = dim * k;
        let unit = |i: usize| {
            let mut v = vec![0.0; 2 * n];
            v[i] = 1.0;
            v
        };
        match self {
            BoundaryPreset::Fixed => Vec::new(),
            BoundaryPreset::FreeFinal => (0..n).map(|i| unit(n + i)).collect(),
            BoundaryPreset::Periodic => (0..n)
                .map(|i| {
                    let mut v = unit(i);
                    v[n + i] = 1.0;
                    v
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransversalityReport {
    pub satisfied: bool,
    pub residuals: Vec<f64>,
}

/// Evaluate `(−ε_{k−1}^{-1} M(t0), ε_{k−1}^{-1} M(t1))` on each tangent vector of `S`.
pub fn transversality_check(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    t0: f64,
    t1: f64,
    basis: &[Vec<f64>],
    tol: f64,
) -> Result<TransversalityReport> {
    let k = l.order();
    let dim = l.dim();
    let n = dim * k;
    if let Some(v) = basis.iter().find(|v| v.len() != 2 * n) {
        return Err(Error::InvalidArgument(format!(
            "tangent vector has {} components, expected {}",
            v.len(),
            2 * n
        )));
    }
    let p0 = dual_eps_inverse(&momentum_along(l, curve, t0)?)?;
    let p1 = dual_eps_inverse(&momentum_along(l, curve, t1)?)?;
    let mut cov = Vec::with_capacity(2 * n);
    cov.extend(p0.p.iter().flatten().map(|x| -x));
    cov.extend(p1.p.iter().flatten().copied());
    let residuals: Vec<f64> = basis
        .iter()
        .map(|v| v.iter().zip(&cov).map(|(a, b)| a * b).sum())
        .collect();
    let satisfied = residuals.iter().all(|r| r.abs() <= tol);
    Ok(TransversalityReport {
        satisfied,
        residuals,
    })
}

/// `F_{L,γ}(t) − F_ext(t)`; the external force sees `t` and `j^{2k} γ(t)`.
pub fn forced_el_residual(
    l: &dyn Lagrangian,
    curve: &dyn CurveEvaluator,
    t: f64,
    external: &dyn Fn(f64, &HigherVelocity) -> Result<Vec<f64>>,
) -> Result<ForceValue> {
    let jet = curve_jet(curve, t, 2 * l.order())?;
    let mut force = force_at(l, &jet)?;
    let ext = external(t, &jet)?;
    if ext.len() != force.f.len() {
        return Err(Error::InvalidArgument("external force has wrong dimension".into()));
    }
    force.f.iter_mut().zip(ext).for_each(|(f, e)| *f -= e);
    Ok(force)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundles::{FnCurve, PolynomialCurve};

    fn harmonic() -> impl Lagrangian {
        FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| {
            Ok((&x[0][1] * &x[0][1] - &x[0][0] * &x[0][0]).scale(0.5))
        })
    }

    fn accel_sq(scale: f64) -> impl Lagrangian {
        FnLagrangian::new(1, 2, move |x: &[Vec<JetScalar>]| Ok((&x[0][2] * &x[0][2]).scale(scale)))
    }

    #[test]
    fn dl_examples() {
        let kin = FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| Ok((&x[0][1] * &x[0][1]).scale(0.5)));
        let v = HigherVelocity::from_arrays(&[1], vec![vec![2.0, 3.0]]).unwrap();
        assert_eq!(differential_dl(&kin, &v).unwrap().p, vec![vec![0.0, 3.0]]);

        let mixed = FnLagrangian::new(1, 2, |x: &[Vec<JetScalar>]| Ok(&x[0][0] * &x[0][2]));
        let w = HigherVelocity::from_arrays(&[2], vec![vec![2.0, 3.0, 5.0]]).unwrap();
        assert_eq!(differential_dl(&mixed, &w).unwrap().p, vec![vec![5.0, 0.0, 2.0]]);

        let lam = lambda_full(&kin, &v).unwrap();
        assert_eq!(lam.p, vec![vec![3.0, 0.0]]);
        assert_eq!(lam.base, v);
        assert_eq!(lambda_reduced(&kin, &v).unwrap().p, vec![vec![3.0]]);
    }

    #[test]
    fn harmonic_force_vanishes_on_sine() {
        let l = harmonic();
        let sine = FnCurve::new(1, |t: &JetScalar| Ok(vec![t.sin()]));
        for t in [0.0, 0.4, 2.1] {
            let f = force_along(&l, &sine, t).unwrap();
            assert!(f.f[0].abs() < 1e-14);
            let o = force_local_oracle(&l, &sine, t).unwrap();
            assert!(o.f[0].abs() < 1e-14);
        }
    }

    #[test]
    fn acceleration_squared_force() {
        let quartic = PolynomialCurve::new(vec![vec![0.0, 0.0, 0.0, 0.0, 1.0]]);
        let f = force_along(&accel_sq(1.0), &quartic, 0.3).unwrap();
        assert!((f.f[0] - 48.0).abs() < 1e-12);
        let f = force_along(&accel_sq(0.5), &quartic, 0.3).unwrap();
        assert!((f.f[0] - 24.0).abs() < 1e-12);
        let o = force_local_oracle(&accel_sq(0.5), &quartic, 0.3).unwrap();
        assert!((o.f[0] - 24.0).abs() < 1e-12);
    }

    #[test]
    fn acceleration_squared_momentum() {
        let cubic = PolynomialCurve::new(vec![vec![0.0, 0.0, 0.0, 1.0]]);
        let m = momentum_along(&accel_sq(0.5), &cubic, 1.0).unwrap();
        let lower = dual_eps_inverse(&m).unwrap();
        assert!((lower.p[0][1] - 6.0).abs() < 1e-12);
        assert!((lower.p[0][0] + 6.0).abs() < 1e-12);
        let o = momentum_local_oracle(&accel_sq(0.5), &cubic, 1.0).unwrap();
        assert!((o.p[0][0] - m.p[0][0]).abs() < 1e-12 && (o.p[0][1] - m.p[0][1]).abs() < 1e-12);
    }

    #[test]
    fn first_order_momentum_is_classical() {
        let l = harmonic();
        let sine = FnCurve::new(1, |t: &JetScalar| Ok(vec![t.sin()]));
        let m = momentum_along(&l, &sine, 0.7).unwrap();
        assert!((m.p[0][0] - 0.7f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn zero_variation_gives_zero() {
        let l = accel_sq(0.5);
        let g = PolynomialCurve::new(vec![vec![0.1, 0.2, -0.3, 0.4]]);
        let z = PolynomialCurve::new(vec![vec![0.0]]);
        let r = action_variation(&l, &g, &z, 0.0, 1.0, 8).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    }

    #[test]
    fn variation_identity_on_polynomials() {
        let l = accel_sq(0.5);
        let g = PolynomialCurve::new(vec![vec![0.1, 0.2, -0.3, 0.4, 0.7]]);
        let d = PolynomialCurve::new(vec![vec![1.0, -0.5, 0.25, 2.0]]);
        let r = action_variation(&l, &g, &d, 0.0, 1.0, DEFAULT_PANELS).unwrap();
        assert!(r.converged);
        assert!(r.difference() < 1e-10, "{r:?}");
        let (a, b) = infinitesimal_identity(&l, &g, &d, 0.37).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn transversality_presets() {
        let l = FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| Ok((&x[0][1] * &x[0][1]).scale(0.5)));
        let line = PolynomialCurve::new(vec![vec![0.0, 1.0]]);
        let fixed = transversality_check(&l, &line, 0.0, 1.0, &BoundaryPreset::Fixed.basis(1, 1), 1e-9).unwrap();
        assert!(fixed.satisfied && fixed.residuals.is_empty());
        let free = transversality_check(&l, &line, 0.0, 1.0, &BoundaryPreset::FreeFinal.basis(1, 1), 1e-9).unwrap();
        assert!(!free.satisfied);
        assert!((free.residuals[0] - 1.0).abs() < 1e-14);
        let periodic = transversality_check(&l, &line, 0.0, 1.0, &BoundaryPreset::Periodic.basis(1, 1), 1e-9).unwrap();
        assert!(periodic.satisfied);
        assert!(transversality_check(&l, &line, 0.0, 1.0, &[vec![1.0]], 1e-9).is_err());
    }

    #[test]
    fn symbolic_partials() {
        let l = PolynomialLagrangian {
            dim: 1,
            k: 1,
            terms: vec![Monomial { coef: 3.0, factors: vec![(0, 0, 2), (0, 1, 1)] }],
        };
        let p = l.partial(0, 0);
        assert_eq!(p.terms, vec![Monomial { coef: 6.0, factors: vec![(0, 0, 1), (0, 1, 1)] }]);
        assert!(l.partial(0, 1).partial(0, 1).terms.is_empty());
    }

    #[test]
    fn gauss_legendre_is_exact_for_degree_nine() {
        let f = |t: f64| Ok(t.powi(9) - 2.0 * t.powi(4));
        let v = gauss_legendre(&f, 0.0, 2.0, 1).unwrap();
        assert!((v - (102.4 - 12.8)).abs() < 1e-12);
    }
}
