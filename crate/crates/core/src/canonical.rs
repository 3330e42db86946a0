//! Canonical morphisms between lifted bundles: pairings, `κ_k`, `ε_k`, `P_k`, `Υ_k`, `μ_k`.

use crate::bundles::{
    HigherVelocity, LiftedVectorElement, SemiHolonomicElement, VectorBundlePoint,
};
use crate::error::{Error, Result};
use crate::weil::{binom_f, JetScalar, JetShape};

/// Bases of paired elements must agree to this relative tolerance (unit floor).
pub const BASE_TOL: f64 = 1e-9;

fn check_pairable(xi: &LiftedVectorElement, v: &LiftedVectorElement) -> Result<()> {
    if xi.orders() != v.orders() {
        return Err(Error::shape(xi.orders(), v.orders()));
    }
    if xi.fiber_dim() != v.fiber_dim() {
        return Err(Error::PairingDomain(format!(
            "dual fiber has rank {}, fiber has rank {}",
            xi.fiber_dim(),
            v.fiber_dim()
        )));
    }
    if !xi.base().agrees_with(v.base(), BASE_TOL) {
        return Err(Error::PairingDomain("elements lie over different base points".into()));
    }
    Ok(())
}

/// Pairing of `T^{n_1} … T^{n_r} E*` with `T^{n_1} … T^{n_r} E`:
/// `Σ_i Σ_ε Π_j C(n_j, ε_j) ξ_i^{(ε)} y^{i,(n−ε)}`.
pub fn pairing_lifted(xi: &LiftedVectorElement, v: &LiftedVectorElement) -> Result<f64> {
    check_pairable(xi, v)?;
    let shape = xi.shape();
    let len = shape.len();
    let weights: Vec<f64> = (0..len)
        .map(|idx| {
            shape
                .exponents(idx)
                .iter()
                .zip(shape.orders())
                .map(|(&e, &n)| binom_f(n, e))
                .product()
        })
        .collect();
    let mut acc = 0.0;
    for (a, b) in xi.fiber().iter().zip(v.fiber()) {
        let (a, b) = (a.coeffs(), b.coeffs());
        for idx in 0..len {
            // the complementary multi-exponent n − ε has linear index len − 1 − idx
            acc += weights[idx] * a[idx] * b[len - 1 - idx];
        }
    }
    Ok(acc)
}

/// Pairing on the iterated first-order lift `T^{(k)} E`, shape `(1, …, 1)`.
pub fn pairing_iterated(xi: &LiftedVectorElement, v: &LiftedVectorElement) -> Result<f64> {
    if xi.orders().iter().any(|&n| n != 1) {
        return Err(Error::InvalidArgument(format!(
            "iterated pairing needs shape (1,…,1), got {:?}",
            xi.orders()
        )));
    }
    pairing_lifted(xi, v)
}

/// Pairing on `T^k E`: `Σ_i Σ_α C(k,α) ξ_i^{(α)} y^{i,(k−α)}`.
pub fn pairing_higher(xi: &LiftedVectorElement, v: &LiftedVectorElement) -> Result<f64> {
    if xi.orders().len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "higher pairing needs a single order, got {:?}",
            xi.orders()
        )));
    }
    pairing_lifted(xi, v)
}

/// Element of `T*T^k M`: base `k`-velocity and momenta `p_{a,(α)}`, stored `[a][α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentLift {
    pub base: HigherVelocity,
    pub p: Vec<Vec<f64>>,
}

/// Element of `T^k T*M`: base `k`-velocity and momenta `p_a^{(α)}`, stored `[a][α]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorVelocity {
    pub base: HigherVelocity,
    pub p: Vec<Vec<f64>>,
}

fn single_order(v: &HigherVelocity) -> Result<usize> {
    match v.orders() {
        [k] => Ok(*k),
        o => Err(Error::InvalidArgument(format!("expected a k-velocity, got shape {o:?}"))),
    }
}

fn check_momenta(base: &HigherVelocity, p: &[Vec<f64>]) -> Result<usize> {
    let k = single_order(base)?;
    if p.len() != base.dim() || p.iter().any(|row| row.len() != k + 1) {
        return Err(Error::InvalidArgument(format!(
            "momenta must be {} rows of {} entries",
            base.dim(),
            k + 1
        )));
    }
    Ok(k)
}

impl CotangentLift {
    pub fn new(base: HigherVelocity, p: Vec<Vec<f64>>) -> Result<Self> {
        check_momenta(&base, &p)?;
        Ok(CotangentLift { base, p })
    }

    pub fn k(&self) -> usize {
        self.base.orders()[0]
    }
}

impl CovectorVelocity {
    pub fn new(base: HigherVelocity, p: Vec<Vec<f64>>) -> Result<Self> {
        check_momenta(&base, &p)?;
        Ok(CovectorVelocity { base, p })
    }

    pub fn k(&self) -> usize {
        self.base.orders()[0]
    }

    /// Projection `T^k T*M → T^{m} T*M`.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        let base = self.base.project(&[m])?;
        let p = self.p.iter().map(|row| row[..=m].to_vec()).collect();
        Ok(CovectorVelocity { base, p })
    }

    /// View as a point of `T^k E*` with `E = TM`, for use with [`pairing_higher`].
    pub fn to_lifted(&self) -> Result<LiftedVectorElement> {
        let shape = self.base.shape().clone();
        let fiber = self
            .p
            .iter()
            .map(|row| JetScalar::from_coeffs(&shape, row.clone()))
            .collect::<Result<Vec<_>>>()?;
        LiftedVectorElement::new(self.base.clone(), fiber)
    }
}

/// `⟨Ψ, W⟩ = Σ_a Σ_α p_{a,(α)} W^{a,(1,α)}` for `W ∈ T T^k M` of shape `(1, k)`.
pub fn cotangent_pairing(psi: &CotangentLift, w: &HigherVelocity) -> Result<f64> {
    let k = psi.k();
    if w.orders() != [1, k] {
        return Err(Error::shape(&[1, k], w.orders()));
    }
    let foot = w.map(|c| c.slice_axis(0, 0))?;
    if !foot.agrees_with(&psi.base, BASE_TOL) {
        return Err(Error::PairingDomain("tangent vector is not attached at the covector's base".into()));
    }
    let mut acc = 0.0;
    for (row, c) in psi.p.iter().zip(w.coords()) {
        for (alpha, pa) in row.iter().enumerate() {
            acc += pa * c.coeff(&[1, alpha])?;
        }
    }
    Ok(acc)
}

/// Pairing of `T^k T*M` with `T^k T M` (shape `(k, 1)`): `Σ C(k,α) p^{(α)} V^{(k−α, 1)}`.
pub fn covector_velocity_pairing(cv: &CovectorVelocity, v: &HigherVelocity) -> Result<f64> {
    let k = cv.k();
    if v.orders() != [k, 1] {
        return Err(Error::shape(&[k, 1], v.orders()));
    }
    let foot = v.map(|c| c.slice_axis(1, 0))?;
    let vec = v.map(|c| c.slice_axis(1, 1))?;
    let fiber = vec.into_coords();
    let lve = LiftedVectorElement::new(foot, fiber)?;
    pairing_higher(&cv.to_lifted()?, &lve)
}

fn check_flip_shape(orders: &[usize], first: bool) -> Result<usize> {
    match orders {
        [k, 1] if first => Ok(*k),
        [1, k] if !first => Ok(*k),
        o => Err(Error::InvalidArgument(format!(
            "canonical flip does not apply to shape {o:?}"
        ))),
    }
}

/// `κ_k : T^k T M → T T^k M`, the exponent swap `(α, ε) ↦ (ε, α)`.
pub fn flip_kappa(v: &HigherVelocity) -> Result<HigherVelocity> {
    check_flip_shape(v.orders(), true)?;
    v.map(|c| c.permute_axes(&[1, 0]))
}

/// `κ_k^{-1} : T T^k M → T^k T M`.
pub fn flip_kappa_inv(w: &HigherVelocity) -> Result<HigherVelocity> {
    check_flip_shape(w.orders(), false)?;
    w.map(|c| c.permute_axes(&[1, 0]))
}

/// `ε_k : T*T^k M → T^k T*M`, `p^{(α)} = C(k,α)^{-1} p_{(k−α)}`.
pub fn dual_eps(psi: &CotangentLift) -> Result<CovectorVelocity> {
    let k = check_momenta(&psi.base, &psi.p)?;
    let p = psi
        .p
        .iter()
        .map(|row| (0..=k).map(|a| row[k - a] / binom_f(k, a)).collect())
        .collect();
    Ok(CovectorVelocity {
        base: psi.base.clone(),
        p,
    })
}

/// `ε_k^{-1}`, `p_{(α)} = C(k,α) p^{(k−α)}`.
pub fn dual_eps_inverse(cv: &CovectorVelocity) -> Result<CotangentLift> {
    let k = check_momenta(&cv.base, &cv.p)?;
    let p = cv
        .p
        .iter()
        .map(|row| (0..=k).map(|a| binom_f(k, a) * row[k - a]).collect())
        .collect();
    Ok(CotangentLift {
        base: cv.base.clone(),
        p,
    })
}

/// `P_k : T̂^{(1,…,1)} E → T^k E`, `ȳ^{(α)} = C(k,α)^{-1} Σ_{|ε|=α} y^{(ε)}`.
pub fn project_pk(x: &LiftedVectorElement) -> Result<LiftedVectorElement> {
    if x.orders().iter().any(|&n| n != 1) {
        return Err(Error::InvalidArgument(format!(
            "P_k acts on shape (1,…,1), got {:?}",
            x.orders()
        )));
    }
    let k = x.orders().len();
    let base = x.base().holonomic_merge()?;
    let src = x.shape();
    let dst = JetShape::new(&[k])?;
    let fiber = x
        .fiber()
        .iter()
        .map(|y| {
            let mut c = vec![0.0; k + 1];
            for (idx, v) in y.coeffs().iter().enumerate() {
                c[src.degree(idx)] += v;
            }
            for (alpha, v) in c.iter_mut().enumerate() {
                *v /= binom_f(k, alpha);
            }
            JetScalar::from_coeffs(&dst, c)
        })
        .collect::<Result<Vec<_>>>()?;
    LiftedVectorElement::new(base, fiber)
}

/// Holonomic re-indexing of `Φ^{(m,n)} ∈ T^m T^n E` into `T^{(m+n)} E`.
fn include_iterated(lve: &LiftedVectorElement) -> Result<LiftedVectorElement> {
    let parts: Vec<Vec<usize>> = lve.orders().iter().map(|&n| vec![1; n]).collect();
    lve.split_axes(&parts)
}

/// `Υ_k`, in coordinates `Σ_α (−1)^α C(k,α) y^{i,(α, k−α)}`; covers the base point.
pub fn upsilon(phi: &SemiHolonomicElement) -> Result<VectorBundlePoint> {
    let k = phi.k();
    let fiber = phi
        .fiber()
        .iter()
        .map(|y| {
            let mut acc = 0.0;
            for alpha in 0..=k {
                let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom_f(k, alpha) * y.coeff(&[alpha, k - alpha])?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorBundlePoint {
        base: phi.base().point(),
        fiber,
    })
}

/// `Φ̃ = Σ_j (−1)^j C(k,j) Φ^{(j,k−j)}` inside `T^{(k)} E`.
pub fn alternating_sum(phi: &SemiHolonomicElement) -> Result<LiftedVectorElement> {
    let k = phi.k();
    let mut acc: Option<LiftedVectorElement> = None;
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let term = include_iterated(&phi.projection(j, k - j)?)?.scale_fiber(sign * binom_f(k, j));
        acc = Some(match acc {
            None => term,
            Some(a) => a.try_add(&term)?,
        });
    }
    Ok(acc.expect("k + 1 ≥ 1 terms"))
}

/// `Υ_k` through its defining property `⟨Υ_k Φ, ξ⟩ = ⟨Φ̃, j^k ξ⟩`.
///
/// `higher[i]` supplies the jet data `ξ^{(1)}, …, ξ^{(k)}` of an extension of the `i`-th dual
/// basis covector; the result must not depend on it.
pub fn upsilon_via_pairing(
    phi: &SemiHolonomicElement,
    higher: &[Vec<Vec<f64>>],
) -> Result<Vec<f64>> {
    let k = phi.k();
    let rank = phi.fiber_dim();
    if higher.len() != rank {
        return Err(Error::InvalidArgument(format!(
            "need one extension per basis covector ({rank})"
        )));
    }
    let tilde = alternating_sum(phi)?;
    let base_k = phi.base().project(&[k])?;
    let ones = vec![1usize; k];
    (0..rank)
        .map(|i| {
            let ext = &higher[i];
            if ext.len() != rank || ext.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidArgument(
                    "extension must give k higher coefficients per fiber coordinate".into(),
                ));
            }
            let arrays: Vec<Vec<f64>> = (0..rank)
                .map(|l| {
                    let mut c = vec![if l == i { 1.0 } else { 0.0 }];
                    c.extend_from_slice(&ext[l]);
                    c
                })
                .collect();
            let shape = base_k.shape().clone();
            let fiber = arrays
                .into_iter()
                .map(|c| JetScalar::from_coeffs(&shape, c))
                .collect::<Result<Vec<_>>>()?;
            let xi = LiftedVectorElement::new(base_k.clone(), fiber)?.holonomic_include(&ones)?;
            pairing_lifted(&xi, &tilde)
        })
        .collect()
}

/// `μ_k = P_k[Σ_{j=0}^{k} (−1)^j C(k+1, j+1) Φ^{(j, k−j)}]`, valued in `T^k E`.
pub fn momenta(phi: &SemiHolonomicElement) -> Result<LiftedVectorElement> {
    let k = phi.k();
    if k == 0 {
        let p = phi.projection(0, 0)?;
        return p.map(|c| c.reinterpret_scalar_as(&[0]));
    }
    let mut acc: Option<LiftedVectorElement> = None;
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let term = include_iterated(&phi.projection(j, k - j)?)?
            .scale_fiber(sign * binom_f(k + 1, j + 1));
        acc = Some(match acc {
            None => term,
            Some(a) => a.try_add(&term)?,
        });
    }
    project_pk(&acc.expect("k + 1 ≥ 1 terms"))
}

impl JetScalar {
    /// Reinterpret a jet whose shape has only zero orders as any other all-zero shape.
    pub(crate) fn reinterpret_scalar_as(&self, orders: &[usize]) -> Result<JetScalar> {
        if self.shape().len() != 1 || orders.iter().any(|&n| n != 0) {
            return Err(Error::InvalidArgument("not a zero-order jet".into()));
        }
        JetScalar::from_coeffs(&JetShape::new(orders)?, vec![self.value()])
    }
}
