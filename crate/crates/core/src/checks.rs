//! Randomized identity suite for the canonical maps and the variational pipeline.
//!
//! Every group draws its samples from ChaCha8 seeded with the suite seed, on a stream equal to
//! the group's index, so each group is reproducible on its own and independent of scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundles::{
    alpha_lift_eval, FnChart, HigherVelocity, LiftedVectorElement, PolynomialCurve,
    SemiHolonomicElement,
};
use crate::canonical::{
    cotangent_pairing, covector_velocity_pairing, dual_eps, flip_kappa, momenta, pairing_higher,
    pairing_lifted, project_pk, upsilon, upsilon_via_pairing, CotangentLift,
};
use crate::error::{Error, Result};
use crate::linalg::determinant;
use crate::variational::{
    action_variation, force_along, force_local_oracle, infinitesimal_identity, momentum_along,
    momentum_local_oracle, Monomial, PolynomialLagrangian, DEFAULT_PANELS,
};
use crate::weil::{JetScalar, JetShape};

/// `|a − b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(rel_err(*x, *y)))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

// ---- random instances ----------------------------------------------------------------------

pub fn random_velocity(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> HigherVelocity {
    let arrays = (0..dim).map(|_| uniform(rng, k + 1)).collect();
    HigherVelocity::from_arrays(&[k], arrays).expect("valid order")
}

/// Uniform coefficients in `[−1, 1]` for the base `2k`-velocity and the `(k, k)` fiber grid.
pub fn random_semi_holonomic(
    rng: &mut ChaCha8Rng,
    k: usize,
    dim: usize,
    rank: usize,
) -> SemiHolonomicElement {
    let base = (0..dim).map(|_| uniform(rng, 2 * k + 1)).collect();
    let fiber = (0..rank).map(|_| uniform(rng, (k + 1) * (k + 1))).collect();
    SemiHolonomicElement::from_arrays(k, base, fiber).expect("valid shapes")
}

/// `j^k ξ` over `base`: random jets of a section of the dual bundle.
pub fn random_dual_jet(
    rng: &mut ChaCha8Rng,
    base: &HigherVelocity,
    rank: usize,
) -> LiftedVectorElement {
    let n = base.shape().len();
    let fiber = (0..rank)
        .map(|_| JetScalar::from_coeffs(base.shape(), uniform(rng, n)).expect("sized"))
        .collect();
    LiftedVectorElement::new(base.clone(), fiber).expect("uniform shapes")
}

/// One to four monomials of up to three factors `x^{a,(α)}`, powers at most three.
pub fn random_polynomial_lagrangian(
    rng: &mut ChaCha8Rng,
    dim: usize,
    k: usize,
) -> PolynomialLagrangian {
    let n_terms = rng.gen_range(1..=4);
    let mut terms: Vec<Monomial> = (0..n_terms)
        .map(|_| {
            let n_fac = rng.gen_range(1..=3);
            Monomial {
                coef: rng.gen_range(-1.0..1.0),
                factors: (0..n_fac)
                    .map(|_| (rng.gen_range(0..dim), rng.gen_range(0..=k), rng.gen_range(1..=3)))
                    .collect(),
            }
        })
        .collect();
    // make sure the top order is present
    terms.push(Monomial {
        coef: rng.gen_range(0.5..1.0),
        factors: vec![(rng.gen_range(0..dim), k, 2)],
    });
    PolynomialLagrangian { dim, k, terms }
}

pub fn random_polynomial_curve(rng: &mut ChaCha8Rng, dim: usize, degree: usize) -> PolynomialCurve {
    PolynomialCurve::new((0..dim).map(|_| uniform(rng, degree + 1)).collect())
}

// ---- the groups ------------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    UpsilonWellDefined,
    UpsilonRecurrence,
    MomentaRecurrence,
    IntegrationByParts,
    GeneralRecurrence,
    Functoriality,
    KappaEpsDuality,
    ProjectionLeftInverse,
    PairingNondegenerate,
    CompleteLift,
    ForceClassical,
    MomentumClassical,
    InfinitesimalIdentity,
    ActionVariation,
}

impl Group {
    pub const ALL: [Group; 14] = [
        Group::UpsilonWellDefined,
        Group::UpsilonRecurrence,
        Group::MomentaRecurrence,
        Group::IntegrationByParts,
        Group::GeneralRecurrence,
        Group::Functoriality,
        Group::KappaEpsDuality,
        Group::ProjectionLeftInverse,
        Group::PairingNondegenerate,
        Group::CompleteLift,
        Group::ForceClassical,
        Group::MomentumClassical,
        Group::InfinitesimalIdentity,
        Group::ActionVariation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::UpsilonWellDefined => "upsilon_well_defined",
            Group::UpsilonRecurrence => "upsilon_recurrence",
            Group::MomentaRecurrence => "momenta_recurrence",
            Group::IntegrationByParts => "integration_by_parts",
            Group::GeneralRecurrence => "general_recurrence",
            Group::Functoriality => "functoriality",
            Group::KappaEpsDuality => "kappa_eps_duality",
            Group::ProjectionLeftInverse => "projection_left_inverse",
            Group::PairingNondegenerate => "pairing_nondegenerate",
            Group::CompleteLift => "complete_lift",
            Group::ForceClassical => "force_vs_classical",
            Group::MomentumClassical => "momentum_vs_classical",
            Group::InfinitesimalIdentity => "infinitesimal_identity",
            Group::ActionVariation => "action_variation",
        }
    }

    /// Relative tolerance on the worst sample (for the Gram group: lower bound on `|det|`).
    pub fn tolerance(self) -> f64 {
        match self {
            Group::Functoriality | Group::ForceClassical | Group::MomentumClassical => 1e-9,
            Group::InfinitesimalIdentity => 1e-9,
            Group::ActionVariation => 1e-6,
            Group::PairingNondegenerate => 1e-8,
            _ => 1e-12,
        }
    }

    fn index(self) -> u64 {
        Group::ALL.iter().position(|g| *g == self).expect("listed") as u64
    }

    pub fn run(self, seed: u64, max_k: usize) -> GroupReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.index());
        let mut stat = Stat::default();
        let outcome = match self {
            Group::UpsilonWellDefined => per_k_dim(&mut rng, max_k, 50, &mut stat, well_defined),
            Group::UpsilonRecurrence => per_k_dim(&mut rng, max_k, 50, &mut stat, |r, k, d| {
                let phi = random_semi_holonomic(r, k, d, d);
                Ok(max_rel(&upsilon(&phi)?.fiber, &upsilon_nested(&phi)?))
            }),
            Group::MomentaRecurrence => per_k_dim(&mut rng, max_k, 50, &mut stat, |r, k, d| {
                let phi = random_semi_holonomic(r, k, d, d);
                let xi = random_dual_jet(r, &phi.base().project(&[k])?, d);
                let (a, b) = momenta_recurrence(&phi, &xi)?;
                Ok(rel_err(a, b))
            }),
            Group::IntegrationByParts => per_k_dim(&mut rng, max_k, 50, &mut stat, |r, k, d| {
                let phi = random_semi_holonomic(r, k, d, d);
                let xi = random_dual_jet(r, &phi.base().project(&[k])?, d);
                let (a, b) = integration_by_parts(&phi, &xi)?;
                Ok(rel_err(a, b))
            }),
            Group::GeneralRecurrence => general_recurrence_group(&mut rng, &mut stat),
            Group::Functoriality => {
                per_k_dim(&mut rng, max_k, 20, &mut stat, functoriality_sample)
            }
            Group::KappaEpsDuality => per_k_dim(&mut rng, max_k, 50, &mut stat, duality_sample),
            Group::ProjectionLeftInverse => {
                per_k_dim(&mut rng, max_k, 50, &mut stat, |r, k, d| {
                    let base = random_velocity(r, d, k);
                    let x = random_dual_jet(r, &base, d);
                    let back = project_pk(&x.holonomic_include(&vec![1; k])?)?;
                    Ok(lve_distance(&x, &back))
                })
            }
            Group::PairingNondegenerate => gram_group(max_k.max(4), &mut stat),
            Group::CompleteLift => per_k_dim(&mut rng, max_k, 50, &mut stat, complete_lift_sample),
            Group::ForceClassical => per_k(&mut rng, max_k, 20, &mut stat, |r, k| {
                let d = r.gen_range(1..=3);
                let l = random_polynomial_lagrangian(r, d, k);
                let c = random_polynomial_curve(r, d, 2 * k + 2);
                let t = r.gen_range(-1.0..1.0);
                Ok(max_rel(&force_along(&l, &c, t)?.f, &force_local_oracle(&l, &c, t)?.f))
            }),
            Group::MomentumClassical => per_k(&mut rng, max_k, 20, &mut stat, |r, k| {
                let d = r.gen_range(1..=3);
                let l = random_polynomial_lagrangian(r, d, k);
                let c = random_polynomial_curve(r, d, 2 * k + 2);
                let t = r.gen_range(-1.0..1.0);
                let a = momentum_along(&l, &c, t)?;
                let b = momentum_local_oracle(&l, &c, t)?;
                let flat = |p: &[Vec<f64>]| p.concat();
                Ok(max_rel(&flat(&a.p), &flat(&b.p)))
            }),
            Group::InfinitesimalIdentity => per_k(&mut rng, max_k, 20, &mut stat, |r, k| {
                let d = r.gen_range(1..=3);
                let l = random_polynomial_lagrangian(r, d, k);
                let c = random_polynomial_curve(r, d, 2 * k + 2);
                let v = random_polynomial_curve(r, d, 2 * k + 2);
                let t = r.gen_range(-1.0..1.0);
                let (a, b) = infinitesimal_identity(&l, &c, &v, t)?;
                Ok(rel_err(a, b))
            }),
            Group::ActionVariation => action_variation_group(&mut rng, max_k, 10, &mut stat),
        };
        GroupReport {
            group: self,
            samples: stat.samples,
            max_error: stat.max_error,
            failure: outcome.err().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Stat {
    samples: usize,
    max_error: f64,
}

impl Stat {
    fn push(&mut self, e: f64) {
        self.samples += 1;
        // NaN must not pass
        self.max_error = if e.is_nan() { f64::INFINITY } else { self.max_error.max(e) };
    }
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub group: Group,
    pub samples: usize,
    /// Worst relative error; for [`Group::PairingNondegenerate`] the smallest `|det|`.
    pub max_error: f64,
    pub failure: Option<String>,
}

impl GroupReport {
    pub fn passed(&self) -> bool {
        if self.failure.is_some() || self.samples == 0 {
            return false;
        }
        match self.group {
            Group::PairingNondegenerate => self.max_error > self.group.tolerance(),
            g => self.max_error <= g.tolerance(),
        }
    }
}

/// Every group, in listing order.
pub fn run_suite(seed: u64, max_k: usize) -> Vec<GroupReport> {
    Group::ALL.iter().map(|g| g.run(seed, max_k)).collect()
}

fn per_k_dim(
    rng: &mut ChaCha8Rng,
    max_k: usize,
    samples: usize,
    stat: &mut Stat,
    mut f: impl FnMut(&mut ChaCha8Rng, usize, usize) -> Result<f64>,
) -> Result<()> {
    for k in 1..=max_k {
        for dim in 1..=3 {
            for _ in 0..samples {
                stat.push(f(rng, k, dim)?);
            }
        }
    }
    Ok(())
}

fn per_k(
    rng: &mut ChaCha8Rng,
    max_k: usize,
    samples: usize,
    stat: &mut Stat,
    mut f: impl FnMut(&mut ChaCha8Rng, usize) -> Result<f64>,
) -> Result<()> {
    for k in 1..=max_k {
        for _ in 0..samples {
            stat.push(f(rng, k)?);
        }
    }
    Ok(())
}

fn lve_distance(a: &LiftedVectorElement, b: &LiftedVectorElement) -> f64 {
    if a.orders() != b.orders() || a.fiber_dim() != b.fiber_dim() {
        return f64::INFINITY;
    }
    let flat = |v: &LiftedVectorElement| -> Vec<f64> {
        v.base()
            .coords()
            .iter()
            .chain(v.fiber())
            .flat_map(|j| j.coeffs().to_vec())
            .collect()
    };
    max_rel(&flat(a), &flat(b))
}

// ---- canonical-map identities ---------------------------------------------------------------

fn well_defined(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<f64> {
    let phi = random_semi_holonomic(rng, k, dim, dim);
    let direct = upsilon(&phi)?.fiber;
    let mut err: f64 = 0.0;
    for _ in 0..2 {
        let ext: Vec<Vec<Vec<f64>>> = (0..dim)
            .map(|_| (0..dim).map(|_| uniform(rng, k)).collect())
            .collect();
        err = err.max(max_rel(&direct, &upsilon_via_pairing(&phi, &ext)?));
    }
    Ok(err)
}

/// `Υ_1 ∘ Υ_{k−1, TTσ}` on `Φ` viewed in `T^{k−1} T^{k−1} T T E`.
pub fn upsilon_nested(phi: &SemiHolonomicElement) -> Result<Vec<f64>> {
    let k = phi.k();
    if k == 0 {
        return Err(Error::InvalidArgument("the recurrence starts at k = 1".into()));
    }
    let nested = phi
        .to_lifted()?
        .split_axes(&[vec![k - 1, 1], vec![k - 1, 1]])?
        .permute_axes(&[0, 2, 1, 3])?
        .absorb_trailing_axes(2)?;
    let inner = upsilon(&SemiHolonomicElement::from_lifted(&nested)?)?;
    let outer = inner.into_lifted().emit_trailing_axes(&[1, 1])?;
    Ok(upsilon(&SemiHolonomicElement::from_lifted(&outer)?)?.fiber)
}

/// `Υ_k ∘ Υ_{l, T̂^{(k,k)}σ}` on `Φ ∈ T̂^{(k+l,k+l)} E` viewed in `T^l T^l T^k T^k E`.
pub fn upsilon_composed(phi: &SemiHolonomicElement, k: usize, l: usize) -> Result<Vec<f64>> {
    if phi.k() != k + l {
        return Err(Error::InvalidArgument(format!(
            "element has order {}, expected {}",
            phi.k(),
            k + l
        )));
    }
    let nested = phi
        .to_lifted()?
        .split_axes(&[vec![l, k], vec![l, k]])?
        .permute_axes(&[0, 2, 1, 3])?
        .absorb_trailing_axes(2)?;
    let inner = upsilon(&SemiHolonomicElement::from_lifted(&nested)?)?;
    let outer = inner.into_lifted().emit_trailing_axes(&[k, k])?;
    Ok(upsilon(&SemiHolonomicElement::from_lifted(&outer)?)?.fiber)
}

fn dot_base(ups: &[f64], xi: &LiftedVectorElement) -> f64 {
    ups.iter().zip(xi.fiber()).map(|(u, x)| u * x.value()).sum()
}

/// `μ_{k−1}` applied to `T`-valued data: the last axis of `lve` is the extra tangent direction.
fn momenta_trailing_tangent(lve: &LiftedVectorElement) -> Result<LiftedVectorElement> {
    let absorbed = lve.absorb_trailing_axes(1)?;
    momenta(&SemiHolonomicElement::from_lifted(&absorbed)?)?.emit_trailing_axes(&[1])
}

/// Both sides of `⟨μ_k Φ, j^kξ⟩ = ⟨Υ_k Φ, ξ⟩ + ⟨μ_{k−1,Tσ} Φ^{(k−1,k)}, j^kξ⟩`.
pub fn momenta_recurrence(
    phi: &SemiHolonomicElement,
    xi: &LiftedVectorElement,
) -> Result<(f64, f64)> {
    let k = phi.k();
    let lhs = pairing_higher(xi, &momenta(phi)?)?;
    let ups = upsilon(phi)?.fiber;
    let lower = phi
        .projection(k - 1, k)?
        .split_axes(&[vec![k - 1], vec![k - 1, 1]])?;
    let mu = momenta_trailing_tangent(&lower)?;
    let xi_split = xi.split_axes(&[vec![k - 1, 1]])?;
    Ok((lhs, dot_base(&ups, xi) + pairing_lifted(&xi_split, &mu)?))
}

/// Both sides of `⟨Φ^{(0,k)}, j^kξ⟩ = ⟨Υ_k Φ, ξ⟩ + ⟨T μ_{k−1} Φ^{(k,k−1)}, j^kξ⟩`.
pub fn integration_by_parts(
    phi: &SemiHolonomicElement,
    xi: &LiftedVectorElement,
) -> Result<(f64, f64)> {
    let k = phi.k();
    let top = phi.projection(0, k)?.map(|c| c.slice_axis(0, 0))?;
    let lhs = pairing_higher(xi, &top)?;
    let ups = upsilon(phi)?.fiber;
    // move the outer tangent direction innermost, apply μ_{k−1}, and move it back
    let lower = phi
        .projection(k, k - 1)?
        .split_axes(&[vec![1, k - 1], vec![k - 1]])?
        .permute_axes(&[1, 2, 0])?;
    let tmu = momenta_trailing_tangent(&lower)?.permute_axes(&[1, 0])?;
    let xi_split = xi.split_axes(&[vec![1, k - 1]])?;
    Ok((lhs, dot_base(&ups, xi) + pairing_lifted(&xi_split, &tmu)?))
}

/// The pairs `(k, l)` for which the composed recurrence is compared as linear maps.
pub const GENERAL_RECURRENCE_PAIRS: [(usize, usize); 3] = [(1, 1), (1, 2), (2, 1)];

/// Largest entry difference between the matrices of `Υ_{k+l}` and `Υ_k ∘ Υ_l` on a rank-one
/// fiber, over a random base.
pub fn general_recurrence_defect(rng: &mut ChaCha8Rng, k: usize, l: usize) -> Result<f64> {
    let n = k + l;
    let base: Vec<Vec<f64>> = vec![uniform(rng, 2 * n + 1)];
    let len = (n + 1) * (n + 1);
    let mut err: f64 = 0.0;
    for col in 0..len {
        let mut e = vec![0.0; len];
        e[col] = 1.0;
        let phi = SemiHolonomicElement::from_arrays(n, base.clone(), vec![e])?;
        err = err.max(max_rel(&upsilon(&phi)?.fiber, &upsilon_composed(&phi, k, l)?));
    }
    Ok(err)
}

fn general_recurrence_group(rng: &mut ChaCha8Rng, stat: &mut Stat) -> Result<()> {
    for (k, l) in GENERAL_RECURRENCE_PAIRS {
        stat.push(general_recurrence_defect(rng, k, l)?);
        for _ in 0..10 {
            let phi = random_semi_holonomic(rng, k + l, 2, 2);
            stat.push(max_rel(&upsilon(&phi)?.fiber, &upsilon_composed(&phi, k, l)?));
        }
    }
    Ok(())
}

/// A linear bundle morphism `(x, y) ↦ (φ(x), A(x) y)` with quadratic `φ` and affine `A`.
pub struct BundleMorphism {
    dim: usize,
    rank_in: usize,
    rank_out: usize,
    phi0: Vec<f64>,
    phi1: Vec<Vec<f64>>,
    phi2: Vec<Vec<Vec<f64>>>,
    a0: Vec<Vec<f64>>,
    a1: Vec<Vec<Vec<f64>>>,
}

impl BundleMorphism {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, rank_in: usize, rank_out: usize) -> Self {
        let mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| -> Vec<Vec<f64>> {
            (0..r).map(|_| uniform(rng, c)).collect()
        };
        BundleMorphism {
            dim,
            rank_in,
            rank_out,
            phi0: uniform(rng, dim),
            phi1: mat(rng, dim, dim),
            phi2: (0..dim).map(|_| mat(rng, dim, dim)).collect(),
            a0: mat(rng, rank_out, rank_in),
            a1: (0..rank_out).map(|_| mat(rng, rank_in, dim)).collect(),
        }
    }

    fn base_map(&self, x: &[JetScalar]) -> Vec<JetScalar> {
        let shape = x[0].shape();
        (0..self.dim)
            .map(|b| {
                let mut acc = JetScalar::constant(shape, self.phi0[b]);
                for a in 0..self.dim {
                    acc = &acc + &x[a].scale(self.phi1[b][a]);
                    for c in 0..self.dim {
                        acc = &acc + &(&x[a] * &x[c]).scale(self.phi2[b][a][c]);
                    }
                }
                acc
            })
            .collect()
    }

    fn matrix(&self, x: &[JetScalar]) -> Vec<Vec<JetScalar>> {
        let shape = x[0].shape();
        (0..self.rank_out)
            .map(|i| {
                (0..self.rank_in)
                    .map(|j| {
                        let mut acc = JetScalar::constant(shape, self.a0[i][j]);
                        for (a, xa) in x.iter().enumerate() {
                            acc = &acc + &xa.scale(self.a1[i][j][a]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `T^k T^k α` on a semi-holonomic element.
    pub fn lift(&self, phi: &SemiHolonomicElement) -> Result<SemiHolonomicElement> {
        let lve = phi.to_lifted()?;
        let x = lve.base().coords();
        let a = self.matrix(x);
        let fiber = a
            .iter()
            .map(|row| {
                row.iter()
                    .zip(lve.fiber())
                    .fold(JetScalar::zeros(lve.shape()), |acc, (aij, yj)| &acc + &(aij * yj))
            })
            .collect();
        let base = HigherVelocity::new(lve.shape(), self.base_map(x))?;
        SemiHolonomicElement::from_lifted(&LiftedVectorElement::new(base, fiber)?)
    }

    /// `α` on a point of `E`.
    pub fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<JetScalar> = x.iter().map(|&v| JetScalar::scalar(v)).collect();
        let base = self.base_map(&xs).iter().map(|j| j.value()).collect();
        let a = self.matrix(&xs);
        let fiber = a
            .iter()
            .map(|row| row.iter().zip(y).map(|(aij, yj)| aij.value() * yj).sum())
            .collect();
        (base, fiber)
    }
}

/// Worst relative defect of `α(Υ_k Φ) = Υ_k((T^k T^k α) Φ)` for one random morphism.
pub fn functoriality_sample(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<f64> {
    let rank_in = rng.gen_range(1..=3);
    let rank_out = rng.gen_range(1..=3);
    let alpha = BundleMorphism::random(rng, dim, rank_in, rank_out);
    let phi = random_semi_holonomic(rng, k, dim, rank_in);
    let ups = upsilon(&phi)?;
    let (bx, by) = alpha.apply(&ups.base, &ups.fiber);
    let lifted = upsilon(&alpha.lift(&phi)?)?;
    Ok(max_rel(&bx, &lifted.base).max(max_rel(&by, &lifted.fiber)))
}

/// `⟨Ψ, κ_k V⟩` against `⟨ε_k Ψ, V⟩` for random `Ψ ∈ T*T^kM`, `V ∈ T^kTM` over one point.
pub fn duality_sample(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<f64> {
    let base = random_velocity(rng, dim, k);
    let shape = JetShape::new(&[k, 1])?;
    let coords = base
        .coords()
        .iter()
        .map(|x| {
            let mut c = x.coeffs().to_vec();
            c.extend(uniform(rng, k + 1));
            JetScalar::from_coeffs(&shape, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let v = HigherVelocity::new(&shape, coords)?;
    let psi = CotangentLift::new(base, (0..dim).map(|_| uniform(rng, k + 1)).collect())?;
    let a = cotangent_pairing(&psi, &flip_kappa(&v)?)?;
    let b = covector_velocity_pairing(&dual_eps(&psi)?, &v)?;
    Ok(rel_err(a, b))
}

/// `⟨j^kξ, j^k y⟩` against the `k`-th time derivative of `⟨ξ, y⟩`.
pub fn complete_lift_sample(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<f64> {
    let rank = dim;
    let base = random_velocity(rng, dim, k);
    let xi = random_dual_jet(rng, &base, rank);
    let y = random_dual_jet(rng, &base, rank);
    let paired = pairing_higher(&xi, &y)?;
    let chart = FnChart::new(2 * rank, move |z: &[JetScalar]| {
        Ok((0..rank).fold(JetScalar::zeros(z[0].shape()), |acc, i| &acc + &(&z[i] * &z[rank + i])))
    });
    let curve = HigherVelocity::new(
        base.shape(),
        xi.fiber().iter().chain(y.fiber()).cloned().collect(),
    )?;
    Ok(rel_err(paired, alpha_lift_eval(&chart, &curve, k)?))
}

fn gram_group(max_k: usize, stat: &mut Stat) -> Result<()> {
    let mut smallest = f64::INFINITY;
    for k in 0..=max_k {
        let unit = |i: usize| -> Result<LiftedVectorElement> {
            let mut c = vec![0.0; k + 1];
            c[i] = 1.0;
            LiftedVectorElement::from_arrays(&[k], vec![vec![0.0; k + 1]], vec![c])
        };
        let gram = (0..=k)
            .map(|p| (0..=k).map(|q| pairing_higher(&unit(p)?, &unit(q)?)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        smallest = smallest.min(determinant(&gram).abs());
    }
    stat.samples = max_k + 1;
    stat.max_error = smallest;
    Ok(())
}

fn action_variation_group(
    rng: &mut ChaCha8Rng,
    max_k: usize,
    triples: usize,
    stat: &mut Stat,
) -> Result<()> {
    for i in 0..triples {
        let k = 1 + i % max_k.max(1);
        let d = rng.gen_range(1..=2);
        let l = random_polynomial_lagrangian(rng, d, k);
        let c = random_polynomial_curve(rng, d, 3);
        let v = random_polynomial_curve(rng, d, 3);
        let av = action_variation(&l, &c, &v, 0.0, 1.0, DEFAULT_PANELS)?;
        stat.push(rel_err(av.lhs, av.rhs));
    }
    Ok(())
}
