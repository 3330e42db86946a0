//! Truncated multivariate Taylor polynomials.
//!
//! A [`JetScalar`] is an element of `R[ν_1, …, ν_r] / <ν_j^{n_j+1}>`. Coefficients are stored
//! *derivative-style*: the entry at multi-exponent `ε` is the mixed partial `∂^ε f(0)`, not
//! `∂^ε f(0) / ε!`. Products therefore carry explicit binomial (Leibniz) weights.
//!
//! Storage is dense. The linear index of a multi-exponent `ε` is `Σ_j ε_j · stride_j` with
//! `stride_0 = 1`, so the first exponent varies fastest: for shape `(1, 1)` the order is
//! `(0,0), (1,0), (0,1), (1,1)`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Upper bound on the number of coefficients of a single jet.
pub const MAX_COEFFS: usize = 4096;

/// Truncation orders `(n_1, …, n_r)` together with precomputed index tables.
#[derive(Debug)]
pub struct JetShape {
    orders: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    exps: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<usize>,
}

impl PartialEq for JetShape {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders
    }
}

impl Eq for JetShape {}

impl JetShape {
    pub fn new(orders: &[usize]) -> Result<Arc<JetShape>> {
        let mut len = 1usize;
        let mut strides = Vec::with_capacity(orders.len());
        for &n in orders {
            strides.push(len);
            len = len
                .checked_mul(n + 1)
                .filter(|&l| l <= MAX_COEFFS)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "jet shape {orders:?} exceeds {MAX_COEFFS} coefficients"
                    ))
                })?;
        }
        let rank = orders.len();
        let mut exps = vec![0usize; len * rank];
        let mut weights = vec![1.0; len];
        let mut degrees = vec![0usize; len];
        for idx in 0..len {
            let mut rem = idx;
            let mut w = 1.0;
            let mut deg = 0;
            for (d, &n) in orders.iter().enumerate() {
                let e = rem % (n + 1);
                rem /= n + 1;
                exps[idx * rank + d] = e;
                w *= factorial(e);
                deg += e;
            }
            weights[idx] = w;
            degrees[idx] = deg;
        }
        Ok(Arc::new(JetShape {
            orders: orders.to_vec(),
            strides,
            len,
            exps,
            weights,
            degrees,
        }))
    }

    /// The degenerate shape `()`: plain real numbers.
    pub fn scalar() -> Arc<JetShape> {
        JetShape::new(&[]).expect("empty shape is always valid")
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    /// Number of coefficients, `Π (n_j + 1)`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sum of all truncation orders; `h^{N+1} = 0` for any `h` without constant term.
    pub fn total_order(&self) -> usize {
        self.orders.iter().sum()
    }

    pub fn exponents(&self, idx: usize) -> &[usize] {
        let r = self.rank();
        &self.exps[idx * r..(idx + 1) * r]
    }

    /// Total degree `|ε|` of the multi-exponent at `idx`.
    pub fn degree(&self, idx: usize) -> usize {
        self.degrees[idx]
    }

    pub fn index(&self, exps: &[usize]) -> Result<usize> {
        if exps.len() != self.rank() {
            return Err(Error::shape(&self.orders, exps));
        }
        let mut idx = 0;
        for ((&e, &n), &s) in exps.iter().zip(&self.orders).zip(&self.strides) {
            if e > n {
                return Err(Error::IndexOutOfRange { index: e, bound: n });
            }
            idx += e * s;
        }
        Ok(idx)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Exact binomial coefficient as an integer; exact for `n ≤ 60`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

pub(crate) fn binom_f(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

/// The elementary functions that can be lifted to jets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementaryFn {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Pow(f64),
    Atan,
}

/// How [`JetScalar::reinterpret`] relates the source and target index sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reinterpret {
    /// `(n_1, …, n_r) → (n_1 + … + n_r)`; requires coefficients to depend on total degree only.
    Merge,
    /// `(N) → (n_1, …, n_r)` with `Σ n_j = N`; sets `x^{(ε)} := x^{(|ε|)}`.
    Split,
    /// `(n_1, n_2) → (n_2, n_1)`, swapping the two exponents.
    Transpose,
}

#[derive(Clone, PartialEq)]
pub struct JetScalar {
    shape: Arc<JetShape>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for JetScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetScalar{:?}{:?}", self.shape.orders, self.coeffs)
    }
}

impl JetScalar {
    pub fn zeros(shape: &Arc<JetShape>) -> JetScalar {
        JetScalar {
            shape: shape.clone(),
            coeffs: vec![0.0; shape.len()],
        }
    }

    pub fn constant(shape: &Arc<JetShape>, value: f64) -> JetScalar {
        let mut j = JetScalar::zeros(shape);
        j.coeffs[0] = value;
        j
    }

    pub fn scalar(value: f64) -> JetScalar {
        JetScalar::constant(&JetShape::scalar(), value)
    }

    pub fn from_coeffs(shape: &Arc<JetShape>, coeffs: Vec<f64>) -> Result<JetScalar> {
        if coeffs.len() != shape.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients supplied for shape {:?} ({} expected)",
                coeffs.len(),
                shape.orders(),
                shape.len()
            )));
        }
        Ok(JetScalar {
            shape: shape.clone(),
            coeffs,
        })
    }

    /// `constant + ν_g`: the forward-mode seed for generator `g`.
    pub fn seed(shape: &Arc<JetShape>, constant: f64, generator: usize) -> Result<JetScalar> {
        if generator >= shape.rank() {
            return Err(Error::IndexOutOfRange {
                index: generator,
                bound: shape.rank(),
            });
        }
        let mut j = JetScalar::constant(shape, constant);
        if shape.orders()[generator] >= 1 {
            j.coeffs[shape.stride(generator)] = 1.0;
        }
        Ok(j)
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn orders(&self) -> &[usize] {
        self.shape.orders()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Constant term.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exps: &[usize]) -> Result<f64> {
        Ok(self.coeffs[self.shape.index(exps)?])
    }

    /// Coefficient at the top multi-exponent `(n_1, …, n_r)`.
    pub fn top(&self) -> f64 {
        self.coeffs[self.shape.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_shape(&self, other: &JetScalar) -> Result<()> {
        if self.shape.orders != other.shape.orders {
            return Err(Error::shape(self.orders(), other.orders()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &JetScalar) -> Result<JetScalar> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &JetScalar) -> Result<JetScalar> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// Truncated product with Leibniz weights:
    /// `(a·b)[ε] = Σ_{δ ≤ ε} Π_j C(ε_j, δ_j) a[δ] b[ε − δ]`.
    pub fn try_mul(&self, other: &JetScalar) -> Result<JetScalar> {
        self.check_shape(other)?;
        Ok(JetScalar {
            shape: self.shape.clone(),
            coeffs: mul_coeffs(&self.shape, &self.coeffs, &other.coeffs),
        })
    }

    pub fn try_div(&self, other: &JetScalar) -> Result<JetScalar> {
        self.check_shape(other)?;
        self.try_mul(&other.recip()?)
    }

    pub fn scale(&self, s: f64) -> JetScalar {
        JetScalar {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> JetScalar {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn zip_with(&self, other: &JetScalar, f: impl Fn(f64, f64) -> f64) -> JetScalar {
        JetScalar {
            shape: self.shape.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `Σ_n series[n] h^n` where `h = self − self.value()`. `series` holds normalized
    /// coefficients (`f^{(n)}(x_0) / n!`).
    fn compose(&self, series: &[f64]) -> JetScalar {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = JetScalar::constant(&self.shape, *series.last().unwrap_or(&0.0));
        for &c in series.iter().rev().skip(1) {
            acc = acc.try_mul(&h).expect("same shape").add_scalar(c);
        }
        acc
    }

    /// Lift an elementary function: the Taylor composition `f ∘ self`, truncated to shape.
    pub fn lift(&self, f: ElementaryFn) -> Result<JetScalar> {
        let n = self.shape.total_order();
        let series = univariate_series(f, self.value(), n)?;
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> JetScalar {
        self.lift(ElementaryFn::Exp).expect("exp is entire")
    }

    pub fn ln(&self) -> Result<JetScalar> {
        self.lift(ElementaryFn::Log)
    }

    pub fn sin(&self) -> JetScalar {
        self.lift(ElementaryFn::Sin).expect("sin is entire")
    }

    pub fn cos(&self) -> JetScalar {
        self.lift(ElementaryFn::Cos).expect("cos is entire")
    }

    pub fn sqrt(&self) -> Result<JetScalar> {
        self.lift(ElementaryFn::Sqrt)
    }

    pub fn powf(&self, c: f64) -> Result<JetScalar> {
        self.lift(ElementaryFn::Pow(c))
    }

    pub fn atan(&self) -> JetScalar {
        self.lift(ElementaryFn::Atan).expect("atan is entire")
    }

    pub fn recip(&self) -> Result<JetScalar> {
        if self.value() == 0.0 {
            return Err(Error::Singularity(
                "division by a jet with zero constant term".into(),
            ));
        }
        self.lift(ElementaryFn::Pow(-1.0))
    }

    /// Integer power by repeated multiplication; negative exponents go through `recip`.
    pub fn powi(&self, n: i32) -> Result<JetScalar> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = JetScalar::constant(&self.shape, 1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    // ---- index-set maps -------------------------------------------------------------

    /// Projection to lower orders: keeps coefficients with `ε ≤ orders`.
    pub fn truncate(&self, orders: &[usize]) -> Result<JetScalar> {
        let from = self.orders();
        if orders.len() != from.len() {
            return Err(Error::shape(from, orders));
        }
        for (&o, &n) in orders.iter().zip(from) {
            if o > n {
                return Err(Error::OrderOverflow {
                    requested: o,
                    available: n,
                });
            }
        }
        let shape = JetShape::new(orders)?;
        let coeffs = (0..shape.len())
            .map(|idx| self.coeffs[linear(&self.shape, shape.exponents(idx))])
            .collect();
        Ok(JetScalar { shape, coeffs })
    }

    /// Append a new trailing axis of the given order; the jet is constant along it.
    pub fn extend_axis(&self, order: usize) -> Result<JetScalar> {
        let mut orders = self.orders().to_vec();
        orders.push(order);
        let shape = JetShape::new(&orders)?;
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        Ok(JetScalar { shape, coeffs })
    }

    /// Embed into a larger shape by appending axes; constant along the new axes.
    pub fn embed_trailing(&self, extra: &[usize]) -> Result<JetScalar> {
        let mut orders = self.orders().to_vec();
        orders.extend_from_slice(extra);
        let shape = JetShape::new(&orders)?;
        let mut coeffs = vec![0.0; shape.len()];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        Ok(JetScalar { shape, coeffs })
    }

    /// Fix exponent `index` on `axis`, removing that axis.
    pub fn slice_axis(&self, axis: usize, index: usize) -> Result<JetScalar> {
        let from = self.orders();
        if axis >= from.len() {
            return Err(Error::IndexOutOfRange {
                index: axis,
                bound: from.len(),
            });
        }
        if index > from[axis] {
            return Err(Error::IndexOutOfRange {
                index,
                bound: from[axis],
            });
        }
        let mut orders = from.to_vec();
        orders.remove(axis);
        let shape = JetShape::new(&orders)?;
        let mut full = vec![0usize; from.len()];
        let coeffs = (0..shape.len())
            .map(|idx| {
                let e = shape.exponents(idx);
                full[..axis].copy_from_slice(&e[..axis]);
                full[axis] = index;
                full[axis + 1..].copy_from_slice(&e[axis..]);
                self.coeffs[linear(&self.shape, &full)]
            })
            .collect();
        Ok(JetScalar { shape, coeffs })
    }

    /// Reorder axes: axis `d` of the result is axis `perm[d]` of `self`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<JetScalar> {
        let from = self.orders();
        let mut seen = vec![false; from.len()];
        if perm.len() != from.len() || perm.iter().any(|&p| p >= from.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of {} axes",
                from.len()
            )));
        }
        let orders: Vec<usize> = perm.iter().map(|&p| from[p]).collect();
        let shape = JetShape::new(&orders)?;
        let mut src = vec![0usize; from.len()];
        let coeffs = (0..shape.len())
            .map(|idx| {
                for (d, &e) in shape.exponents(idx).iter().enumerate() {
                    src[perm[d]] = e;
                }
                self.coeffs[linear(&self.shape, &src)]
            })
            .collect();
        Ok(JetScalar { shape, coeffs })
    }

    /// Holonomic inclusion on each axis: axis `j` (order `n_j`) is replaced by axes with
    /// orders `parts[j]` (which must sum to `n_j`); the new coefficient at `(…, δ_1, …, δ_m, …)`
    /// is the old one at `(…, δ_1 + … + δ_m, …)`.
    pub fn split_axes(&self, parts: &[Vec<usize>]) -> Result<JetScalar> {
        let from = self.orders();
        if parts.len() != from.len() {
            return Err(Error::shape(from, &parts.iter().map(|p| p.iter().sum()).collect::<Vec<_>>()));
        }
        for (p, &n) in parts.iter().zip(from) {
            if p.iter().sum::<usize>() != n {
                return Err(Error::InvalidArgument(format!(
                    "parts {p:?} do not sum to order {n}"
                )));
            }
        }
        let orders: Vec<usize> = parts.iter().flatten().copied().collect();
        let shape = JetShape::new(&orders)?;
        let mut src = vec![0usize; from.len()];
        let coeffs = (0..shape.len())
            .map(|idx| {
                let e = shape.exponents(idx);
                let mut off = 0;
                for (j, p) in parts.iter().enumerate() {
                    src[j] = e[off..off + p.len()].iter().sum();
                    off += p.len();
                }
                self.coeffs[linear(&self.shape, &src)]
            })
            .collect();
        Ok(JetScalar { shape, coeffs })
    }

    /// Whether coefficients depend only on the per-group total degrees, where consecutive axes
    /// are grouped by `group_sizes`. Tolerance is absolute after dividing by `1 + max|coeff|`.
    pub fn is_group_symmetric(&self, group_sizes: &[usize], tol: f64) -> bool {
        match self.merge_axes_unchecked(group_sizes) {
            Ok(merged) => {
                let back = match merged.split_axes(&group_parts(self.orders(), group_sizes)) {
                    Ok(b) => b,
                    Err(_) => return false,
                };
                let scale = 1.0 + self.max_abs();
                self.coeffs
                    .iter()
                    .zip(&back.coeffs)
                    .all(|(a, b)| (a - b).abs() / scale <= tol)
            }
            Err(_) => false,
        }
    }

    /// Inverse of [`split_axes`](Self::split_axes): consecutive groups of axes are merged into
    /// one axis of the summed order. Fails with a holonomy error unless the coefficients depend
    /// only on the per-group total degree.
    pub fn merge_axes(&self, group_sizes: &[usize], tol: f64) -> Result<JetScalar> {
        if !self.is_group_symmetric(group_sizes, tol) {
            return Err(Error::Holonomy(format!(
                "coefficients of shape {:?} are not symmetric in groups {group_sizes:?}",
                self.orders()
            )));
        }
        self.merge_axes_unchecked(group_sizes)
    }

    fn merge_axes_unchecked(&self, group_sizes: &[usize]) -> Result<JetScalar> {
        let from = self.orders();
        if group_sizes.iter().sum::<usize>() != from.len() {
            return Err(Error::InvalidArgument(format!(
                "groups {group_sizes:?} do not cover {} axes",
                from.len()
            )));
        }
        let parts = group_parts(from, group_sizes);
        let orders: Vec<usize> = parts.iter().map(|p| p.iter().sum()).collect();
        let shape = JetShape::new(&orders)?;
        let mut src = vec![0usize; from.len()];
        let coeffs = (0..shape.len())
            .map(|idx| {
                // representative: fill each group greedily from the left
                let e = shape.exponents(idx);
                let mut off = 0;
                for (g, p) in parts.iter().enumerate() {
                    let mut rem = e[g];
                    for (i, &n) in p.iter().enumerate() {
                        let take = rem.min(n);
                        src[off + i] = take;
                        rem -= take;
                    }
                    off += p.len();
                }
                self.coeffs[linear(&self.shape, &src)]
            })
            .collect();
        Ok(JetScalar { shape, coeffs })
    }

    /// Re-index coefficients between single-order and multi-order layouts.
    pub fn reinterpret(&self, to: &[usize], mode: Reinterpret) -> Result<JetScalar> {
        match mode {
            Reinterpret::Split => {
                if self.shape.rank() != 1 {
                    return Err(Error::InvalidArgument(
                        "split expects a single-order source".into(),
                    ));
                }
                self.split_axes(&[to.to_vec()])
            }
            Reinterpret::Merge => {
                let total: usize = self.orders().iter().sum();
                if to != [total] {
                    return Err(Error::InvalidArgument(format!(
                        "merge target {to:?} must be ({total})"
                    )));
                }
                self.merge_axes(&[self.shape.rank()], crate::bundles::HOLONOMY_TOL)
            }
            Reinterpret::Transpose => {
                if self.shape.rank() != 2 {
                    return Err(Error::InvalidArgument(
                        "transpose needs exactly two generators".into(),
                    ));
                }
                let o = self.orders();
                if to != [o[1], o[0]] {
                    return Err(Error::shape(&[o[1], o[0]], to));
                }
                self.permute_axes(&[1, 0])
            }
        }
    }

    /// Time derivative along a univariate axis: coefficient `i` becomes coefficient `i + 1`;
    /// the top coefficient on that axis is no longer known and is set to zero.
    pub fn shift_axis(&self, axis: usize) -> Result<JetScalar> {
        let from = self.orders();
        if axis >= from.len() {
            return Err(Error::IndexOutOfRange {
                index: axis,
                bound: from.len(),
            });
        }
        let stride = self.shape.stride(axis);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if self.shape.exponents(idx)[axis] < from[axis] {
                *c = self.coeffs[idx + stride];
            }
        }
        Ok(JetScalar {
            shape: self.shape.clone(),
            coeffs,
        })
    }
}

fn group_parts(orders: &[usize], group_sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut parts = Vec::with_capacity(group_sizes.len());
    let mut off = 0;
    for &g in group_sizes {
        parts.push(orders[off..off + g].to_vec());
        off += g;
    }
    parts
}

fn linear(shape: &JetShape, exps: &[usize]) -> usize {
    exps.iter().zip(&shape.strides).map(|(e, s)| e * s).sum()
}

fn mul_coeffs(shape: &JetShape, a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = shape.len();
    let w = &shape.weights;
    let an: Vec<f64> = a.iter().zip(w).map(|(x, w)| x / w).collect();
    let bn: Vec<f64> = b.iter().zip(w).map(|(x, w)| x / w).collect();
    let mut c = vec![0.0; len];
    let rank = shape.rank();
    if rank == 0 {
        return vec![a[0] * b[0]];
    }
    let orders = &shape.orders;
    let mut lim = vec![0usize; rank];
    let mut ctr = vec![0usize; rank];
    for (i, &ai) in an.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let ei = shape.exponents(i);
        for d in 0..rank {
            lim[d] = orders[d] - ei[d];
        }
        ctr.iter_mut().for_each(|x| *x = 0);
        let mut j = 0usize;
        loop {
            c[i + j] += ai * bn[j];
            // odometer over the box ctr ≤ lim
            let mut d = 0;
            loop {
                if d == rank {
                    break;
                }
                if ctr[d] < lim[d] {
                    ctr[d] += 1;
                    j += shape.strides[d];
                    break;
                }
                j -= ctr[d] * shape.strides[d];
                ctr[d] = 0;
                d += 1;
            }
            if d == rank {
                break;
            }
        }
    }
    c.iter_mut().zip(w).for_each(|(x, w)| *x *= w);
    c
}

/// Normalized Taylor coefficients `f^{(n)}(x0) / n!` for `n = 0..=order`.
fn univariate_series(f: ElementaryFn, x0: f64, order: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(order + 1);
    match f {
        ElementaryFn::Exp => {
            let e = x0.exp();
            for n in 0..=order {
                out.push(e / factorial(n));
            }
        }
        ElementaryFn::Log => {
            if !(x0 > 0.0) {
                return Err(Error::Singularity(format!("log of non-positive value {x0}")));
            }
            out.push(x0.ln());
            for n in 1..=order {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                out.push(sign / (n as f64 * x0.powi(n as i32)));
            }
        }
        ElementaryFn::Sin | ElementaryFn::Cos => {
            let (s, c) = x0.sin_cos();
            // derivatives cycle through sin, cos, -sin, -cos
            let cycle = if f == ElementaryFn::Sin {
                [s, c, -s, -c]
            } else {
                [c, -s, -c, s]
            };
            for n in 0..=order {
                out.push(cycle[n % 4] / factorial(n));
            }
        }
        ElementaryFn::Sqrt => return univariate_series(ElementaryFn::Pow(0.5), x0, order),
        ElementaryFn::Pow(c) => {
            let is_int = c.fract() == 0.0 && c.abs() < 1e9;
            if is_int {
                if c < 0.0 && x0 == 0.0 {
                    return Err(Error::Singularity(format!("0 raised to negative power {c}")));
                }
            } else if x0 < 0.0 || (x0 == 0.0 && (order > 0 || c < 0.0)) {
                return Err(Error::Singularity(format!(
                    "non-integer power {c} of value {x0}"
                )));
            }
            let mut coef = 1.0;
            for n in 0..=order {
                if n > 0 {
                    coef *= (c - (n as f64 - 1.0)) / n as f64;
                }
                if coef == 0.0 {
                    out.push(0.0);
                    continue;
                }
                let p = c - n as f64;
                let xp = if is_int { x0.powi(p as i32) } else { x0.powf(p) };
                out.push(coef * xp);
            }
        }
        ElementaryFn::Atan => {
            // atan' = 1/q with q(s) = (1 + x0²) + 2 x0 s + s²
            let q0 = 1.0 + x0 * x0;
            let q1 = 2.0 * x0;
            let mut r = vec![0.0; order.max(1)];
            for n in 0..r.len() {
                let prev1 = if n >= 1 { r[n - 1] } else { 0.0 };
                let prev2 = if n >= 2 { r[n - 2] } else { 0.0 };
                r[n] = if n == 0 { 1.0 / q0 } else { -(q1 * prev1 + prev2) / q0 };
            }
            out.push(x0.atan());
            for n in 1..=order {
                out.push(r[n - 1] / n as f64);
            }
        }
    }
    Ok(out)
}

// ---- operator sugar ----------------------------------------------------------------------
//
// The operators panic on shape mismatch; the `try_*` methods report it as an error.

impl Add for &JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: &JetScalar) -> JetScalar {
        self.try_add(rhs).expect("jet shapes differ")
    }
}

impl Sub for &JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: &JetScalar) -> JetScalar {
        self.try_sub(rhs).expect("jet shapes differ")
    }
}

impl Mul for &JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: &JetScalar) -> JetScalar {
        self.try_mul(rhs).expect("jet shapes differ")
    }
}

impl Add for JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: JetScalar) -> JetScalar {
        &self + &rhs
    }
}

impl Sub for JetScalar {
    type Output = JetScalar;
    fn sub(self, rhs: JetScalar) -> JetScalar {
        &self - &rhs
    }
}

impl Mul for JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: JetScalar) -> JetScalar {
        &self * &rhs
    }
}

impl Mul<f64> for &JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: f64) -> JetScalar {
        self.scale(rhs)
    }
}

impl Mul<f64> for JetScalar {
    type Output = JetScalar;
    fn mul(self, rhs: f64) -> JetScalar {
        self.scale(rhs)
    }
}

impl Add<f64> for &JetScalar {
    type Output = JetScalar;
    fn add(self, rhs: f64) -> JetScalar {
        self.add_scalar(rhs)
    }
}

impl Neg for &JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        self.scale(-1.0)
    }
}

impl Neg for JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        self.scale(-1.0)
    }
}

impl AddAssign<&JetScalar> for JetScalar {
    fn add_assign(&mut self, rhs: &JetScalar) {
        assert_eq!(self.orders(), rhs.orders(), "jet shapes differ");
        self.coeffs
            .iter_mut()
            .zip(&rhs.coeffs)
            .for_each(|(a, b)| *a += b);
    }
}
