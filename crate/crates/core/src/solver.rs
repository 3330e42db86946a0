//! Euler-Lagrange trajectories: explicit top derivative, fixed-step RK4, shooting for two-point
//! problems, and the clamped cubic spline used as a closed-form reference.
//!
//! State layout: for a Lagrangian of order `k` on `dim` coordinates, the state `z` has length
//! `2k · dim` and `z[a · 2k + s] = x^{a,(s)}`, `s < 2k`.

use crate::bundles::{CurveEvaluator, HigherVelocity};
use crate::canonical::dual_eps_inverse;
use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::variational::{force_at, momentum_at, Lagrangian};
use crate::weil::{JetScalar, JetShape};

/// Abort integration once `‖z‖∞` exceeds this.
pub const BLOW_UP_NORM: f64 = 1e8;

/// Hessians with `|det| ≤` this are treated as degenerate.
pub const DEGENERACY_DET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub shoot_tol: f64,
    pub shoot_max_iter: usize,
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: 1e-3,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            shoot_tol: 1e-8,
            shoot_max_iter: 40,
            fd_step: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.step, self.newton_tol, self.shoot_tol, self.fd_step];
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || self.newton_max_iter == 0
            || self.shoot_max_iter == 0
        {
            return Err(Error::InvalidArgument("solver settings must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub z: Vec<f64>,
}

fn check_state(l: &dyn Lagrangian, z: &[f64]) -> Result<()> {
    let want = 2 * l.order() * l.dim();
    if z.len() != want || l.order() == 0 {
        return Err(Error::InvalidArgument(format!(
            "state must have 2k·dim = {want} entries, got {}",
            z.len()
        )));
    }
    Ok(())
}

/// `j^{2k}` of the curve through `z` with top derivatives `top`.
fn jet_from_state(dim: usize, k: usize, z: &[f64], top: &[f64]) -> Result<HigherVelocity> {
    let arrays = (0..dim)
        .map(|a| {
            let mut c = z[a * 2 * k..(a + 1) * 2 * k].to_vec();
            c.push(top[a]);
            c
        })
        .collect();
    HigherVelocity::from_arrays(&[2 * k], arrays)
}

/// `H_{ab} = ∂²L / ∂x^{a,(k)} ∂x^{b,(k)}` at the `k`-velocity contained in `z`, by seeding two
/// first-order generators.
fn top_hessian(l: &dyn Lagrangian, z: &[f64]) -> Result<Vec<Vec<f64>>> {
    let dim = l.dim();
    let k = l.order();
    let shape = JetShape::new(&[1, 1])?;
    let mut h = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let x: Vec<Vec<JetScalar>> = (0..dim)
                .map(|c| {
                    (0..=k)
                        .map(|alpha| {
                            let mut j = JetScalar::constant(&shape, z[c * 2 * k + alpha]);
                            if alpha == k {
                                if c == a {
                                    j.coeffs_mut()[1] += 1.0;
                                }
                                if c == b {
                                    j.coeffs_mut()[2] += 1.0;
                                }
                            }
                            j
                        })
                        .collect()
                })
                .collect();
            let v = l.eval(&x)?.top();
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    Ok(h)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve `F_{L,γ}(t) = 0` for `x^{(2k)}` given the lower derivatives in `z`.
///
/// The force is affine in `x^{(2k)}` with matrix `(−1)^k H`; the linear solution is then
/// polished by Newton steps until the residual is below the tolerance.
pub fn explicit_top_derivative(
    l: &dyn Lagrangian,
    z: &[f64],
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    check_state(l, z)?;
    let dim = l.dim();
    let k = l.order();
    let h = top_hessian(l, z)?;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let m: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| sign * v).collect()).collect();
    let det = crate::linalg::determinant(&h);
    if det.abs() <= DEGENERACY_DET {
        return Err(Error::DegenerateLagrangian { det: det.abs() });
    }
    let mut u = vec![0.0; dim];
    let f0 = force_at(l, &jet_from_state(dim, k, z, &u)?)?.f;
    let scale = 1.0 + inf_norm(&f0);
    let rhs: Vec<f64> = f0.iter().map(|v| -v).collect();
    u = solve(&m, &rhs)?.0;
    let mut best = f64::INFINITY;
    for _ in 0..config.newton_max_iter {
        let r = force_at(l, &jet_from_state(dim, k, z, &u)?)?.f;
        let norm = inf_norm(&r);
        best = best.min(norm);
        if norm <= config.newton_tol * scale {
            return Ok(u);
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let du = solve(&m, &neg)?.0;
        u.iter_mut().zip(du).for_each(|(x, d)| *x += d);
    }
    Err(Error::NonConvergence {
        what: "top-derivative Newton iteration",
        iterations: config.newton_max_iter,
        residual: best,
    })
}

/// `ż` for the first-order reduction of the Euler-Lagrange equation.
pub fn state_derivative(l: &dyn Lagrangian, z: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    let k = l.order();
    let top = explicit_top_derivative(l, z, config)?;
    let mut dz = vec![0.0; z.len()];
    for (a, u) in top.iter().enumerate() {
        let base = a * 2 * k;
        dz[base..base + 2 * k - 1].copy_from_slice(&z[base + 1..base + 2 * k]);
        dz[base + 2 * k - 1] = *u;
    }
    Ok(dz)
}

/// A sampled solution together with the data needed to rebuild `j^{2k}` at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub k: usize,
    pub states: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryState {
        self.states.last().expect("trajectories are never empty")
    }

    /// `j^{2k}` at sample `i`, with the top derivative recomputed from the equation.
    pub fn full_jet(
        &self,
        l: &dyn Lagrangian,
        i: usize,
        config: &SolverConfig,
    ) -> Result<HigherVelocity> {
        let z = &self.states[i].z;
        let top = explicit_top_derivative(l, z, config)?;
        jet_from_state(self.dim, self.k, z, &top)
    }

    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.states.iter().enumerate() {
            if (s.t - t).abs() < (self.states[best].t - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Position at `t` by the degree-`2k` Taylor polynomial around the nearest sample.
    pub fn position_at(&self, l: &dyn Lagrangian, t: f64, config: &SolverConfig) -> Result<Vec<f64>> {
        let i = self.nearest(t);
        let jet = self.full_jet(l, i, config)?;
        let dt = t - self.states[i].t;
        Ok(jet
            .coords()
            .iter()
            .map(|c| {
                let mut acc = 0.0;
                let mut fact = 1.0;
                let mut pow = 1.0;
                for (n, &v) in c.coeffs().iter().enumerate() {
                    if n > 0 {
                        fact *= n as f64;
                        pow *= dt;
                    }
                    acc += v * pow / fact;
                }
                acc
            })
            .collect())
    }

    /// A curve evaluator backed by the trajectory: jets at `t` are Taylor polynomials of degree
    /// `2k` around the nearest sample, exact at sample times up to order `2k`.
    pub fn as_curve<'a>(
        &'a self,
        l: &'a dyn Lagrangian,
        config: &'a SolverConfig,
    ) -> TrajectoryCurve<'a> {
        TrajectoryCurve {
            traj: self,
            l,
            config,
        }
    }
}

pub struct TrajectoryCurve<'a> {
    traj: &'a Trajectory,
    l: &'a dyn Lagrangian,
    config: &'a SolverConfig,
}

impl CurveEvaluator for TrajectoryCurve<'_> {
    fn dim(&self) -> usize {
        self.traj.dim
    }

    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>> {
        let i = self.traj.nearest(t.value());
        let jet = self.traj.full_jet(self.l, i, self.config)?;
        let h = t.add_scalar(-self.traj.states[i].t);
        Ok(jet
            .coords()
            .iter()
            .map(|c| {
                // Horner in h with normalized coefficients x^{(n)}/n!
                let co = c.coeffs();
                let mut fact = vec![1.0; co.len()];
                for n in 1..co.len() {
                    fact[n] = fact[n - 1] * n as f64;
                }
                let mut acc = JetScalar::zeros(h.shape());
                for n in (0..co.len()).rev() {
                    acc = (&acc * &h).add_scalar(co[n] / fact[n]);
                }
                acc
            })
            .collect())
    }
}

fn rk4_step(
    l: &dyn Lagrangian,
    z: &[f64],
    h: f64,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    };
    let k1 = state_derivative(l, z, config)?;
    let k2 = state_derivative(l, &axpy(z, h / 2.0, &k1), config)?;
    let k3 = state_derivative(l, &axpy(z, h / 2.0, &k2), config)?;
    let k4 = state_derivative(l, &axpy(z, h, &k3), config)?;
    Ok((0..z.len())
        .map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classical RK4 with fixed step from `t0` to `t1`; the last step is shortened to land on `t1`.
pub fn integrate_el(
    l: &dyn Lagrangian,
    z0: &[f64],
    t0: f64,
    t1: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    check_state(l, z0)?;
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("interval [{t0}, {t1}] is empty")));
    }
    let span = t1 - t0;
    let h = config.step;
    let full = (span / h + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=full).map(|i| t0 + i as f64 * h).collect();
    if span - full as f64 * h > 1e-12 * span.max(1.0) {
        times.push(t1);
    } else if full > 0 {
        times[full] = t1;
    }
    let mut states = Vec::with_capacity(times.len());
    let mut z = z0.to_vec();
    states.push(TrajectoryState { t: t0, z: z.clone() });
    for w in times.windows(2) {
        z = rk4_step(l, &z, w[1] - w[0], config)?;
        let norm = inf_norm(&z);
        if !(norm <= BLOW_UP_NORM) {
            return Err(Error::BlowUp { t: w[1], norm });
        }
        states.push(TrajectoryState { t: w[1], z: z.clone() });
    }
    Ok(Trajectory {
        dim: l.dim(),
        k: l.order(),
        states,
    })
}

/// What the shooting method drives to zero at `t1`.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalCondition {
    /// Prescribed `(k−1)`-velocity `[a][α]`, `α < k`.
    Fixed(Vec<Vec<f64>>),
    /// Free final `(k−1)`-velocity: the natural condition `ε_{k−1}^{-1} M(t1) = 0`.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub trajectory: Trajectory,
    /// Initial unknowns `x^{a,(s)}(t0)`, `k ≤ s < 2k`, laid out `a · k + (s − k)`.
    pub unknowns: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton shooting on the missing initial data `x^{(k)}, …, x^{(2k−1)}` at `t0`.
pub fn shoot_bvp(
    l: &dyn Lagrangian,
    t0: f64,
    t1: f64,
    initial: &[Vec<f64>],
    terminal: &TerminalCondition,
    config: &SolverConfig,
) -> Result<ShootingResult> {
    config.validate()?;
    let dim = l.dim();
    let k = l.order();
    let check_vel = |v: &[Vec<f64>]| -> Result<()> {
        if v.len() != dim || v.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(format!(
                "boundary (k−1)-velocity must be {dim} rows of {k} values"
            )));
        }
        Ok(())
    };
    check_vel(initial)?;
    if let TerminalCondition::Fixed(f) = terminal {
        check_vel(f)?;
    }
    let n = dim * k;
    let build_z0 = |u: &[f64]| -> Vec<f64> {
        let mut z = vec![0.0; 2 * k * dim];
        for a in 0..dim {
            for s in 0..k {
                z[a * 2 * k + s] = initial[a][s];
                z[a * 2 * k + k + s] = u[a * k + s];
            }
        }
        z
    };
    let run = |u: &[f64]| -> Result<(Trajectory, Vec<f64>)> {
        let traj = integrate_el(l, &build_z0(u), t0, t1, config)?;
        let z = &traj.last().z;
        let r = match terminal {
            TerminalCondition::Fixed(f) => (0..dim)
                .flat_map(|a| (0..k).map(move |s| (a, s)))
                .map(|(a, s)| z[a * 2 * k + s] - f[a][s])
                .collect(),
            TerminalCondition::Free => {
                let arrays: Vec<Vec<f64>> =
                    (0..dim).map(|a| z[a * 2 * k..(a + 1) * 2 * k].to_vec()).collect();
                let jet = HigherVelocity::from_arrays(&[2 * k - 1], arrays)?;
                let p = dual_eps_inverse(&momentum_at(l, &jet)?)?;
                p.p.into_iter().flatten().collect()
            }
        };
        Ok((traj, r))
    };
    let mut u = vec![0.0; n];
    let (mut traj, mut r) = run(&u)?;
    let mut norm = inf_norm(&r);
    for iter in 0..=config.shoot_max_iter {
        if norm <= config.shoot_tol {
            return Ok(ShootingResult {
                trajectory: traj,
                unknowns: u,
                residual: norm,
                iterations: iter,
            });
        }
        if iter == config.shoot_max_iter {
            break;
        }
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut up = u.clone();
            let step = config.fd_step * 1f64.max(u[j].abs());
            up[j] += step;
            let (_, rp) = run(&up)?;
            for i in 0..n {
                jac[i][j] = (rp[i] - r[i]) / step;
            }
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let du = solve(&jac, &neg)
            .map_err(|_| Error::NonConvergence {
                what: "shooting (singular Jacobian)",
                iterations: iter,
                residual: norm,
            })?
            .0;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(x, d)| x + lambda * d).collect();
            if let Ok((tt, rt)) = run(&trial) {
                let nt = inf_norm(&rt);
                if nt < norm {
                    u = trial;
                    traj = tt;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "shooting",
        iterations: config.shoot_max_iter,
        residual: norm,
    })
}

/// Clamped ("complete") cubic spline: `C²`, interpolating, with prescribed end slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    /// Per interval, coefficients of `a + b s + c s² + d s³` with `s = x − x_i`.
    pieces: Vec<[f64; 4]>,
}

pub fn cubic_spline_oracle(points: &[(f64, f64)], va: f64, vb: f64) -> Result<CubicSpline> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument("a spline needs at least two knots".into()));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    // tridiagonal system for the moments M_i = S''(x_i)
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = 2.0 * h[0];
    sup[0] = h[0];
    rhs[0] = 6.0 * (slope[0] - va);
    for i in 1..n - 1 {
        sub[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        sup[i] = h[i];
        rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
    }
    sub[n - 1] = h[n - 2];
    diag[n - 1] = 2.0 * h[n - 2];
    rhs[n - 1] = 6.0 * (vb - slope[n - 2]);
    let m = thomas(&sub, &diag, &sup, &rhs);
    let pieces = (0..n - 1)
        .map(|i| {
            [
                y[i],
                slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                m[i] / 2.0,
                (m[i + 1] - m[i]) / (6.0 * h[i]),
            ]
        })
        .collect();
    Ok(CubicSpline { knots: x, pieces })
}

/// Thomas algorithm for a diagonally dominant tridiagonal system.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl CubicSpline {
    fn piece(&self, t: f64) -> usize {
        let n = self.pieces.len();
        match self.knots.iter().rposition(|&k| k <= t) {
            None => 0,
            Some(i) => i.min(n - 1),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `S^{(m)}(t)`; outside the knots the end pieces are extended.
    pub fn derivative(&self, t: f64, m: usize) -> f64 {
        let i = self.piece(t);
        let s = t - self.knots[i];
        let p = &self.pieces[i];
        match m {
            0 => p[0] + s * (p[1] + s * (p[2] + s * p[3])),
            1 => p[1] + s * (2.0 * p[2] + 3.0 * s * p[3]),
            2 => 2.0 * p[2] + 6.0 * s * p[3],
            3 => 6.0 * p[3],
            _ => 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }
}

impl CurveEvaluator for CubicSpline {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, t: &JetScalar) -> Result<Vec<JetScalar>> {
        let i = self.piece(t.value());
        let s = t.add_scalar(-self.knots[i]);
        let p = &self.pieces[i];
        let mut acc = JetScalar::constant(t.shape(), p[3]);
        for c in p[..3].iter().rev() {
            acc = (&acc * &s).add_scalar(*c);
        }
        Ok(vec![acc])
    }
}
