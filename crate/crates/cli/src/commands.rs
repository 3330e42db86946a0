//! Subcommand bodies. Each returns data; [`dispatch`] does the printing.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use jetvar_core::checks::{Group, GroupReport};
use jetvar_core::geometry::{cubic_residual_from_jet, CubicLagrangian, MetricField};
use jetvar_core::solver::{integrate_el, shoot_bvp, SolverConfig, Trajectory};
use jetvar_core::variational::{
    action_variation, force_at, momentum_at, ActionVariation, Lagrangian, DEFAULT_PANELS,
};
use jetvar_core::{curve_jet, HigherVelocity};
use rayon::prelude::*;

use crate::config::ProblemConfig;
use crate::csv::{jet_columns, Table};
use crate::{CliError, Command};

/// Largest acceptable `‖EL residual‖∞` on a computed trajectory.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Relative tolerance on `|lhs − rhs|` for `vary`.
pub const VARY_TOL: f64 = 1e-6;

pub const PANELS_ENV: &str = "JETVAR_PANELS";

pub fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: "<stdout>".into(),
        source,
    };
    match cmd {
        Command::Verify { seed, max_k } => {
            let reports = verify(*seed, *max_k);
            write!(out, "{}", verify_table(&reports)).map_err(io)?;
            let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.group.name()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Tolerance(format!("failing groups: {}", failed.join(", "))))
            }
        }
        Command::Vary { config } => {
            let cfg = ProblemConfig::load(config)?;
            let av = vary(&cfg, panels_from_env()?)?;
            let scale = 1f64.max(av.lhs.abs()).max(av.rhs.abs());
            writeln!(out, "lhs            = {:.16e}", av.lhs).map_err(io)?;
            writeln!(out, "rhs            = {:.16e}", av.rhs).map_err(io)?;
            writeln!(out, "force_integral = {:.16e}", av.force_integral).map_err(io)?;
            writeln!(out, "boundary       = {:.16e}", av.boundary).map_err(io)?;
            writeln!(out, "difference     = {:.16e}", av.difference()).map_err(io)?;
            if !av.converged {
                writeln!(out, "warning: quadrature not converged at this panel count").map_err(io)?;
            }
            if av.difference() > VARY_TOL * scale {
                return Err(CliError::Tolerance(format!(
                    "|lhs - rhs| = {:e} exceeds {VARY_TOL:e} relative",
                    av.difference()
                )));
            }
            Ok(())
        }
        Command::Force { config }
        | Command::Momentum { config }
        | Command::Integrate { config }
        | Command::Bvp { config }
        | Command::Cubic { config } => {
            let cfg = ProblemConfig::load(config)?;
            let table = match cmd {
                Command::Force { .. } => force(&cfg)?,
                Command::Momentum { .. } => momentum(&cfg)?,
                Command::Integrate { .. } => integrate(&cfg)?,
                Command::Bvp { .. } => bvp(&cfg)?,
                _ => cubic(&cfg)?,
            };
            table.write(cfg.output.csv.as_deref().map(Path::new), out)?;
            check_residual(&table)
        }
    }
}

fn check_residual(table: &Table) -> Result<(), CliError> {
    let Some(col) = table.column("el_residual") else {
        return Ok(());
    };
    let worst = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > RESIDUAL_TOL {
        return Err(CliError::Tolerance(format!(
            "EL residual {worst:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    Ok(())
}

/// Every identity group, run in parallel; results come back in [`Group::ALL`] order.
pub fn verify(seed: u64, max_k: usize) -> Vec<GroupReport> {
    Group::ALL.par_iter().map(|g| g.run(seed, max_k)).collect()
}

pub fn verify_table(reports: &[GroupReport]) -> String {
    let mut s = format!(
        "{:<24} {:>8} {:>12} {:>10}  result\n",
        "group", "samples", "max_error", "tolerance"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<24} {:>8} {:>12.3e} {:>10.0e}  {}\n",
            r.group.name(),
            r.samples,
            r.max_error,
            r.group.tolerance(),
            if r.passed() { "PASS" } else { "FAIL" }
        ));
        if let Some(f) = &r.failure {
            s.push_str(&format!("    {f}\n"));
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    s.push_str(&format!("{passed}/{} groups passed\n", reports.len()));
    s
}

/// Quadrature panel count, overridable through the environment.
pub fn panels_from_env() -> Result<usize, CliError> {
    match std::env::var(PANELS_ENV) {
        Err(_) => Ok(DEFAULT_PANELS),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!(
                "{PANELS_ENV} must be a positive integer, found {v:?}"
            ))),
        },
    }
}

fn grid(cfg: &ProblemConfig) -> Result<Vec<f64>, CliError> {
    let iv = cfg.interval()?;
    let n = cfg.samples()?;
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                iv.t1
            } else {
                iv.t0 + (iv.t1 - iv.t0) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn jet_values(jet: &HigherVelocity, orders: usize) -> impl Iterator<Item = f64> + '_ {
    jet.coords()
        .iter()
        .flat_map(move |c| c.coeffs()[..orders].iter().copied())
}

pub fn force(cfg: &ProblemConfig) -> Result<Table, CliError> {
    let l = cfg.lagrangian()?;
    let curve = cfg.curve()?;
    let (dim, k) = (cfg.problem.dim, cfg.problem.k);
    let mut header = vec!["t".to_string()];
    header.extend(jet_columns("x", dim, 2 * k));
    header.extend((0..dim).map(|a| format!("f{a}")));
    let mut table = Table::new(header);
    for t in grid(cfg)? {
        let jet = curve_jet(curve.as_ref(), t, 2 * k)?;
        let f = force_at(l.as_ref(), &jet)?;
        let mut row = vec![t];
        row.extend(jet_values(&jet, 2 * k));
        row.extend(f.f);
        table.push(row);
    }
    Ok(table)
}

pub fn momentum(cfg: &ProblemConfig) -> Result<Table, CliError> {
    let l = cfg.lagrangian()?;
    let curve = cfg.curve()?;
    let (dim, k) = (cfg.problem.dim, cfg.problem.k);
    let mut header = vec!["t".to_string()];
    header.extend(jet_columns("x", dim, k));
    header.extend(jet_columns("p", dim, k));
    let mut table = Table::new(header);
    for t in grid(cfg)? {
        let jet = curve_jet(curve.as_ref(), t, 2 * k - 1)?;
        let m = momentum_at(l.as_ref(), &jet)?;
        let mut row = vec![t];
        row.extend(jet_values(&jet, k));
        row.extend(m.p.iter().flat_map(|r| r.iter().copied()));
        table.push(row);
    }
    Ok(table)
}

pub fn vary(cfg: &ProblemConfig, panels: usize) -> Result<ActionVariation, CliError> {
    let l = cfg.lagrangian()?;
    let curve = cfg.curve()?;
    let var = cfg.variation()?;
    let iv = cfg.interval()?;
    Ok(action_variation(l.as_ref(), curve.as_ref(), var.as_ref(), iv.t0, iv.t1, panels)?)
}

/// Rows at (about) `samples` evenly spread trajectory states, each with its EL residual.
fn trajectory_table(
    traj: &Trajectory,
    l: &dyn Lagrangian,
    cfg: &ProblemConfig,
    solver: &SolverConfig,
    residual: &dyn Fn(&HigherVelocity) -> jetvar_core::Result<Vec<f64>>,
) -> Result<Table, CliError> {
    let (dim, k) = (traj.dim, traj.k);
    let mut header = vec!["t".to_string()];
    header.extend(jet_columns("x", dim, 2 * k));
    header.push("el_residual".into());
    let mut table = Table::new(header);
    let n = traj.states.len();
    let rows = cfg.output.samples.map_or(n, |s| s.clamp(2, n));
    let mut last = usize::MAX;
    for r in 0..rows {
        let i = if rows == 1 {
            0
        } else {
            ((r as f64) * (n - 1) as f64 / (rows - 1) as f64).round() as usize
        };
        if i == last {
            continue;
        }
        last = i;
        let jet = traj.full_jet(l, i, solver)?;
        let res = residual(&jet)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut row = vec![traj.states[i].t];
        row.extend(jet_values(&jet, 2 * k));
        row.push(res);
        table.push(row);
    }
    Ok(table)
}

fn force_residual(l: &dyn Lagrangian) -> impl Fn(&HigherVelocity) -> jetvar_core::Result<Vec<f64>> + '_ {
    move |jet| Ok(force_at(l, jet)?.f)
}

pub fn integrate(cfg: &ProblemConfig) -> Result<Table, CliError> {
    let l = cfg.lagrangian()?;
    let curve = cfg.curve()?;
    let iv = cfg.interval()?;
    let solver = cfg.solver()?;
    let k = cfg.problem.k;
    let jet = curve_jet(curve.as_ref(), iv.t0, 2 * k - 1)?;
    let z0: Vec<f64> = jet_values(&jet, 2 * k).collect();
    let traj = integrate_el(l.as_ref(), &z0, iv.t0, iv.t1, &solver)?;
    let residual = force_residual(l.as_ref());
    trajectory_table(&traj, l.as_ref(), cfg, &solver, &residual)
}

pub fn bvp(cfg: &ProblemConfig) -> Result<Table, CliError> {
    let l = cfg.lagrangian()?;
    let iv = cfg.interval()?;
    let solver = cfg.solver()?;
    let (initial, terminal) = cfg.boundary()?;
    let r = shoot_bvp(l.as_ref(), iv.t0, iv.t1, &initial, &terminal, &solver)?;
    let residual = force_residual(l.as_ref());
    trajectory_table(&r.trajectory, l.as_ref(), cfg, &solver, &residual)
}

pub fn cubic(cfg: &ProblemConfig) -> Result<Table, CliError> {
    if cfg.problem.k != 2 {
        return Err(CliError::Config(format!(
            "cubic: problem.k must be 2, found {}",
            cfg.problem.k
        )));
    }
    let g: Arc<dyn MetricField> = cfg.metric()?;
    let l = CubicLagrangian::new(g.clone());
    let iv = cfg.interval()?;
    let solver = cfg.solver()?;
    let (initial, terminal) = cfg.boundary()?;
    let r = shoot_bvp(&l, iv.t0, iv.t1, &initial, &terminal, &solver)?;
    let residual = |jet: &HigherVelocity| cubic_residual_from_jet(g.as_ref(), jet);
    trajectory_table(&r.trajectory, &l, cfg, &solver, &residual)
}
