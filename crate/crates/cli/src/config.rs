//! JSON problem description shared by every subcommand except `verify`.

use std::path::Path;
use std::sync::Arc;

use jetvar_core::expr::{ExprCurve, ExprLagrangian, ExprMetric};
use jetvar_core::geometry::{Euclidean, Hyperbolic2, MetricField, Sphere2};
use jetvar_core::solver::{SolverConfig, TerminalCondition};
use jetvar_core::variational::Lagrangian;
use jetvar_core::CurveEvaluator;
use serde::Deserialize;

use crate::CliError;

/// Grid size used when `output.samples` is absent.
pub const DEFAULT_SAMPLES: usize = 101;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub problem: Problem,
    pub lagrangian: Option<Section<String>>,
    pub metric: Option<Section<Vec<Vec<String>>>>,
    pub curve: Option<Section<Vec<String>>>,
    pub variation: Option<Section<Vec<String>>>,
    pub interval: Option<Interval>,
    pub boundary: Option<Boundary>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub dim: usize,
    pub k: usize,
}

/// Either a named preset or an explicit expression payload, never both.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section<E> {
    pub preset: Option<String>,
    pub expression: Option<E>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub initial: Vec<Vec<f64>>,
    #[serde(rename = "final")]
    pub final_: FinalBoundary,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FinalBoundary {
    Fixed(Vec<Vec<f64>>),
    Keyword(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub step: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub shoot_tol: Option<f64>,
    pub shoot_max_iter: Option<usize>,
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub csv: Option<String>,
    pub samples: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn pick<'a, E>(name: &str, s: &'a Section<E>) -> Result<Choice<'a, E>, CliError> {
    match (&s.preset, &s.expression) {
        (Some(p), None) => Ok(Choice::Preset(p)),
        (None, Some(e)) => Ok(Choice::Expression(e)),
        _ => Err(config_err(format!(
            "{name}: exactly one of \"preset\" and \"expression\" is required"
        ))),
    }
}

enum Choice<'a, E> {
    Preset(&'a str),
    Expression(&'a E),
}

fn core_err(section: &str, e: jetvar_core::Error) -> CliError {
    config_err(format!("{section}.expression: {e}"))
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ProblemConfig = serde_json::from_str(text).map_err(|e| {
            config_err(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if cfg.problem.dim == 0 {
            return Err(config_err("problem.dim must be at least 1"));
        }
        if cfg.problem.k == 0 {
            return Err(config_err("problem.k must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn interval(&self) -> Result<Interval, CliError> {
        let iv = self.interval.ok_or_else(|| config_err("missing section \"interval\""))?;
        if !(iv.t0.is_finite() && iv.t1.is_finite() && iv.t1 > iv.t0) {
            return Err(config_err("interval: need finite t0 < t1"));
        }
        Ok(iv)
    }

    pub fn samples(&self) -> Result<usize, CliError> {
        match self.output.samples {
            Some(n) if n < 2 => Err(config_err("output.samples must be at least 2")),
            Some(n) => Ok(n),
            None => Ok(DEFAULT_SAMPLES),
        }
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let o = &self.solver;
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            step: o.step.unwrap_or(d.step),
            newton_tol: o.newton_tol.unwrap_or(d.newton_tol),
            newton_max_iter: o.newton_max_iter.unwrap_or(d.newton_max_iter),
            shoot_tol: o.shoot_tol.unwrap_or(d.shoot_tol),
            shoot_max_iter: o.shoot_max_iter.unwrap_or(d.shoot_max_iter),
            fd_step: o.fd_step.unwrap_or(d.fd_step),
        };
        cfg.validate().map_err(|e| config_err(format!("solver: {e}")))?;
        Ok(cfg)
    }

    pub fn lagrangian(&self) -> Result<Arc<dyn Lagrangian>, CliError> {
        let Problem { dim, k } = self.problem;
        let sec = self
            .lagrangian
            .as_ref()
            .ok_or_else(|| config_err("missing section \"lagrangian\""))?;
        let src = match pick("lagrangian", sec)? {
            Choice::Expression(e) => e.clone(),
            Choice::Preset(name) => {
                let (order, term): (usize, fn(usize) -> String) = match name {
                    "free_particle" => (1, |a| format!("0.5 * x{a}'^2")),
                    "harmonic" => (1, |a| format!("0.5 * (x{a}'^2 - x{a}^2)")),
                    "accel_squared" => (2, |a| format!("x{a}''^2")),
                    other => {
                        return Err(config_err(format!(
                            "lagrangian.preset: unknown preset {other:?} \
                             (expected free_particle, harmonic or accel_squared)"
                        )))
                    }
                };
                if k != order {
                    return Err(config_err(format!(
                        "lagrangian.preset: {name} has order {order} but problem.k = {k}"
                    )));
                }
                (0..dim).map(term).collect::<Vec<_>>().join(" + ")
            }
        };
        let l = ExprLagrangian::parse(&src, dim, k).map_err(|e| core_err("lagrangian", e))?;
        Ok(Arc::new(l))
    }

    pub fn metric(&self) -> Result<Arc<dyn MetricField>, CliError> {
        let dim = self.problem.dim;
        let sec = self
            .metric
            .as_ref()
            .ok_or_else(|| config_err("missing section \"metric\""))?;
        let g: Arc<dyn MetricField> = match pick("metric", sec)? {
            Choice::Preset("euclidean") => Arc::new(Euclidean(dim)),
            Choice::Preset("sphere2") => Arc::new(Sphere2),
            Choice::Preset("hyperbolic2") => Arc::new(Hyperbolic2),
            Choice::Preset(other) => {
                return Err(config_err(format!(
                    "metric.preset: unknown preset {other:?} \
                     (expected euclidean, sphere2 or hyperbolic2)"
                )))
            }
            Choice::Expression(rows) => {
                Arc::new(ExprMetric::parse(rows).map_err(|e| core_err("metric", e))?)
            }
        };
        if g.dim() != dim {
            return Err(config_err(format!(
                "metric: dimension {} does not match problem.dim = {dim}",
                g.dim()
            )));
        }
        Ok(g)
    }

    pub fn curve(&self) -> Result<Arc<dyn CurveEvaluator>, CliError> {
        self.curve_section("curve", self.curve.as_ref())
    }

    pub fn variation(&self) -> Result<Arc<dyn CurveEvaluator>, CliError> {
        self.curve_section("variation", self.variation.as_ref())
    }

    fn curve_section(
        &self,
        name: &str,
        sec: Option<&Section<Vec<String>>>,
    ) -> Result<Arc<dyn CurveEvaluator>, CliError> {
        let dim = self.problem.dim;
        let sec = sec.ok_or_else(|| config_err(format!("missing section {name:?}")))?;
        let srcs: Vec<String> = match pick(name, sec)? {
            Choice::Expression(e) => e.clone(),
            Choice::Preset(p) => {
                let one = match p {
                    "line" => "t",
                    "sine" => "sin(t)",
                    "cubic_poly" => "1 + 0.5 * t - 0.3 * t^2 + 0.2 * t^3",
                    other => {
                        return Err(config_err(format!(
                            "{name}.preset: unknown preset {other:?} \
                             (expected line, sine or cubic_poly)"
                        )))
                    }
                };
                vec![one.to_string(); dim]
            }
        };
        if srcs.len() != dim {
            return Err(config_err(format!(
                "{name}: {} components given but problem.dim = {dim}",
                srcs.len()
            )));
        }
        Ok(Arc::new(ExprCurve::parse(&srcs).map_err(|e| core_err(name, e))?))
    }

    /// Initial `(k−1)`-velocity and terminal condition, checked against `[dim][k]`.
    pub fn boundary(&self) -> Result<(Vec<Vec<f64>>, TerminalCondition), CliError> {
        let Problem { dim, k } = self.problem;
        let b = self
            .boundary
            .as_ref()
            .ok_or_else(|| config_err("missing section \"boundary\""))?;
        let check = |what: &str, v: &[Vec<f64>]| {
            if v.len() != dim || v.iter().any(|r| r.len() != k) {
                Err(config_err(format!(
                    "boundary.{what}: expected a {dim} x {k} array of (k-1)-velocity components"
                )))
            } else {
                Ok(())
            }
        };
        check("initial", &b.initial)?;
        let term = match &b.final_ {
            FinalBoundary::Fixed(v) => {
                check("final", v)?;
                TerminalCondition::Fixed(v.clone())
            }
            FinalBoundary::Keyword(s) if s == "free" => TerminalCondition::Free,
            FinalBoundary::Keyword(s) => {
                return Err(config_err(format!(
                    "boundary.final: expected an array or \"free\", found {s:?}"
                )))
            }
        };
        Ok((b.initial.clone(), term))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"problem": {"dim": 1, "k": 1}"#;

    fn cfg(extra: &str) -> Result<ProblemConfig, CliError> {
        ProblemConfig::from_json(&format!("{BASE}{extra}}}"))
    }

    #[test]
    fn preset_and_expression_are_exclusive() {
        let c = cfg(r#", "lagrangian": {"preset": "harmonic", "expression": "x0"}"#).unwrap();
        assert!(c.lagrangian().is_err());
        let c = cfg(r#", "lagrangian": {}"#).unwrap();
        assert!(c.lagrangian().is_err());
    }

    #[test]
    fn preset_order_must_match() {
        let c = cfg(r#", "lagrangian": {"preset": "accel_squared"}"#).unwrap();
        assert!(c.lagrangian().is_err());
    }

    #[test]
    fn expression_errors_carry_position() {
        let c = cfg(r#", "lagrangian": {"expression": "x0' +* 2"}"#).unwrap();
        let msg = c.lagrangian().err().unwrap().to_string();
        assert!(msg.contains("line 1, column"), "{msg}");
    }

    #[test]
    fn json_errors_carry_position() {
        let msg = ProblemConfig::from_json("{\n  \"problem\": {\"dim\": 1,, }").err().unwrap().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn boundary_shapes_are_checked() {
        let c = cfg(r#", "boundary": {"initial": [[0.0, 1.0]], "final": "free"}"#).unwrap();
        assert!(c.boundary().is_err());
        let c = cfg(r#", "boundary": {"initial": [[0.0]], "final": "free"}"#).unwrap();
        assert!(matches!(c.boundary().unwrap().1, TerminalCondition::Free));
    }

    #[test]
    fn solver_overrides_apply() {
        let c = cfg(r#", "solver": {"step": 0.01}"#).unwrap();
        assert_eq!(c.solver().unwrap().step, 0.01);
        assert!(cfg(r#", "solver": {"step": -1.0}"#).unwrap().solver().is_err());
    }
}
