//! One line per acceptance criterion; exits non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;
use std::sync::Arc;

use jetvar::commands;
use jetvar::config::ProblemConfig;
use jetvar_core::bundles::FnCurve;
use jetvar_core::checks::{Group, GroupReport};
use jetvar_core::geometry::{
    cubic_boundary_term, cubic_el_residual, raise_index, CubicLagrangian, MetricField, Sphere2,
};
use jetvar_core::solver::{
    cubic_spline_oracle, integrate_el, shoot_bvp, SolverConfig, TerminalCondition,
};
use jetvar_core::variational::{
    boundary_pairing, force_along, transversality_check, BoundaryPreset, FnLagrangian, Lagrangian,
};
use jetvar_core::{CurveEvaluator, JetScalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const MAX_K: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(value: f64, tol: f64, what: &str) -> Outcome {
        Outcome {
            pass: value <= tol,
            detail: format!("{what} {value:.3e} (tol {tol:.0e})"),
        }
    }

    fn fail(e: impl std::fmt::Display) -> Outcome {
        Outcome {
            pass: false,
            detail: format!("error: {e}"),
        }
    }

    fn and(self, other: Outcome) -> Outcome {
        Outcome {
            pass: self.pass && other.pass,
            detail: format!("{}; {}", self.detail, other.detail),
        }
    }
}

fn config(name: &str) -> ProblemConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "configs", name].iter().collect();
    ProblemConfig::load(&path).expect("shipped configs are valid")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn groups(reports: &[GroupReport], wanted: &[Group]) -> Outcome {
    let picked: Vec<&GroupReport> = reports.iter().filter(|r| wanted.contains(&r.group)).collect();
    let pass = picked.iter().all(|r| r.passed());
    let detail = picked
        .iter()
        .map(|r| {
            let verdict = if r.passed() { "ok" } else { "FAIL" };
            match &r.failure {
                Some(f) => format!("{} {verdict} ({f})", r.group.name()),
                None => format!(
                    "{} n={} max {:.2e} tol {:.0e} {verdict}",
                    r.group.name(),
                    r.samples,
                    r.max_error,
                    r.group.tolerance()
                ),
            }
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, detail }
}

fn spline_reproduction() -> Result<Outcome, Box<dyn std::error::Error>> {
    let cfg = config("flat_cubic.json");
    let table = commands::bvp(&cfg)?;
    let spline = cubic_spline_oracle(&[(0.0, 0.2), (1.0, 1.3)], -0.7, 0.4)?;
    let t = table.column("t").ok_or("missing t column")?;
    let x = table.column("x0_0").ok_or("missing x0_0 column")?;
    if t.len() != 101 {
        return Err(format!("expected 101 rows, found {}", t.len()).into());
    }
    let sup = t.iter().zip(&x).fold(0.0f64, |m, (t, x)| m.max((x - spline.eval(*t)).abs()));

    let l = cfg.lagrangian()?;
    let solver = cfg.solver()?;
    let (initial, terminal) = cfg.boundary()?;
    let r = shoot_bvp(l.as_ref(), 0.0, 1.0, &initial, &terminal, &solver)?;
    let mut fourth = 0.0f64;
    for i in 0..r.trajectory.states.len() {
        let jet = r.trajectory.full_jet(l.as_ref(), i, &solver)?;
        fourth = fourth.max(jet.coords()[0].coeffs()[4].abs());
    }
    Ok(Outcome::check(sup, 1e-7, "sup |x - spline|").and(Outcome::check(fourth, 1e-8, "max |x''''|")))
}

fn sphere_curve(rng: &mut ChaCha8Rng) -> impl CurveEvaluator {
    let c: Vec<Vec<f64>> = vec![
        vec![
            rng.gen_range(1.0..2.1),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.2..0.2),
        ],
        (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    ];
    FnCurve::new(2, move |t: &JetScalar| {
        Ok(c.iter()
            .map(|co| {
                co.iter()
                    .rev()
                    .fold(JetScalar::zeros(t.shape()), |acc, v| (&acc * t).add_scalar(*v))
            })
            .collect())
    })
}

fn great_circle(beta: f64) -> impl CurveEvaluator {
    FnCurve::new(2, move |t: &JetScalar| {
        let (c, s) = (t.cos(), t.sin());
        let y = s.scale(beta.cos());
        let z = s.scale(beta.sin());
        let one_minus = (&z * &z).scale(-1.0).add_scalar(1.0);
        let theta = z.try_div(&one_minus.sqrt()?)?.atan().scale(-1.0).add_scalar(FRAC_PI_2);
        let phi = y.try_div(&c)?.atan();
        Ok(vec![theta, phi])
    })
}

fn riemannian_cubics() -> Result<Outcome, Box<dyn std::error::Error>> {
    let g: Arc<dyn MetricField> = Arc::new(Sphere2);
    let l = CubicLagrangian::new(g.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut bridge = 0.0f64;
    for _ in 0..20 {
        let curve = sphere_curve(&mut rng);
        let t = rng.gen_range(-0.3..0.3);
        let f = force_along(&l, &curve, t)?;
        let raised = raise_index(g.as_ref(), &f.point, &f.f)?;
        let res = cubic_el_residual(g.as_ref(), &curve, t)?;
        for (a, b) in raised.iter().zip(&res) {
            bridge = bridge.max(rel(a / 2.0, *b));
        }
    }

    let mut geodesic = 0.0f64;
    for beta in [0.0, 0.4, 1.2] {
        for t in [-0.5, 0.0, 0.6] {
            let r = cubic_el_residual(g.as_ref(), &great_circle(beta), t)?;
            geodesic = r.iter().fold(geodesic, |m, v| m.max(v.abs()));
        }
    }

    let mut boundary = 0.0f64;
    for _ in 0..20 {
        let curve = sphere_curve(&mut rng);
        let var = sphere_curve(&mut rng);
        let t = rng.gen_range(-0.3..0.3);
        let a = cubic_boundary_term(g.as_ref(), &curve, &var, t)?;
        let b = boundary_pairing(&l, &curve, &var, t)?;
        boundary = boundary.max(rel(a, b));
    }

    Ok(Outcome::check(bridge, 1e-8, "force/2 vs cubic residual")
        .and(Outcome::check(geodesic, 1e-10, "geodesic residual"))
        .and(Outcome::check(boundary, 1e-8, "boundary term vs momentum")))
}

fn transversality() -> Result<Outcome, Box<dyn std::error::Error>> {
    let table = commands::bvp(&config("free_end.json"))?;
    let v = *table.column("x0_1").ok_or("missing x0_1 column")?.last().ok_or("empty table")?;
    let free = Outcome::check(v.abs(), 1e-6, "free end |x'(t1)|");

    let l = FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| {
        Ok((&x[0][1] * &x[0][1] - &x[0][0] * &x[0][0]).scale(0.5))
    });
    let r = shoot_bvp(
        &l,
        0.0,
        1.0,
        &[vec![1.0]],
        &TerminalCondition::Fixed(vec![vec![0.5]]),
        &SolverConfig::default(),
    )?;
    let solver = SolverConfig::default();
    let curve = r.trajectory.as_curve(&l, &solver);
    let rep = transversality_check(&l, &curve, 0.0, 1.0, &BoundaryPreset::Fixed.basis(1, 1), 1e-6)?;
    let fixed = Outcome {
        pass: rep.satisfied && rep.residuals.is_empty(),
        detail: format!("fixed end: {} tangent directions, satisfied", rep.residuals.len()),
    };
    Ok(free.and(fixed))
}

fn hygiene() -> Result<Outcome, Box<dyn std::error::Error>> {
    let l = FnLagrangian::new(1, 1, |x: &[Vec<JetScalar>]| {
        Ok((&x[0][1] * &x[0][1] - &x[0][0] * &x[0][0]).scale(0.5))
    });
    let err = |h: f64| -> Result<f64, Box<dyn std::error::Error>> {
        let cfg = SolverConfig {
            step: h,
            ..Default::default()
        };
        let tr = integrate_el(&l as &dyn Lagrangian, &[1.0, 0.0], 0.0, 1.0, &cfg)?;
        Ok((tr.last().z[0] - 1f64.cos()).abs())
    };
    let ratio = err(0.1)? / err(0.05)?;
    let rk4 = Outcome {
        pass: (12.0..=20.0).contains(&ratio),
        detail: format!("RK4 error ratio {ratio:.3} (want [12, 20])"),
    };

    let dir = tempfile::tempdir()?;
    let mut csvs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let cfg_path = dir.path().join(format!("cfg{i}.json"));
        let src = std::fs::read_to_string(
            [env!("CARGO_MANIFEST_DIR"), "configs", "momentum.json"].iter().collect::<PathBuf>(),
        )?;
        let mut json: serde_json::Value = serde_json::from_str(&src)?;
        json["output"]["csv"] = serde_json::Value::String(out.display().to_string());
        std::fs::write(&cfg_path, json.to_string())?;
        let code = jetvar::run(
            ["jetvar", "momentum", "--config", cfg_path.to_str().ok_or("path")?],
            &mut Vec::new(),
            &mut Vec::new(),
        );
        if code != 0 {
            return Err(format!("momentum run exited with {code}").into());
        }
        csvs.push(std::fs::read(out)?);
    }
    let mut tables = Vec::new();
    for _ in 0..2 {
        let mut out = Vec::new();
        jetvar::run(["jetvar", "verify", "--seed", "7", "--max-k", "2"], &mut out, &mut Vec::new());
        tables.push(out);
    }
    let identical = csvs[0] == csvs[1] && tables[0] == tables[1] && !csvs[0].is_empty();
    let det = Outcome {
        pass: identical,
        detail: format!(
            "repeated CSV and verify output {}",
            if identical { "byte-identical" } else { "differ" }
        ),
    };
    Ok(rk4.and(det))
}

fn main() {
    let reports = commands::verify(SEED, MAX_K);
    let lift = |r: Result<Outcome, Box<dyn std::error::Error>>| r.unwrap_or_else(Outcome::fail);
    let criteria: Vec<(&str, Outcome)> = vec![
        (
            "integration-by-parts identity suite",
            groups(
                &reports,
                &[
                    Group::UpsilonWellDefined,
                    Group::UpsilonRecurrence,
                    Group::MomentaRecurrence,
                    Group::IntegrationByParts,
                ],
            ),
        ),
        (
            "kappa/epsilon duality and projection left inverse",
            groups(&reports, &[Group::KappaEpsDuality, Group::ProjectionLeftInverse]),
        ),
        ("general recurrence", groups(&reports, &[Group::GeneralRecurrence])),
        (
            "force and momentum vs classical formulas",
            groups(&reports, &[Group::ForceClassical, Group::MomentumClassical]),
        ),
        ("variation of the action", groups(&reports, &[Group::ActionVariation])),
        ("clamped cubic spline reproduction", lift(spline_reproduction())),
        ("Riemannian cubics on the sphere", lift(riemannian_cubics())),
        ("functoriality of the force morphism", groups(&reports, &[Group::Functoriality])),
        ("transversality conditions", lift(transversality())),
        ("numerics hygiene", lift(hygiene())),
    ];
    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}  {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
