//! One function per command. Each returns its table, the JSON pieces of
//! the report and the checks it ran; nothing is written here.

use std::f64::consts::PI;

use plaplab::bubble::{pde_residual, sobolev_level};
use plaplab::deficit::deficit_report;
use plaplab::extraction::extract;
use plaplab::grid::CubicSpline;
use plaplab::kappa::{induced_kappa, log_grid};
use plaplab::lab::{make_perturbed, sweep, SweepConfig, SweepRecord, SweepReport};
use plaplab::norms::{norm, norm_integral, NormKind};
use plaplab::pfunction::matrix::c_is_decreasing;
use plaplab::pfunction::{identity_residual, matrix_inequality_check, v_of_u, IdentitySetup};
use plaplab::{KappaField, Params, RadialField};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::plot::{loglog_svg, Series};
use crate::table::{Check, Table};

pub const BUBBLE_RESIDUAL_TOL: f64 = 1e-8;
pub const ENERGY_IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub records: Value,
    pub slopes: Value,
    pub checks: Vec<Check>,
    /// File stem and SVG text.
    pub plots: Vec<(String, String)>,
}

impl Outcome {
    fn new(table: Table, records: Value, checks: Vec<Check>) -> Self {
        Self {
            table,
            records,
            slopes: json!({}),
            checks,
            plots: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Output(e.to_string()))
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::BubbleCheck => bubble_check(cfg),
        Command::Deficit => deficit(cfg),
        Command::Extract => extract_cmd(cfg),
        Command::Sweep => sweep_cmd(cfg),
        Command::IdentityCheck => identity_check(cfg),
        Command::MatrixCheck => matrix_check(cfg),
    }
}

/// S^n from the closed form of the sharp Sobolev constant.
pub fn sobolev_level_closed_form(params: &Params) -> f64 {
    let n = params.n as f64;
    let p = params.p;
    let g = libm::tgamma;
    let s = PI.sqrt()
        * n.powf(1.0 / p)
        * ((n - p) / (p - 1.0)).powf((p - 1.0) / p)
        * (g(n / p) * g(1.0 + n - n / p) / (g(1.0 + n / 2.0) * g(n))).powf(1.0 / n);
    s.powf(n)
}

fn bubble_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let quad = &cfg.quad;
    let closed = sobolev_level_closed_form(&params);
    let mut table = Table::new(&[
        "n",
        "p",
        "lambda",
        "max_residual",
        "energy",
        "mass",
        "relative_gap",
        "s_pow_n_closed_form",
        "quad_id",
    ]);
    let mut checks = Vec::new();
    let mut records = Vec::new();
    for &lambda in &cfg.family.lambdas {
        let u = RadialField::bubble(&params, lambda);
        let mut worst = 0.0f64;
        for r in log_grid(1e-3, 1e3, 64) {
            worst = worst.max(pde_residual(&u, &params, r)?);
        }
        let energy = norm_integral(&u, &NormKind::GradLp, &params, quad)?.value;
        let mass = norm_integral(&u, &NormKind::LpStar, &params, quad)?.value;
        let gap = (energy - mass).abs() / energy;
        table.push(vec![
            params.n.into(),
            params.p.into(),
            lambda.into(),
            worst.into(),
            energy.into(),
            mass.into(),
            gap.into(),
            closed.into(),
            quad.id().into(),
        ]);
        records
            .push(json!({"lambda": lambda, "max_residual": worst, "energy": energy, "mass": mass}));
        checks.push(Check::at_most(
            format!("residual lambda={lambda}"),
            worst,
            BUBBLE_RESIDUAL_TOL,
        ));
        checks.push(Check::at_most(
            format!("energy identity lambda={lambda}"),
            gap,
            ENERGY_IDENTITY_TOL,
        ));
        checks.push(Check::at_most(
            format!("closed form lambda={lambda}"),
            (energy - closed).abs() / closed,
            ENERGY_IDENTITY_TOL,
        ));
    }
    Ok(Outcome::new(table, Value::Array(records), checks))
}

struct Input {
    u: RadialField,
    kappa: KappaField,
    source: String,
    /// ε and ‖∇φ‖_p for the perturbed family.
    family: Option<(f64, f64)>,
}

fn input(cfg: &RunConfig, params: &Params) -> Result<Input, CliError> {
    let f = &cfg.family;
    if let Some(path) = &f.profile {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let spline = CubicSpline::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let u = RadialField::spline(spline);
        let kappa = induced_kappa(&u, params)?;
        return Ok(Input {
            u,
            kappa,
            source: path.display().to_string(),
            family: None,
        });
    }
    let pert = make_perturbed(params, f.lambda, f.epsilon, f.phi_radius)?;
    let grad_phi = norm(&pert.phi, &NormKind::GradLp, params, &cfg.quad)?;
    Ok(Input {
        u: pert.u,
        kappa: pert.kappa,
        source: "bubble+bump".into(),
        family: Some((f.epsilon, grad_phi)),
    })
}

fn deficit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let quad = &cfg.quad;
    let inp = input(cfg, &params)?;
    let level = sobolev_level(&params, quad)?;
    let rep = deficit_report(&inp.u, &inp.kappa, &level, &params, quad)?;
    let mut table = Table::new(&[
        "source",
        "epsilon",
        "kappa0",
        "kappa0_energy",
        "deficit_cfm",
        "sobolev_deficit",
        "energy",
        "mass",
        "in_energy_window",
        "quad_id",
    ]);
    table.push(vec![
        inp.source.into(),
        inp.family.map_or(f64::NAN, |f| f.0).into(),
        rep.kappa0.into(),
        rep.kappa0_energy.into(),
        rep.deficit_cfm.into(),
        rep.sobolev_deficit.into(),
        rep.energy.into(),
        rep.mass.into(),
        rep.in_energy_window.into(),
        quad.id().into(),
    ]);
    let checks = vec![
        // Testing the equation against u itself makes the two quotients equal.
        Check::at_most("kappa0 quotients agree", rep.kappa0_gap, 1e-8),
        Check::flag(
            "deficit is finite and nonnegative",
            rep.deficit_cfm >= 0.0 && rep.deficit_cfm.is_finite(),
        ),
        Check::flag("energy window", rep.in_energy_window),
    ];
    Ok(Outcome::new(table, to_json(&rep)?, checks))
}

fn extract_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let quad = &cfg.quad;
    let inp = input(cfg, &params)?;
    let rep = extract(&inp.u, &inp.kappa, &params, quad, &cfg.schedule)?;
    let mut table = Table::new(&[
        "source",
        "epsilon",
        "x0_radius",
        "lambda_hat",
        "p_bar",
        "t",
        "r_big",
        "deficit",
        "err_interior",
        "err_exterior",
        "err_total",
        "schedule_fallback",
        "quad_id",
    ]);
    table.push(vec![
        inp.source.into(),
        inp.family.map_or(f64::NAN, |f| f.0).into(),
        rep.x0_radius.into(),
        rep.lambda.into(),
        rep.p_bar.into(),
        rep.schedule.t.into(),
        rep.schedule.r_big.into(),
        rep.deficit.into(),
        rep.err_interior.into(),
        rep.err_exterior.into(),
        rep.err_total.into(),
        rep.schedule_fallback.into(),
        quad.id().into(),
    ]);
    let ubar = rep.bubble.field(&params);
    let mut worst = 0.0f64;
    for r in log_grid(1e-3, 1e3, 64) {
        worst = worst.max(pde_residual(&ubar, &params, r)?);
    }
    let mut checks = vec![
        Check::at_most("recovered bubble residual", worst, BUBBLE_RESIDUAL_TOL),
        Check::flag("peak inside the located ball", rep.peak_within_bound),
    ];
    if let Some((eps, grad_phi)) = inp.family {
        let lambda = cfg.family.lambda;
        if eps == 0.0 {
            checks.push(Check::at_most(
                "scale recovered",
                (rep.lambda - lambda).abs() / lambda,
                1e-6,
            ));
        } else {
            checks.push(Check::at_most(
                "scale within 5%",
                (rep.lambda - lambda).abs() / lambda,
                0.05,
            ));
            checks.push(Check::at_most(
                "error against 10 eps |grad phi|",
                rep.err_total,
                10.0 * eps * grad_phi,
            ));
        }
    }
    Ok(Outcome::new(table, to_json(&rep)?, checks))
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "epsilon",
    "lhs_norm",
    "deficit_cfm",
    "sobolev_deficit",
    "projection_distance",
    "extraction_error",
    "dual_lower_bound",
    "lambda_hat",
    "err_interior",
    "err_exterior",
    "quad_id",
];

pub fn sweep_config(cfg: &RunConfig) -> Result<SweepConfig, CliError> {
    let params = cfg.params()?;
    Ok(SweepConfig {
        params,
        lambda: cfg.family.lambda,
        epsilon_grid: cfg.family.epsilon_grid.clone(),
        phi_radius: cfg.family.phi_radius,
        quad: cfg.quad,
        extraction: cfg.schedule,
        weighted: cfg.weighted,
        dictionary_size: cfg.dictionary_size,
    })
}

/// The checks the sweep is held to. The slope targets are those of the
/// quadratic case and are only asserted for p = 2.
pub fn sweep_checks(rep: &SweepReport, params: &Params) -> Vec<Check> {
    let mut checks = vec![Check::at_most(
        "failed epsilons",
        rep.failures.len() as f64,
        0.0,
    )];
    let slope = |name: &str| rep.slopes.get(name).map_or(f64::NAN, |f| f.slope);
    checks.push(Check::near("lhs_norm slope", slope("lhs_norm"), 1.0, 1e-6));
    let worst_lhs = rep
        .records
        .iter()
        .map(|r| (r.lhs_norm / (r.epsilon * rep.phi_grad_norm) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("lhs_norm = eps |grad phi|", worst_lhs, 1e-8));
    if params.p == 2.0 {
        checks.push(Check::near(
            "deficit_cfm slope",
            slope("deficit_cfm"),
            1.0,
            0.1,
        ));
        checks.push(Check::near(
            "dual_lower_bound slope",
            slope("dual_lower_bound"),
            1.0,
            0.15,
        ));
        checks.push(Check::near(
            "sobolev_deficit slope",
            slope("sobolev_deficit"),
            2.0,
            0.3,
        ));
    }
    // Records run from the largest ε down.
    let increases = rep
        .records
        .windows(2)
        .filter(|w| w[1].extraction_error > w[0].extraction_error)
        .count();
    checks.push(Check::at_most(
        "extraction_error nonincreasing",
        increases as f64,
        0.0,
    ));
    let dual_excess = rep
        .records
        .iter()
        .map(|r| r.dual_lower_bound - r.dual_upper_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "dual bound below deficit bound",
        dual_excess,
        0.0,
    ));
    let vs = rep
        .extraction_vs_deficit
        .as_ref()
        .map_or(f64::NAN, |f| f.slope);
    checks.push(Check {
        name: "extraction_error vs deficit slope positive".into(),
        pass: vs > 0.0,
        value: vs,
        tolerance: 0.0,
    });
    let c = rep.c_fit.unwrap_or(f64::NAN);
    checks.push(Check {
        name: "sobolev deficit against distance, fitted c positive".into(),
        pass: c > 0.0,
        value: c,
        tolerance: 0.0,
    });
    checks
}

pub fn sweep_table(rep: &SweepReport) -> Table {
    let mut table = Table::new(&SWEEP_COLUMNS);
    for r in &rep.records {
        table.push(vec![
            r.epsilon.into(),
            r.lhs_norm.into(),
            r.deficit_cfm.into(),
            r.sobolev_deficit.into(),
            r.projection_distance.into(),
            r.extraction_error.into(),
            r.dual_lower_bound.into(),
            r.lambda_hat.into(),
            r.err_interior.into(),
            r.err_exterior.into(),
            rep.quad_id.clone().into(),
        ]);
    }
    table
}

fn sweep_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let scfg = sweep_config(cfg)?;
    let rep = sweep(&scfg)?;
    let columns: [(&str, fn(&SweepRecord) -> f64); 6] = [
        ("lhs_norm", |r| r.lhs_norm),
        ("deficit_cfm", |r| r.deficit_cfm),
        ("sobolev_deficit", |r| r.sobolev_deficit),
        ("projection_distance", |r| r.projection_distance),
        ("extraction_error", |r| r.extraction_error),
        ("dual_lower_bound", |r| r.dual_lower_bound),
    ];
    let series: Vec<Series> = columns
        .into_iter()
        .map(|(name, f)| Series {
            name,
            points: rep.records.iter().map(|r| (r.epsilon, f(r))).collect(),
            fit: rep.slopes.get(name).map(|f| (f.slope, f.intercept)),
        })
        .collect();
    let mut outcome = Outcome::new(
        sweep_table(&rep),
        json!({"records": to_json(&rep.records)?, "failures": to_json(&rep.failures)?,
               "phi_grad_norm": rep.phi_grad_norm, "level": to_json(&rep.level)?,
               "c_fit": rep.c_fit, "extraction_vs_deficit": to_json(&rep.extraction_vs_deficit)?}),
        sweep_checks(&rep, &scfg.params),
    );
    outcome.slopes = to_json(&rep.slopes)?;
    if cfg.output.plots.unwrap_or(true) {
        outcome
            .plots
            .push(("sweep".into(), loglog_svg("sweep over epsilon", &series)?));
    }
    Ok(outcome)
}

/// The three standard profiles of the divergence identity.
pub fn identity_cases() -> Result<Vec<(&'static str, RadialField, IdentitySetup)>, CliError> {
    let paraboloid = RadialField::power_law(1.0, 1.0, 2.0);
    let p24 = Params::new(4, 2.0)?;
    let bubble_v = v_of_u(&RadialField::bubble(&p24, 1.0), &p24)?.v;
    Ok(vec![
        (
            "1+r^2 p=2 n=3",
            paraboloid.clone(),
            IdentitySetup::from_params(&Params::new(3, 2.0)?),
        ),
        ("1+r^2 p=4 n=4", paraboloid, IdentitySetup::new(4, 4.0, 1.0)),
        (
            "bubble-v p=2 n=4",
            bubble_v,
            IdentitySetup::from_params(&p24),
        ),
    ])
}

fn identity_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let id = &cfg.identity;
    let mut table = Table::new(&["case", "n", "p", "r", "lhs", "rhs", "relative", "quad_id"]);
    let mut checks = Vec::new();
    let mut records = Vec::new();
    for (name, w, mut setup) in identity_cases()? {
        setup.h = id.h;
        let mut worst = 0.0f64;
        for r in log_grid(id.r_min, id.r_max, id.radii) {
            let res = identity_residual(&w, &setup, r)?;
            worst = worst.max(res.relative);
            table.push(vec![
                name.into(),
                setup.dim.into(),
                setup.potential_p.into(),
                r.into(),
                res.lhs.into(),
                res.rhs.into(),
                res.relative.into(),
                cfg.quad.id().into(),
            ]);
            records.push(to_json(&res)?);
        }
        checks.push(Check::at_most(
            format!("identity {name}"),
            worst,
            id.tolerance,
        ));
    }
    Ok(Outcome::new(table, Value::Array(records), checks))
}

fn matrix_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = &cfg.matrix;
    let mut table = Table::new(&[
        "dim",
        "trials",
        "seed",
        "commutator_violations",
        "trace_violations",
        "max_commutator_excess",
        "max_trace_excess",
        "min_rho",
        "quad_id",
    ]);
    let mut checks = Vec::new();
    let mut records = Vec::new();
    for &dim in &m.dims {
        let rep = matrix_inequality_check(dim, m.trials, cfg.seed, m.slack);
        table.push(vec![
            dim.into(),
            rep.trials.into(),
            crate::table::Cell::Int(rep.seed),
            rep.commutator_violations.into(),
            rep.trace_violations.into(),
            rep.max_commutator_excess.into(),
            rep.max_trace_excess.into(),
            rep.min_rho.into(),
            cfg.quad.id().into(),
        ]);
        checks.push(Check::at_most(
            format!("violations dim={dim}"),
            (rep.commutator_violations + rep.trace_violations) as f64,
            0.0,
        ));
        records.push(to_json(&rep)?);
    }
    checks.push(Check::flag(
        "c(rho) decreasing on 100 points",
        c_is_decreasing(0.0, 100),
    ));
    Ok(Outcome::new(table, Value::Array(records), checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_level() {
        let params = Params::new(4, 2.0).unwrap();
        let s4 = sobolev_level_closed_form(&params);
        assert!((s4 - 32.0 * PI * PI / 3.0).abs() < 1e-12 * s4);
        // In three dimensions ‖∇u‖₂² ≥ 3(π/2)^{4/3} ‖u‖₆².
        let s3 = sobolev_level_closed_form(&Params::new(3, 2.0).unwrap());
        let s = (3.0 * (PI / 2.0).powf(4.0 / 3.0)).sqrt();
        assert!((s3 - s.powi(3)).abs() < 1e-12 * s3);
    }
}
