//! Perturbed-bubble experiments: the family u_ε = U + εφ, its distance to
//! the Talenti manifold, dictionary lower bounds for the dual norm of the
//! equation, and sweeps over ε with log-log slope fits.

use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{sobolev_level, Bubble, SobolevLevel, TalentiElement};
use crate::deficit::{deficit_cfm_with, kappa0, sobolev_deficit};
use crate::error::{LabError, Result};
use crate::extraction::{extract, ExtractionConfig};
use crate::field::{p_laplacian, Decay, RadialField};
use crate::kappa::{induced_kappa, log_grid, KappaField};
use crate::norms::{norm, NormKind};
use crate::optimize::golden_section;
use crate::params::Params;
use crate::pfunction::{weighted_diagnostics, WeightedConfig};
use crate::quad::{integrate, Domain, QuadConfig};

pub use crate::envelope::{decay_envelope, Envelope};

const GRADIENT_IDENTITY_TOL: f64 = 1e-12;
const NOISE_ULPS: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct Perturbed {
    pub u: RadialField,
    pub kappa: KappaField,
    pub bubble: RadialField,
    pub phi: RadialField,
}

/// u_ε = U[0, λ] + ε φ with φ the bump of radius `phi_radius`, and the
/// coefficient κ_ε it solves the equation for.
pub fn make_perturbed(
    params: &Params,
    lambda: f64,
    epsilon: f64,
    phi_radius: f64,
) -> Result<Perturbed> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(LabError::Domain(format!(
            "epsilon {epsilon} must lie in [0, 1)"
        )));
    }
    let bubble = Bubble::centered(lambda)?.field(params);
    let phi = RadialField::bump(phi_radius);
    let u = bubble.add(&phi.scale(epsilon));
    // Both profiles are nonincreasing, so the gradients are collinear and
    // their lengths add.
    for r in log_grid(1e-3 * phi_radius, 0.999 * phi_radius, 32) {
        let lhs = u.eval_derivs(r, 1)?[1].abs();
        let rhs = bubble.eval_derivs(r, 1)?[1].abs() + epsilon * phi.eval_derivs(r, 1)?[1].abs();
        if (lhs - rhs).abs() > GRADIENT_IDENTITY_TOL * rhs {
            return Err(LabError::CrossCheck {
                what: "|∇u_ε| = |∇U| + ε|∇φ|",
                lhs,
                rhs,
            });
        }
    }
    let kappa = induced_kappa(&u, params)?;
    Ok(Perturbed {
        u,
        kappa,
        bubble,
        phi,
    })
}

/// Test functions of the dual-norm dictionary, in a fixed order so that a
/// larger dictionary always contains a smaller one: bumps and bubbles at
/// scales 1, 2, 1/2, 4, 1/4, ...
pub fn dictionary(params: &Params, size: usize) -> Vec<RadialField> {
    (0..size)
        .map(|i| {
            let k = (i / 2) as i32;
            let j = if k % 2 == 1 { (k + 1) / 2 } else { -(k / 2) };
            let scale = 2f64.powi(j);
            if i % 2 == 0 {
                RadialField::bump(scale)
            } else {
                RadialField::bubble(params, scale)
            }
        })
        .collect()
}

/// max over the dictionary of |∫ η (Δ_p u + u^{p*-1})| with ‖∇η‖_p = 1.
/// The weak and strong forms agree because every η decays fast enough for
/// the boundary term to vanish.
pub fn dual_lower_bound(
    u: &RadialField,
    params: &Params,
    quad: &QuadConfig,
    dictionary_size: usize,
) -> Result<f64> {
    let src_exp = params.p_star - 1.0;
    let residual =
        |r: f64| -> Result<f64> { Ok(p_laplacian(u, params, r)? + u.value(r)?.powf(src_exp)) };
    let mut best = 0.0f64;
    for eta in dictionary(params, dictionary_size) {
        let scale = norm(&eta, &NormKind::GradLp, params, quad)?;
        let decay = match (eta.decay(), u.decay()) {
            (Decay::Compact(r), _) => Decay::Compact(r),
            (Decay::Power(a), Decay::Power(b)) => Decay::Power(a + src_exp * b),
            _ => Decay::Unknown,
        };
        let mut kinks = eta.kinks();
        kinks.extend(u.kinks());
        let domain = Domain::whole_space(decay, kinks);
        // The residual is a difference of two terms of this size, so it is
        // only known to a few ulps of it.
        let magnitude = integrate(
            |r| Ok(eta.value(r)?.abs() * u.value(r)?.abs().powf(src_exp)),
            &domain,
            params,
            quad,
        )?;
        let noisy = QuadConfig {
            abs_tol: quad
                .abs_tol
                .max(NOISE_ULPS * f64::EPSILON * magnitude.value),
            ..*quad
        };
        let pairing = integrate(
            |r| {
                let e = eta.value(r)?;
                if e == 0.0 {
                    return Ok(0.0);
                }
                Ok(e * residual(r)?)
            },
            &domain,
            params,
            &noisy,
        )?;
        best = best.max(pairing.value.abs() / scale);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    /// ‖∇(u - T)‖_p at the best Talenti element found.
    pub distance: f64,
    pub best: TalentiElement,
    /// Best-so-far distance after each outer evaluation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    /// The best point sits on the edge of its search bracket.
    pub stalled: bool,
}

fn gradient_distance(
    u: &RadialField,
    t: &RadialField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64> {
    let p = params.p;
    let decay = match (u.grad_decay(), t.grad_decay()) {
        (Decay::Power(a), Decay::Power(b)) => Decay::Power(p * a.min(b)),
        _ => Decay::Unknown,
    };
    let mut kinks = u.kinks();
    kinks.extend(t.kinks());
    let integral = integrate(
        |r| {
            let du = u.eval_derivs(r, 1)?[1];
            let dt = t.eval_derivs(r, 1)?[1];
            Ok((du - dt).abs().powf(p))
        },
        &Domain::whole_space(decay, kinks),
        params,
        quad,
    )?;
    Ok(integral.value.max(0.0).powf(1.0 / p))
}

/// Initial Talenti parameters: a = u(0), and b from the radius where u
/// drops by the factor 2^{-(n-p)/p}, as it does at b r^{p'} = 1.
fn initial_guess(u: &RadialField, params: &Params) -> Result<(f64, f64)> {
    let a = u.value(0.0)?;
    if !(a > 0.0) {
        return Err(LabError::NonPositive {
            what: "u at the origin",
            r: 0.0,
            value: a,
        });
    }
    let target = a * 2f64.powf(-params.scaling_exponent());
    let (mut lo, mut hi) = (-14.0f64, 14.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if u.value(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_half = (0.5 * (lo + hi)).exp();
    Ok((a, r_half.powf(-params.p_conj)))
}

/// Distance from u to the concentric Talenti elements a(1 + b r^{p'})^{-(n-p)/p},
/// minimised over a and log b by nested golden-section searches from three
/// starting brackets.
pub fn projection_distance(
    u: &RadialField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<Projection> {
    const X_TOL: f64 = 1e-12;
    const ITERS: usize = 80;
    let (a0, b0) = initial_guess(u, params)?;
    let lb0 = b0.ln();
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut best: Option<(f64, f64, f64, bool)> = None;
    for shift in [0.0, -0.5, 0.5] {
        let (lo, hi) = (lb0 + shift - 1.0, lb0 + shift + 1.0);
        let mut inner_best = BTreeMap::new();
        let outer = golden_section(
            |lb| {
                let b = lb.exp();
                let inner = golden_section(
                    |a| gradient_distance(u, &RadialField::talenti(params, a, b), params, quad),
                    0.5 * a0,
                    1.5 * a0,
                    X_TOL * a0,
                    ITERS,
                )?;
                evaluations += inner.evaluations;
                let running = history.last().copied().unwrap_or(f64::INFINITY);
                history.push(running.min(inner.value));
                inner_best.insert(lb.to_bits(), inner.x);
                Ok(inner.value)
            },
            lo,
            hi,
            X_TOL,
            ITERS,
        )?;
        let a = inner_best[&outer.x.to_bits()];
        let edge = (outer.x - lo).abs() < 1e-6 || (hi - outer.x).abs() < 1e-6;
        if best.is_none_or(|(_, _, d, _)| outer.value < d) {
            best = Some((a, outer.x.exp(), outer.value, edge));
        }
    }
    let (a, b, distance, stalled) = best.expect("three starts");
    Ok(Projection {
        distance,
        best: TalentiElement::new(a, b)?,
        history,
        evaluations,
        stalled,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub params: Params,
    pub lambda: f64,
    pub epsilon_grid: Vec<f64>,
    pub phi_radius: f64,
    pub quad: QuadConfig,
    pub extraction: ExtractionConfig,
    pub weighted: WeightedConfig,
    pub dictionary_size: usize,
}

impl SweepConfig {
    /// The standard family: bump of radius 1 on the unit bubble.
    pub fn standard(params: Params, epsilon_grid: Vec<f64>) -> Self {
        Self {
            params,
            lambda: 1.0,
            epsilon_grid,
            phi_radius: 1.0,
            quad: QuadConfig::default(),
            extraction: ExtractionConfig::default(),
            weighted: WeightedConfig::default(),
            dictionary_size: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if self.epsilon_grid.is_empty() {
            return Err(LabError::Domain("empty epsilon grid".into()));
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(LabError::Domain(format!("epsilon {e} must lie in (0, 1)")));
        }
        if self.epsilon_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::Domain(
                "epsilon grid must be strictly decreasing".into(),
            ));
        }
        if !(self.phi_radius > 0.0 && self.lambda > 0.0) {
            return Err(LabError::Domain(
                "phi_radius and lambda must be positive".into(),
            ));
        }
        if self.dictionary_size == 0 {
            return Err(LabError::Domain("dictionary_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedRatios {
    pub traceless: f64,
    pub weighted: f64,
    pub q1: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    /// ‖∇(u_ε - U)‖_p
    pub lhs_norm: f64,
    pub kappa0: f64,
    pub deficit_cfm: f64,
    pub sobolev_deficit: f64,
    pub projection_distance: f64,
    pub projection_stalled: bool,
    pub extraction_error: f64,
    pub lambda_hat: f64,
    pub err_interior: f64,
    pub err_exterior: f64,
    pub dual_lower_bound: f64,
    /// (𝔡 + |1 - κ₀| ‖u‖_{p*}^{p*-1}) / S, which the dual lower bound
    /// cannot exceed.
    pub dual_upper_bound: f64,
    pub weighted_ratios: WeightedRatios,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub epsilon: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub points: usize,
    /// ε of the point dropped as outside the asymptotic regime.
    pub dropped: Option<f64>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn rms(xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> f64 {
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    (ss / xs.len() as f64).sqrt()
}

/// Residuals below this, in log units, are rounding rather than curvature.
const SLOPE_RESIDUAL_FLOOR: f64 = 1e-9;

/// Least-squares slope of log y against log x over the positive pairs.
/// The point with the largest x is dropped when it misses the line through
/// the others by more than three times their RMS residual.
pub fn loglog_slope(name: &str, x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let mut pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < x.len() {
        info!(
            "{name}: {} nonpositive values left out of the slope fit",
            x.len() - pts.len()
        );
    }
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let fit_on = |k: usize, dropped: Option<f64>| {
        let (slope, intercept) = least_squares(&xs[..k], &ys[..k]);
        SlopeFit {
            slope,
            intercept,
            rms: rms(&xs[..k], &ys[..k], slope, intercept),
            points: k,
            dropped,
        }
    };
    let k = xs.len() - 1;
    if k >= 3 {
        let rest = fit_on(k, Some(xs[k].exp()));
        let miss = (ys[k] - rest.slope * xs[k] - rest.intercept).abs();
        if miss > 3.0 * rest.rms.max(SLOPE_RESIDUAL_FLOOR) {
            info!(
                "{name}: dropped epsilon {:e} from the slope fit",
                xs[k].exp()
            );
            return Some(rest);
        }
    }
    Some(fit_on(xs.len(), None))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    /// Slopes against ε, keyed by column name.
    pub slopes: BTreeMap<String, SlopeFit>,
    /// Slope of the extraction error against the deficit.
    pub extraction_vs_deficit: Option<SlopeFit>,
    /// Largest c with sobolev_deficit ≥ c · projection_distance^{max(2, p)}
    /// on every record.
    pub c_fit: Option<f64>,
    pub phi_grad_norm: f64,
    pub level: SobolevLevel,
    pub quad_id: String,
}

fn sweep_one(cfg: &SweepConfig, level: &SobolevLevel, epsilon: f64) -> Result<SweepRecord> {
    let params = &cfg.params;
    let quad = &cfg.quad;
    let pert = make_perturbed(params, cfg.lambda, epsilon, cfg.phi_radius)?;
    let lhs_norm = norm(&pert.u.sub(&pert.bubble), &NormKind::GradLp, params, quad)?;
    let k0 = kappa0(&pert.u, &pert.kappa, params, quad)?;
    let deficit = deficit_cfm_with(&pert.u, &pert.kappa, k0, params, quad)?;
    let sob = sobolev_deficit(&pert.u, level, params, quad)?;
    let proj = projection_distance(&pert.u, params, quad)?;
    let ext = extract(&pert.u, &pert.kappa, params, quad, &cfg.extraction)?;
    let dual = dual_lower_bound(&pert.u, params, quad, cfg.dictionary_size)?;
    let u_norm = norm(&pert.u, &NormKind::LpStar, params, quad)?;
    let dual_upper_bound =
        (deficit + (1.0 - k0).abs() * u_norm.powf(params.p_star - 1.0)) / level.s;
    let w = weighted_diagnostics(&pert.u, &pert.kappa, params, quad, &cfg.weighted)?;
    Ok(SweepRecord {
        epsilon,
        lhs_norm,
        kappa0: k0,
        deficit_cfm: deficit,
        sobolev_deficit: sob,
        projection_distance: proj.distance,
        projection_stalled: proj.stalled,
        extraction_error: ext.err_total,
        lambda_hat: ext.lambda,
        err_interior: ext.err_interior,
        err_exterior: ext.err_exterior,
        dual_lower_bound: dual,
        dual_upper_bound,
        weighted_ratios: WeightedRatios {
            traceless: w.ratio_traceless,
            weighted: w.ratio_weighted,
            q1: w.ratio_q1,
            q2: w.ratio_q2,
        },
    })
}

/// Run the family over the ε grid. Each ε is independent; a failing ε is
/// recorded and the others still run.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let params = &cfg.params;
    let level = sobolev_level(params, &cfg.quad)?;
    let phi_grad_norm = norm(
        &RadialField::bump(cfg.phi_radius),
        &NormKind::GradLp,
        params,
        &cfg.quad,
    )?;
    let outcomes: Vec<(f64, Result<SweepRecord>)> = cfg
        .epsilon_grid
        .par_iter()
        .map(|&e| (e, sweep_one(cfg, &level, e)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (epsilon, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(SweepFailure {
                epsilon,
                error: e.to_string(),
            }),
        }
    }

    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    let column = |f: fn(&SweepRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let columns: [(&str, fn(&SweepRecord) -> f64); 6] = [
        ("lhs_norm", |r| r.lhs_norm),
        ("deficit_cfm", |r| r.deficit_cfm),
        ("sobolev_deficit", |r| r.sobolev_deficit),
        ("projection_distance", |r| r.projection_distance),
        ("extraction_error", |r| r.extraction_error),
        ("dual_lower_bound", |r| r.dual_lower_bound),
    ];
    let mut slopes = BTreeMap::new();
    for (name, f) in columns {
        if let Some(fit) = loglog_slope(name, &eps, &column(f)) {
            slopes.insert(name.to_string(), fit);
        }
    }
    let extraction_vs_deficit = loglog_slope(
        "extraction_error vs deficit_cfm",
        &column(|r| r.deficit_cfm),
        &column(|r| r.extraction_error),
    );
    let exponent = params.p.max(2.0);
    let c_fit = records
        .iter()
        .map(|r| r.sobolev_deficit / r.projection_distance.powf(exponent))
        .min_by(f64::total_cmp);
    Ok(SweepReport {
        records,
        failures,
        slopes,
        extraction_vs_deficit,
        c_fit,
        phi_grad_norm,
        level,
        quad_id: cfg.quad.id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> (Params, QuadConfig) {
        (Params::new(4, 2.0).unwrap(), QuadConfig::default())
    }

    #[test]
    fn unperturbed_family_has_unit_kappa() {
        let (params, _) = standard();
        let pert = make_perturbed(&params, 1.0, 0.0, 1.0).unwrap();
        for r in [0.0, 0.3, 1.0, 10.0] {
            assert!((pert.kappa.value(r).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(make_perturbed(&params, 1.0, 1.0, 1.0).is_err());
        assert!(make_perturbed(&params, 1.0, -1e-3, 1.0).is_err());
    }

    #[test]
    fn dictionary_is_nested() {
        let (params, _) = standard();
        let small = dictionary(&params, 5);
        let big = dictionary(&params, 10);
        for (a, b) in small.iter().zip(&big) {
            assert_eq!(a.to_string(), b.to_string());
        }
        assert_eq!(big[2].support_radius(), Some(2.0));
        assert_eq!(big[4].support_radius(), Some(0.5));
    }

    #[test]
    fn dual_bound_vanishes_on_bubbles_and_grows_with_the_dictionary() {
        let (params, quad) = standard();
        let u = RadialField::bubble(&params, 1.0);
        assert!(dual_lower_bound(&u, &params, &quad, 8).unwrap() < 1e-13);
        let pert = make_perturbed(&params, 1.0, 1e-2, 1.0).unwrap();
        let small = dual_lower_bound(&pert.u, &params, &quad, 4).unwrap();
        let big = dual_lower_bound(&pert.u, &params, &quad, 8).unwrap();
        assert!(small > 0.0 && big >= small);
    }

    #[test]
    fn projection_of_a_bubble_finds_it() {
        let (params, quad) = standard();
        let u = RadialField::bubble(&params, 1.3);
        let proj = projection_distance(&u, &params, &quad).unwrap();
        let exact = Bubble::centered(1.3).unwrap().to_talenti(&params);
        assert!(proj.distance < 1e-9, "{}", proj.distance);
        assert!((proj.best.b / exact.b - 1.0).abs() < 1e-8);
        assert!((proj.best.amp_a / exact.amp_a - 1.0).abs() < 1e-8);
        assert!(proj.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn projection_beats_the_unperturbed_bubble() {
        let (params, quad) = standard();
        let eps = 1e-2;
        let pert = make_perturbed(&params, 1.0, eps, 1.0).unwrap();
        let proj = projection_distance(&pert.u, &params, &quad).unwrap();
        let lhs = eps * norm(&pert.phi, &NormKind::GradLp, &params, &quad).unwrap();
        assert!(proj.distance <= lhs * (1.0 + 1e-12));
        assert!(proj.distance > 0.0);
    }

    #[test]
    fn slope_fit_drops_a_preasymptotic_point() {
        let x = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|e| 2.0 * e * e).collect();
        let fit = loglog_slope("y", &x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && fit.dropped.is_none());
        let mut bent = y.clone();
        bent[4] *= 3.0;
        let fit = loglog_slope("bent", &x, &bent).unwrap();
        assert!((fit.dropped.unwrap() - 1e-2).abs() < 1e-15);
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let (params, _) = standard();
        for grid in [vec![], vec![1e-3, 1e-2], vec![1.5, 1e-2], vec![1e-2, 1e-2]] {
            assert!(sweep(&SweepConfig::standard(params, grid)).is_err());
        }
    }
}
