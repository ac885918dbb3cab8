//! Recovering a bubble from a near-solution: locate the maximum, average
//! the P-function over a small ball, build the matching paraboloid for v,
//! and invert it back into a bubble.

use serde::{Deserialize, Serialize};

use crate::bubble::Bubble;
use crate::deficit::{deficit_cfm, energy_window};
use crate::envelope::{decay_envelope, Envelope};
use crate::error::{LabError, Result, StageExt};
use crate::field::{Decay, RadialField};
use crate::kappa::{log_grid, KappaField};
use crate::norms::{ball_mean, norm_integral, NormKind};
use crate::optimize::golden_section;
use crate::params::Params;
use crate::pfunction::{p_function, v_of_u};
use crate::quad::{integrate, Domain, QuadConfig};

/// Ball radius, bubble radius and exponents chosen from the deficit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    /// Radius of the ball over which P is averaged.
    pub t: f64,
    pub tau: f64,
    /// Radius splitting the interior and exterior error norms.
    pub r_big: f64,
    pub m_exp: f64,
    /// min{p, p/(p-1)}
    pub q: f64,
    pub frak_p: f64,
    pub alpha: f64,
    /// Values before clamping.
    pub t_raw: f64,
    pub r_big_raw: f64,
    pub r_big_clamped: bool,
}

impl Schedule {
    /// Schedule for a deficit in (0, 1). `r_floor` and `r_max` bound r_big.
    pub fn new(
        deficit: f64,
        params: &Params,
        alpha: f64,
        r_floor: f64,
        r_max: f64,
    ) -> Result<Self> {
        if !(deficit > 0.0 && deficit < 1.0) {
            return Err(LabError::ScheduleUndefined(deficit));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(LabError::Domain(format!(
                "Hölder exponent {alpha} must lie in (0, 1)"
            )));
        }
        let n = params.dim();
        let p = params.p;
        let q = p.min(params.p_conj);
        let deficit_pos = (2.0 - p).max(0.0);
        let frak_p = 2.0 * n * q + params.p_conj * (2.0 * n + deficit_pos);
        let mut m_exp = q / (4.0 * frak_p);
        if deficit_pos > 0.0 {
            m_exp = m_exp.min(alpha * q * (p - 1.0).powi(2) / (16.0 * (n - 1.0) * p * deficit_pos));
        }
        let t_raw = deficit.powf(1.0 / (8.0 * (n - 1.0)));
        let t = t_raw.clamp(1e-3, 1.0);
        let r_big_raw = deficit.powf(-m_exp);
        let r_big = r_big_raw.max(r_floor).min(r_max.max(r_floor));
        Ok(Self {
            t,
            tau: t,
            r_big,
            m_exp,
            q,
            frak_p,
            alpha,
            t_raw,
            r_big_raw,
            r_big_clamped: r_big != r_big_raw,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionConfig {
    pub alpha: f64,
    pub t: Option<f64>,
    pub r_big: Option<f64>,
    pub r_max: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            t: None,
            r_big: None,
            r_max: 1e4,
        }
    }
}

/// Radius of the maximum of u: 0 when u is radially nonincreasing on a
/// sampled grid, otherwise the maximiser refined by golden section and a
/// Newton polish on u'.
pub fn locate_peak(u: &RadialField) -> Result<f64> {
    if let Decay::Power(g) = u.decay() {
        if g <= 0.0 {
            return Err(LabError::NonDecaying(format!(
                "{u} has no decay at infinity"
            )));
        }
    }
    let mut radii = vec![0.0];
    radii.extend(log_grid(1e-4, 1e3, 701));
    let values: Vec<f64> = radii.iter().map(|r| u.value(*r)).collect::<Result<_>>()?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if values.last().copied().unwrap_or(0.0) >= 0.5 * scale && scale > 0.0 {
        return Err(LabError::NonDecaying(format!(
            "{u} does not decay on [0, 1e3]"
        )));
    }
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] + 1e-14 * scale);
    if nonincreasing {
        return Ok(0.0);
    }
    let i = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if i == 0 {
        return Ok(0.0);
    }
    let lo = radii[i - 1];
    let hi = radii[(i + 1).min(radii.len() - 1)];
    let m = golden_section(|r| Ok(-u.value(r)?), lo, hi, 1e-10 * hi, 200)?;
    let mut r = m.x;
    for _ in 0..8 {
        let d = u.eval_derivs(r, 2)?;
        if d[2] >= 0.0 || d[1] == 0.0 {
            break;
        }
        let next = r - d[1] / d[2];
        if !(next > lo && next < hi) {
            break;
        }
        r = next;
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct Paraboloids {
    /// v(x₀) + ((p-1)/p) (P̄/n)^{1/(p-1)} r^{p/(p-1)}
    pub q_field: RadialField,
    /// (λ^{p/(p-1)} + r^{p/(p-1)}) / A(λ)
    pub curly_q: RadialField,
    pub lambda: f64,
}

/// Scale of the bubble whose P-function equals `p_bar`.
pub fn lambda_from_p_bar(p_bar: f64, params: &Params) -> f64 {
    let n = params.dim();
    let p = params.p;
    (p / (p - 1.0)).powf(p - 1.0)
        * n.powf(1.0 / p)
        * ((n - p) / (p - 1.0)).powf(-(p - 1.0).powi(2) / p)
        / p_bar
}

pub fn paraboloids(v_at_x0: f64, p_bar: f64, params: &Params) -> Result<Paraboloids> {
    if !(p_bar > 0.0) {
        return Err(LabError::NonPositive {
            what: "mean of the P-function",
            r: f64::NAN,
            value: p_bar,
        });
    }
    let n = params.dim();
    let p = params.p;
    let q = params.p_conj;
    let lambda = lambda_from_p_bar(p_bar, params);
    let a = params.bubble_numerator(lambda);
    Ok(Paraboloids {
        q_field: RadialField::power_law(
            v_at_x0,
            (p - 1.0) / p * (p_bar / n).powf(1.0 / (p - 1.0)),
            q,
        ),
        curly_q: RadialField::power_law(lambda.powf(q) / a, 1.0 / a, q),
        lambda,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionReport {
    pub x0_radius: f64,
    /// The maximum was found away from the origin; the bubble is still
    /// centred at the origin.
    pub peak_off_origin: bool,
    pub v_at_x0: f64,
    pub p_bar: f64,
    pub lambda: f64,
    pub bubble: Bubble,
    pub err_interior: f64,
    pub err_exterior: f64,
    pub err_total: f64,
    pub deficit: f64,
    pub schedule: Schedule,
    /// The deficit was outside (0, 1) and the fallback t = 1 was used.
    pub schedule_fallback: bool,
    pub envelope: Envelope,
    /// ((Ĉ₀ - ĉ₀)/ĉ₀)^{(p-1)/p} from the fitted envelope of v.
    pub peak_radius_bound: f64,
    pub peak_within_bound: bool,
    pub in_energy_window: bool,
    pub quad_id: String,
}

/// ‖∇(u - w)‖_{L^p} over the ball of radius `split` and its complement.
pub fn split_gradient_error(
    u: &RadialField,
    w: &RadialField,
    split: f64,
    params: &Params,
    quad: &QuadConfig,
) -> Result<(f64, f64)> {
    let p = params.p;
    let mut kinks = u.kinks();
    kinks.extend(w.kinks());
    let density = |r: f64| -> Result<f64> {
        let du = u.eval_derivs(r, 1)?[1];
        let dw = w.eval_derivs(r, 1)?[1];
        Ok((du - dw).abs().powf(p))
    };
    let decay = match (u.grad_decay(), w.grad_decay()) {
        (Decay::Power(a), Decay::Power(b)) => Decay::Power(p * a.min(b)),
        (Decay::Compact(_), Decay::Power(b)) | (Decay::Power(b), Decay::Compact(_)) => {
            Decay::Power(p * b)
        }
        (Decay::Compact(a), Decay::Compact(b)) => Decay::Compact(a.max(b)),
        _ => Decay::Unknown,
    };
    let inner = integrate(density, &Domain::ball(split, kinks.clone()), params, quad)?.value;
    let outer = integrate(
        density,
        &Domain::exterior(split, decay, kinks),
        params,
        quad,
    )?
    .value;
    Ok((inner.max(0.0).powf(1.0 / p), outer.max(0.0).powf(1.0 / p)))
}

pub fn extract(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
    cfg: &ExtractionConfig,
) -> Result<ExtractionReport> {
    let x0 = locate_peak(u).stage("locate peak")?;
    let v = v_of_u(u, params).stage("v-substitution")?;
    let v_at_x0 = v.v.value(x0).stage("v-substitution")?;

    let deficit = deficit_cfm(u, kappa, params, quad).stage("deficit")?;
    let envelope = decay_envelope(u, params).stage("decay envelope")?;
    let peak_radius_bound = envelope.peak_radius(params);
    let r_floor = peak_radius_bound + 2.0;
    let (mut schedule, schedule_fallback) =
        match Schedule::new(deficit, params, cfg.alpha, r_floor, cfg.r_max) {
            Ok(s) => (s, false),
            Err(LabError::ScheduleUndefined(_)) => {
                let tiny = deficit.clamp(f64::MIN_POSITIVE, 0.5);
                let mut s =
                    Schedule::new(tiny, params, cfg.alpha, r_floor, cfg.r_max).stage("schedule")?;
                s.t = 1.0;
                s.tau = 1.0;
                s.r_big = r_floor;
                (s, true)
            }
            Err(e) => return Err(e.in_stage("schedule")),
        };
    if let Some(t) = cfg.t {
        schedule.t = t;
        schedule.tau = t;
    }
    if let Some(r) = cfg.r_big {
        schedule.r_big = r;
    }

    let p_bar = ball_mean(
        |r| p_function(&v, params, r),
        schedule.t,
        u.kinks(),
        params,
        quad,
    )
    .stage("mean of P")?;
    let par = paraboloids(v_at_x0, p_bar, params).stage("paraboloids")?;
    let bubble = Bubble::centered(par.lambda).stage("bubble")?;
    let ubar = bubble.field(params);
    let (err_interior, err_exterior) =
        split_gradient_error(u, &ubar, schedule.r_big, params, quad).stage("error norms")?;
    let p = params.p;
    let energy = norm_integral(u, &NormKind::GradLp, params, quad)
        .stage("energy")?
        .value;
    let level = norm_integral(&ubar, &NormKind::GradLp, params, quad)
        .stage("energy")?
        .value;
    Ok(ExtractionReport {
        x0_radius: x0,
        peak_off_origin: x0 > 0.0,
        v_at_x0,
        p_bar,
        lambda: par.lambda,
        bubble,
        err_interior,
        err_exterior,
        err_total: (err_interior.powf(p) + err_exterior.powf(p)).powf(1.0 / p),
        deficit,
        schedule,
        schedule_fallback,
        envelope,
        peak_radius_bound,
        peak_within_bound: x0 <= peak_radius_bound,
        in_energy_window: energy_window(energy, level, None, params),
        quad_id: quad.id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_exponents() {
        let params = Params::new(4, 2.0).unwrap();
        let s = Schedule::new(1e-2, &params, 0.5, 0.0, 1e6).unwrap();
        assert_eq!(s.q, 2.0);
        assert_eq!(s.frak_p, 32.0);
        assert!((s.m_exp - 1.0 / 64.0).abs() < 1e-16);
        assert!((s.t - 0.01f64.powf(1.0 / 24.0)).abs() < 1e-15);
        assert!((s.t - 0.8254).abs() < 1e-4);
        let smaller = Schedule::new(1e-4, &params, 0.5, 0.0, 1e6).unwrap();
        assert!(smaller.t < s.t && smaller.r_big > s.r_big);
        assert!(matches!(
            Schedule::new(1.5, &params, 0.5, 0.0, 1e6),
            Err(LabError::ScheduleUndefined(_))
        ));
    }

    #[test]
    fn singular_schedule_uses_hoelder_branch() {
        let params = Params::new(3, 1.5).unwrap();
        let s = Schedule::new(1e-2, &params, 0.5, 0.0, 1e6).unwrap();
        // q = 1.5, frak_p = 2*3*1.5 + 3*(6 + 0.5) = 28.5
        assert!((s.frak_p - 28.5).abs() < 1e-14);
        let holder: f64 = 0.5 * 1.5 * 0.25 / (16.0 * 2.0 * 1.5 * 0.5);
        assert!((s.m_exp - holder.min(1.5 / 114.0)).abs() < 1e-16);
    }

    #[test]
    fn peaks() {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0);
        assert_eq!(locate_peak(&u).unwrap(), 0.0);
        let ue = u.add(&RadialField::bump(1.0).scale(1e-3));
        assert_eq!(locate_peak(&ue).unwrap(), 0.0);
        let ring = RadialField::power_law(0.0, 1.0, 2.0)
            .mul(&RadialField::power_law(1.0, 1.0, 2.0).powf(-2.0).unwrap());
        assert!((locate_peak(&ring).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(
            locate_peak(&RadialField::constant(1.0)),
            Err(LabError::NonDecaying(_))
        ));
    }

    #[test]
    fn paraboloid_gradients_coincide() {
        let params = Params::new(4, 2.0).unwrap();
        let p_bar = 2.0 * 2f64.sqrt();
        let par = paraboloids(0.4, p_bar, &params).unwrap();
        assert!((par.lambda - 1.0).abs() < 1e-14);
        let gap = 0.4 - params.p_function_constant() / p_bar;
        for r in log_grid(1e-2, 1e2, 16) {
            let a = par.q_field.eval_derivs(r, 1).unwrap();
            let b = par.curly_q.eval_derivs(r, 1).unwrap();
            assert!((a[1] - b[1]).abs() <= 1e-14 * a[1].abs());
            assert!((a[0] - b[0] - gap).abs() < 1e-12 * a[0].abs());
        }
        for &(n, p) in &[(5usize, 2.0), (4, 3.0), (3, 1.5)] {
            let params = Params::new(n, p).unwrap();
            let par = paraboloids(1.0, 0.77, &params).unwrap();
            for &r in &[0.1, 1.0, 7.0] {
                let a = par.q_field.eval_derivs(r, 1).unwrap()[1];
                let b = par.curly_q.eval_derivs(r, 1).unwrap()[1];
                assert!((a - b).abs() <= 1e-13 * a.abs(), "n={n} p={p}");
            }
        }
    }

    #[test]
    fn recovers_exact_bubbles() {
        let quad = QuadConfig::default();
        for &(n, p) in &[(4usize, 2.0), (4, 3.0)] {
            let params = Params::new(n, p).unwrap();
            for &lambda in &[0.5, 2.0] {
                let u = RadialField::bubble(&params, lambda);
                let rep = extract(
                    &u,
                    &KappaField::constant(1.0),
                    &params,
                    &quad,
                    &ExtractionConfig::default(),
                )
                .unwrap();
                assert!((rep.lambda - lambda).abs() < 1e-6 * lambda, "{rep:?}");
                assert!(rep.err_total < 1e-6, "{rep:?}");
                assert!(rep.schedule_fallback);
            }
        }
    }
}
