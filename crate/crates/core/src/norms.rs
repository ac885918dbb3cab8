//! Lebesgue and energy norms of radial fields, and ball averages.

use crate::error::{LabError, Result};
use crate::field::{Decay, RadialField};
use crate::params::Params;
use crate::quad::{integrate, Domain, IntegralResult, QuadConfig};

#[derive(Debug, Clone)]
pub enum NormKind {
    Lp(f64),
    /// L^{p*}
    LpStar,
    /// L^p norm of the gradient.
    GradLp,
    /// int v^{w_exp} |f|^q, with no root taken.
    Weighted {
        v: RadialField,
        w_exp: f64,
        q: f64,
    },
}

fn scale_decay(d: Decay, q: f64) -> Decay {
    match d {
        Decay::Power(g) => Decay::Power(q * g),
        d => d,
    }
}

/// The integral behind a norm: int |f|^q, int |f'|^q, or the weighted form.
pub fn norm_integral(
    f: &RadialField,
    kind: &NormKind,
    params: &Params,
    quad: &QuadConfig,
) -> Result<IntegralResult> {
    let kinks = f.kinks();
    match kind {
        NormKind::Lp(q) | NormKind::Weighted { q, .. } if *q <= 0.0 => Err(LabError::Domain(
            format!("norm exponent {q} must be positive"),
        )),
        NormKind::Lp(q) => {
            let q = *q;
            let domain = Domain::whole_space(scale_decay(f.decay(), q), kinks);
            integrate(|r| Ok(f.value(r)?.abs().powf(q)), &domain, params, quad)
        }
        NormKind::LpStar => norm_integral(f, &NormKind::Lp(params.p_star), params, quad),
        NormKind::GradLp => {
            let p = params.p;
            let domain = Domain::whole_space(scale_decay(f.grad_decay(), p), kinks);
            integrate(
                |r| Ok(f.eval_derivs(r, 1)?[1].abs().powf(p)),
                &domain,
                params,
                quad,
            )
        }
        NormKind::Weighted { v, w_exp, q } => {
            let decay = match (v.decay(), f.decay()) {
                (_, Decay::Compact(r)) => Decay::Compact(r),
                (Decay::Power(a), Decay::Power(b)) => Decay::Power(w_exp * a + q * b),
                _ => Decay::Unknown,
            };
            let mut kinks = kinks;
            kinks.extend(v.kinks());
            integrate(
                |r| {
                    let t = f.value(r)?;
                    if t == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(v.value(r)?.powf(*w_exp) * t.abs().powf(*q))
                },
                &Domain::whole_space(decay, kinks),
                params,
                quad,
            )
        }
    }
}

/// The norm itself: the q-th root of [`norm_integral`] for the Lebesgue
/// kinds, the bare integral for the weighted kind.
pub fn norm(f: &RadialField, kind: &NormKind, params: &Params, quad: &QuadConfig) -> Result<f64> {
    let integral = norm_integral(f, kind, params, quad)?.value.max(0.0);
    Ok(match kind {
        NormKind::Lp(q) => integral.powf(1.0 / q),
        NormKind::LpStar => integral.powf(1.0 / params.p_star),
        NormKind::GradLp => integral.powf(1.0 / params.p),
        NormKind::Weighted { .. } => integral,
    })
}

/// Average of a radial density over the centred ball of radius t.
pub fn ball_mean<F>(
    f: F,
    t: f64,
    kinks: Vec<f64>,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t > 0.0) {
        return Err(LabError::Domain(format!(
            "ball radius {t} must be positive"
        )));
    }
    let total = integrate(f, &Domain::ball(t, kinks), params, quad)?.value;
    let volume = params.surface_measure() * t.powf(params.dim()) / params.dim();
    Ok(total / volume)
}

pub fn field_ball_mean(f: &RadialField, t: f64, params: &Params, quad: &QuadConfig) -> Result<f64> {
    ball_mean(|r| f.value(r), t, f.kinks(), params, quad)
}
