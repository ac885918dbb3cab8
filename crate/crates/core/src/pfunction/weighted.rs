//! Weighted integrals of the traceless stress and of ∇P, which vanish
//! exactly on bubbles and are controlled by the deficit otherwise.

use serde::{Deserialize, Serialize};

use crate::deficit::deficit_cfm;
use crate::error::{LabError, Result};
use crate::field::{Decay, RadialField};
use crate::kappa::KappaField;
use crate::norms::ball_mean;
use crate::params::Params;
use crate::quad::{integrate, Domain, QuadConfig};

use super::{grad_p, p_function, v_of_u, w_components, VField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedConfig {
    /// Power t ≥ 1 of P in the weighted integrals.
    pub t_exp: f64,
    /// Radius of the ball for the distance of W to a multiple of Id.
    pub r_ball: f64,
    /// Radius of the ball over which P is averaged.
    pub mean_radius: f64,
}

impl Default for WeightedConfig {
    fn default() -> Self {
        Self {
            t_exp: 1.0,
            r_ball: 2.0,
            mean_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedReport {
    /// ∫ v^{-n} |W̊|²
    pub traceless: f64,
    /// ∫ v^{1-n} |W̊|² P^t
    pub traceless_weighted: f64,
    /// ∫ v^{2-n} |∇v|^{p-2} P^{t-1} |∇P|²
    pub gradient: f64,
    /// Mean of P over the ball of radius `mean_radius`.
    pub p_bar: f64,
    /// ∫_{B_r} v^{-n} |W - (P̄/n) Id| and the same with the square.
    pub dist_q1: f64,
    pub dist_q2: f64,
    pub deficit: f64,
    /// traceless / 𝔡
    pub ratio_traceless: f64,
    /// (traceless_weighted + gradient) / 𝔡
    pub ratio_weighted: f64,
    /// dist_q1 / 𝔡^{1/2} and dist_q2 / 𝔡
    pub ratio_q1: f64,
    pub ratio_q2: f64,
}

fn whole(u: &RadialField) -> Domain {
    Domain::whole_space(Decay::Unknown, u.kinks())
}

pub fn weighted_diagnostics(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
    cfg: &WeightedConfig,
) -> Result<WeightedReport> {
    if !(cfg.t_exp >= 1.0) {
        return Err(LabError::Domain(format!(
            "t_exp = {} must be at least 1",
            cfg.t_exp
        )));
    }
    let v = v_of_u(u, params)?;
    let n = params.dim();
    let p = params.p;
    let t = cfg.t_exp;
    let vv = |r: f64| v.v.value(r);

    let traceless = integrate(
        |r| Ok(vv(r)?.powf(-n) * w_components(&v, params, r)?.ring_norm2),
        &whole(u),
        params,
        quad,
    )?
    .value;
    let traceless_weighted = integrate(
        |r| {
            let ring = w_components(&v, params, r)?.ring_norm2;
            if ring == 0.0 {
                return Ok(0.0);
            }
            Ok(vv(r)?.powf(1.0 - n) * ring * p_function(&v, params, r)?.powf(t))
        },
        &whole(u),
        params,
        quad,
    )?
    .value;
    let gradient = integrate(
        |r| {
            let g = grad_p(&v, params, r)?.via_w;
            if g == 0.0 {
                return Ok(0.0);
            }
            let d = v.v.eval_derivs(r, 1)?;
            Ok(d[0].powf(2.0 - n)
                * d[1].abs().powf(p - 2.0)
                * p_function(&v, params, r)?.powf(t - 1.0)
                * g
                * g)
        },
        &whole(u),
        params,
        quad,
    )?
    .value;

    let p_bar = ball_mean(
        |r| p_function(&v, params, r),
        cfg.mean_radius,
        u.kinks(),
        params,
        quad,
    )?;
    let dist =
        |q: f64| -> Result<f64> { distance_to_identity(&v, params, quad, p_bar, cfg.r_ball, q) };
    let dist_q1 = dist(1.0)?;
    let dist_q2 = dist(2.0)?;

    let deficit = deficit_cfm(u, kappa, params, quad)?;
    Ok(WeightedReport {
        traceless,
        traceless_weighted,
        gradient,
        p_bar,
        dist_q1,
        dist_q2,
        deficit,
        ratio_traceless: traceless / deficit,
        ratio_weighted: (traceless_weighted + gradient) / deficit,
        ratio_q1: dist_q1 / deficit.sqrt(),
        ratio_q2: dist_q2 / deficit,
    })
}

/// ∫_{B_r} v^{-n} |W - (P̄/n) Id|^q.
pub fn distance_to_identity(
    v: &VField,
    params: &Params,
    quad: &QuadConfig,
    p_bar: f64,
    r_ball: f64,
    q: f64,
) -> Result<f64> {
    let n = params.dim();
    let mu = p_bar / n;
    Ok(integrate(
        |r| {
            let w = w_components(v, params, r)?;
            Ok(v.v.value(r)?.powf(-n) * w.dist2_to_multiple_of_identity(mu, n).powf(q / 2.0))
        },
        &Domain::ball(r_ball, v.v.kinks()),
        params,
        quad,
    )?
    .value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kappa::induced_kappa;

    #[test]
    fn bubbles_give_zero() {
        for &(n, p) in &[(4usize, 2.0), (4, 3.0)] {
            let params = Params::new(n, p).unwrap();
            let quad = QuadConfig::default();
            let u = RadialField::bubble(&params, 1.0);
            let rep = weighted_diagnostics(
                &u,
                &KappaField::constant(1.0),
                &params,
                &quad,
                &WeightedConfig::default(),
            )
            .unwrap();
            assert!(rep.traceless <= quad.abs_tol, "{rep:?}");
            assert!(rep.traceless_weighted <= quad.abs_tol, "{rep:?}");
            assert!(rep.gradient <= quad.abs_tol, "{rep:?}");
        }
    }

    #[test]
    fn perturbation_is_detected() {
        let params = Params::new(4, 2.0).unwrap();
        let quad = QuadConfig::default();
        let u = RadialField::bubble(&params, 1.0).add(&RadialField::bump(1.0).scale(1e-2));
        let kappa = induced_kappa(&u, &params).unwrap();
        let rep =
            weighted_diagnostics(&u, &kappa, &params, &quad, &WeightedConfig::default()).unwrap();
        assert!(rep.traceless > 1e-8 && rep.gradient > 1e-8);
        assert!(rep.dist_q1 > 0.0 && rep.dist_q2 > 0.0);
        assert!(rep.deficit > 0.0);
    }
}
