//! Deficit functionals of a positive solution of -Δ_p u = κ u^{p*-1}.

use serde::Serialize;

use crate::bubble::SobolevLevel;
use crate::error::{LabError, Result};
use crate::field::{Decay, RadialField};
use crate::kappa::KappaField;
use crate::norms::{norm_integral, NormKind};
use crate::params::Params;
use crate::quad::{integrate, Domain, QuadConfig};

/// Both expressions for κ₀: the κ-weighted mass quotient and the energy
/// quotient. They coincide when u solves the equation for κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa0Quotients {
    pub weighted: f64,
    pub energy_quotient: f64,
    /// ∫ u^{p*}
    pub mass: f64,
    /// ∫ |∇u|^p
    pub energy: f64,
}

impl Kappa0Quotients {
    pub fn relative_gap(&self) -> f64 {
        (self.weighted - self.energy_quotient).abs() / self.weighted.abs()
    }
}

// Integrands carrying κ u^{p*}: κ is bounded, so they decay like u^{p*}.
fn mass_domain(u: &RadialField, kappa: &KappaField, params: &Params) -> Domain {
    let decay = match u.decay() {
        Decay::Power(g) => Decay::Power(params.p_star * g),
        d => d,
    };
    let mut kinks = u.kinks();
    kinks.extend(kappa.kinks());
    Domain::whole_space(decay, kinks)
}

pub fn kappa0_quotients(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<Kappa0Quotients> {
    let ps = params.p_star;
    let mass = norm_integral(u, &NormKind::LpStar, params, quad)?.value;
    if !(mass > 0.0) {
        return Err(LabError::ZeroDenominator("kappa0: u vanishes identically"));
    }
    let weighted = integrate(
        |r| {
            let uv = u.value(r)?;
            if uv == 0.0 {
                return Ok(0.0);
            }
            Ok(kappa.value(r)? * uv.abs().powf(ps))
        },
        &mass_domain(u, kappa, params),
        params,
        quad,
    )?
    .value;
    let energy = norm_integral(u, &NormKind::GradLp, params, quad)?.value;
    Ok(Kappa0Quotients {
        weighted: weighted / mass,
        energy_quotient: energy / mass,
        mass,
        energy,
    })
}

/// κ₀ = ∫ κ u^{p*} / ∫ u^{p*}.
pub fn kappa0(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64> {
    Ok(kappa0_quotients(u, kappa, params, quad)?.weighted)
}

/// ‖(κ - κ₀) u^{p*-1}‖ in L^{(p*)'}, given κ₀.
pub fn deficit_cfm_with(
    u: &RadialField,
    kappa: &KappaField,
    k0: f64,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64> {
    let ps = params.p_star;
    let q = params.p_star_conj;
    let integral = integrate(
        |r| {
            let uv = u.value(r)?;
            if uv == 0.0 {
                return Ok(0.0);
            }
            Ok((kappa.value(r)? - k0).abs().powf(q) * uv.abs().powf(ps))
        },
        &mass_domain(u, kappa, params),
        params,
        quad,
    )?;
    Ok(integral.value.max(0.0).powf(1.0 / q))
}

pub fn deficit_cfm(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64> {
    let k0 = kappa0(u, kappa, params, quad)?;
    deficit_cfm_with(u, kappa, k0, params, quad)
}

/// ‖∇u‖_p / ‖u‖_{p*} - S. Not clamped: rounding can make it slightly
/// negative at a minimiser.
pub fn sobolev_deficit(
    u: &RadialField,
    level: &SobolevLevel,
    params: &Params,
    quad: &QuadConfig,
) -> Result<f64> {
    let energy = norm_integral(u, &NormKind::GradLp, params, quad)?.value;
    let mass = norm_integral(u, &NormKind::LpStar, params, quad)?.value;
    if !(mass > 0.0) {
        return Err(LabError::ZeroDenominator(
            "Sobolev quotient: zero L^{p*} norm",
        ));
    }
    Ok(energy.powf(1.0 / params.p) / mass.powf(1.0 / params.p_star) - level.s)
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub w: RadialField,
    pub kappa_hat: KappaField,
    pub k0: f64,
}

/// Rescale to κ₀ = 1: w = κ₀^{1/(p*-p)} u and κ̂ = κ/κ₀.
pub fn normalize(
    u: &RadialField,
    kappa: &KappaField,
    params: &Params,
    quad: &QuadConfig,
) -> Result<Normalized> {
    let k0 = kappa0(u, kappa, params, quad)?;
    if !(k0 > 0.0) {
        return Err(LabError::NonPositive {
            what: "kappa0",
            r: f64::NAN,
            value: k0,
        });
    }
    let w = u.scale(k0.powf(1.0 / (params.p_star - params.p)));
    let kappa_hat = match kappa {
        KappaField::Closed(f) => KappaField::Closed(f.scale(1.0 / k0)),
        KappaField::Induced { params: own, .. } => KappaField::Induced {
            u: w.clone(),
            params: *own,
        },
    };
    Ok(Normalized { w, kappa_hat, k0 })
}

/// Whether ½ S^n ≤ ∫|∇u|^p ≤ 3/2 S^n, optionally with S^n scaled by
/// κ₀^{p/(p-p*)}.
pub fn energy_window(energy: f64, s_pow_n: f64, k0: Option<f64>, params: &Params) -> bool {
    let scale = k0.map_or(1.0, |k| k.powf(params.p / (params.p - params.p_star)));
    let level = scale * s_pow_n;
    0.5 * level <= energy && energy <= 1.5 * level
}

#[derive(Debug, Clone, Serialize)]
pub struct DeficitReport {
    pub kappa0: f64,
    pub kappa0_energy: f64,
    pub kappa0_gap: f64,
    pub deficit_cfm: f64,
    pub sobolev_deficit: f64,
    pub energy: f64,
    pub mass: f64,
    pub in_energy_window: bool,
    pub in_scaled_energy_window: bool,
    pub quad_id: String,
}

pub fn deficit_report(
    u: &RadialField,
    kappa: &KappaField,
    level: &SobolevLevel,
    params: &Params,
    quad: &QuadConfig,
) -> Result<DeficitReport> {
    let quotients = kappa0_quotients(u, kappa, params, quad)?;
    let k0 = quotients.weighted;
    Ok(DeficitReport {
        kappa0: k0,
        kappa0_energy: quotients.energy_quotient,
        kappa0_gap: quotients.relative_gap(),
        deficit_cfm: deficit_cfm_with(u, kappa, k0, params, quad)?,
        sobolev_deficit: sobolev_deficit(u, level, params, quad)?,
        energy: quotients.energy,
        mass: quotients.mass,
        in_energy_window: energy_window(quotients.energy, level.s_pow_n, None, params),
        in_scaled_energy_window: energy_window(quotients.energy, level.s_pow_n, Some(k0), params),
        quad_id: quad.id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::sobolev_level;
    use crate::kappa::induced_kappa;

    fn setup() -> (Params, QuadConfig, RadialField) {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0);
        (params, QuadConfig::default(), u)
    }

    #[test]
    fn constant_coefficients() {
        let (params, quad, u) = setup();
        for &c in &[1.0, 2.0] {
            let k0 = kappa0(&u, &KappaField::constant(c), &params, &quad).unwrap();
            assert!((k0 - c).abs() < 1e-12);
        }
        let d = deficit_cfm(&u, &KappaField::constant(1.0), &params, &quad).unwrap();
        assert!(d < 1e-6);
    }

    #[test]
    fn trivial_u_is_rejected() {
        let (params, quad, _) = setup();
        let err = kappa0(
            &RadialField::zero(),
            &KappaField::constant(1.0),
            &params,
            &quad,
        );
        assert!(matches!(err, Err(LabError::ZeroDenominator(_))));
    }

    #[test]
    fn manufactured_quotients_agree() {
        let (params, quad, u) = setup();
        let ue = u.add(&RadialField::bump(1.0).scale(0.05));
        let kappa = induced_kappa(&ue, &params).unwrap();
        let q = kappa0_quotients(&ue, &kappa, &params, &quad).unwrap();
        assert!(q.relative_gap() < 1e-8, "gap {}", q.relative_gap());
        assert!(deficit_cfm(&ue, &kappa, &params, &quad).unwrap() > 1e-4);
    }

    #[test]
    fn normalisation() {
        let (params, quad, u) = setup();
        let n = normalize(&u, &KappaField::constant(2.0), &params, &quad).unwrap();
        assert!((n.k0 - 2.0).abs() < 1e-12);
        for &r in &[0.0, 0.5, 3.0] {
            let ratio = n.w.value(r).unwrap() / u.value(r).unwrap();
            assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
        }
        let again = kappa0(&n.w, &n.kappa_hat, &params, &quad).unwrap();
        assert!((again - 1.0).abs() < 1e-12);

        let ue = u.scale(1.3).add(&RadialField::bump(0.7).scale(0.1));
        let kappa = induced_kappa(&ue, &params).unwrap();
        let n = normalize(&ue, &kappa, &params, &quad).unwrap();
        let again = kappa0(&n.w, &n.kappa_hat, &params, &quad).unwrap();
        assert!((again - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bubble_report() {
        let (params, quad, u) = setup();
        let level = sobolev_level(&params, &quad).unwrap();
        let report =
            deficit_report(&u, &KappaField::constant(1.0), &level, &params, &quad).unwrap();
        assert!(report.sobolev_deficit.abs() < 1e-10);
        assert!(report.in_energy_window && report.in_scaled_energy_window);
        let big = u.scale(2.0);
        let report = deficit_report(
            &big,
            &induced_kappa(&big, &params).unwrap(),
            &level,
            &params,
            &quad,
        )
        .unwrap();
        // energy 4 S^n is outside the plain window but inside the scaled one
        assert!(!report.in_energy_window);
        assert!(report.in_scaled_energy_window);
    }
}
