//! The substitution v = u^{-p/(n-p)}, the P-function, the stress tensor
//! W = ∇(|∇v|^{p-2}∇v) in radial coordinates, and checks built on them.

pub mod identity;
pub mod matrix;
pub mod weighted;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{stress, RadialField};
use crate::kappa::KappaField;
use crate::params::Params;

pub use identity::{identity_residual, IdentityResidual, IdentitySetup};
pub use matrix::{c_of_rho, matrix_inequality_check, MatrixReport};
pub use weighted::{weighted_diagnostics, WeightedConfig, WeightedReport};

#[derive(Debug, Clone)]
pub struct VField {
    pub v: RadialField,
    pub u: RadialField,
}

/// v = u^{-p/(n-p)}.
pub fn v_of_u(u: &RadialField, params: &Params) -> Result<VField> {
    if !u.is_positive() {
        return Err(LabError::NonPositive {
            what: "u in the v-substitution",
            r: f64::NAN,
            value: f64::NAN,
        });
    }
    Ok(VField {
        v: u.powf(-1.0 / params.scaling_exponent())?,
        u: u.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValues {
    pub p: f64,
    pub remainder: f64,
}

fn v_derivs(v: &VField, r: f64, order: usize) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(LabError::DegeneratePoint {
            r,
            what: "P-function quantities are evaluated for r > 0 only",
        });
    }
    v.v.eval_derivs(r, order)
}

/// P = n((p-1)/p) |v'|^p / v + (p/(n-p))^{p-1} / v.
pub fn p_function(v: &VField, params: &Params, r: f64) -> Result<f64> {
    let d = v_derivs(v, r, 1)?;
    Ok(p_from_derivs(d[0], d[1], params))
}

fn p_from_derivs(v: f64, v1: f64, params: &Params) -> f64 {
    let p = params.p;
    let k1 = params.dim() * (p - 1.0) / p;
    (k1 * v1.abs().powf(p) + params.p_function_constant()) / v
}

/// P and the remainder R = (p/(n-p))^{p-1} (κ - 1) / v.
pub fn p_and_remainder(v: &VField, kappa: &KappaField, params: &Params, r: f64) -> Result<PValues> {
    let d = v_derivs(v, r, 1)?;
    let k = kappa.value(r)?;
    Ok(PValues {
        p: p_from_derivs(d[0], d[1], params),
        remainder: params.p_function_constant() * (k - 1.0) / d[0],
    })
}

/// Eigenvalues of W for a radial v: radial `mu_r` and tangential `mu_t`
/// (multiplicity n - 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WComponents {
    pub mu_r: f64,
    pub mu_t: f64,
    pub tr_w: f64,
    /// |W̊|² = |W|² - (tr W)²/n.
    pub ring_norm2: f64,
}

impl WComponents {
    pub fn norm2(&self, n: f64) -> f64 {
        self.mu_r * self.mu_r + (n - 1.0) * self.mu_t * self.mu_t
    }

    /// |W - μ Id|² in the Frobenius norm.
    pub fn dist2_to_multiple_of_identity(&self, mu: f64, n: f64) -> f64 {
        resolved_difference(self.mu_r, mu).powi(2)
            + (n - 1.0) * resolved_difference(self.mu_t, mu).powi(2)
    }
}

pub fn w_components(v: &VField, params: &Params, r: f64) -> Result<WComponents> {
    let d = v_derivs(v, r, 2)?;
    w_from_derivs(d[1], d[2], params, r)
}

/// a - b, or zero when the two agree to within rounding. Keeps rounding
/// noise out of integrals of quantities that vanish on bubbles.
fn resolved_difference(a: f64, b: f64) -> f64 {
    const ULPS: f64 = 64.0;
    let d = a - b;
    if d.abs() <= ULPS * f64::EPSILON * (a.abs() + b.abs()) {
        0.0
    } else {
        d
    }
}

fn w_from_derivs(v1: f64, v2: f64, params: &Params, r: f64) -> Result<WComponents> {
    if v1 == 0.0 {
        return Err(LabError::DegeneratePoint {
            r,
            what: "critical point of v",
        });
    }
    let p = params.p;
    let n = params.dim();
    let mu_r = (p - 1.0) * v1.abs().powf(p - 2.0) * v2;
    let mu_t = stress(v1, p) / r;
    Ok(WComponents {
        mu_r,
        mu_t,
        tr_w: mu_r + (n - 1.0) * mu_t,
        ring_norm2: (n - 1.0) / n * resolved_difference(mu_r, mu_t).powi(2),
    })
}

/// P' in two ways: through the stress tensor, (n/v)(mu_r - P/n) v', and
/// by differentiating the definition of P directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradP {
    pub via_w: f64,
    pub direct: f64,
}

pub fn grad_p(v: &VField, params: &Params, r: f64) -> Result<GradP> {
    let d = v_derivs(v, r, 2)?;
    let (v0, v1, v2) = (d[0], d[1], d[2]);
    let p = params.p;
    let n = params.dim();
    let big_p = p_from_derivs(v0, v1, params);
    let w = w_from_derivs(v1, v2, params, r)?;
    let k1 = n * (p - 1.0) / p;
    let direct = k1 * (-v1 * v1.abs().powf(p) / (v0 * v0) + p * stress(v1, p) * v2 / v0)
        - params.p_function_constant() * v1 / (v0 * v0);
    Ok(GradP {
        via_w: n / v0 * resolved_difference(w.mu_r, big_p / n) * v1,
        direct,
    })
}

/// Constant of the matrix inequalities for the ellipticity ratio of the
/// p-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpConstant {
    pub rho_p: f64,
    pub c_p: f64,
}

/// ρ = (p-1)^{sgn(2-p)}, c = (1-ρ)²/(1+ρ²).
pub fn c_p(p: f64) -> CpConstant {
    let rho_p = if p == 2.0 {
        1.0
    } else if p < 2.0 {
        p - 1.0
    } else {
        1.0 / (p - 1.0)
    };
    CpConstant {
        rho_p,
        c_p: c_of_rho(rho_p),
    }
}
