//! Pointwise check of the divergence identity for
//!
//!   𝖯 = n(p-1) 𝒱(∇w)/w + c/w,   𝒱(ξ) = |ξ|^p / p,   𝖠 = D²𝒱(∇w),
//!
//! namely
//!
//!   div(w^{2-n} 𝖠∇𝖯) = w^{1-n} { -n⟨𝖠∇𝖯, ∇w⟩ - 𝖯 tr𝒲
//!       + n(p-1)[tr𝒲² + ⟨∇tr𝒲, a(∇w)⟩] - 𝖯 w_j ∂³_{ijk}𝒱(∇w) w_{ki} },
//!
//! with a = ∇𝒱 and 𝒲 = ∇(a(∇w)). The left side is the divergence of the
//! radial flux, taken by one central difference; the right side is
//! assembled from Cartesian tensors at the point r e₁. The identity holds
//! for every constant c, which matters when p ≥ n and (p/(n-p))^{p-1} is
//! not available.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::RadialField;
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentitySetup {
    pub dim: usize,
    pub potential_p: f64,
    /// Coefficient c of the 1/w term of 𝖯.
    pub zeroth_coeff: f64,
    /// Step of the outer central difference.
    pub h: f64,
    /// Radii with |∇w| below this are refused.
    pub min_gradient: f64,
}

impl IdentitySetup {
    pub fn new(dim: usize, potential_p: f64, zeroth_coeff: f64) -> Self {
        Self {
            dim,
            potential_p,
            zeroth_coeff,
            h: 1e-4,
            min_gradient: 0.1,
        }
    }

    /// The P-function normalisation of a critical problem.
    pub fn from_params(params: &Params) -> Self {
        Self::new(params.n, params.p, params.p_function_constant())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Largest of |lhs| and the sum of the magnitudes of the right-hand terms.
    pub scale: f64,
    pub relative: f64,
}

struct Local {
    w0: f64,
    s: f64,
    big_p: f64,
    dp: f64,
}

fn local(w: &RadialField, setup: &IdentitySetup, r: f64) -> Result<(Local, [f64; 4])> {
    let d = w.eval_derivs(r, 3)?;
    let (w0, s, w2) = (d[0], d[1], d[2]);
    if w0 <= 0.0 {
        return Err(LabError::NonPositive {
            what: "w",
            r,
            value: w0,
        });
    }
    if s.abs() < setup.min_gradient {
        return Err(LabError::DegeneratePoint {
            r,
            what: "gradient below the identity check threshold",
        });
    }
    let p = setup.potential_p;
    let n = setup.dim as f64;
    let big_p = (n * (p - 1.0) / p * s.abs().powf(p) + setup.zeroth_coeff) / w0;
    let dp = n * (p - 1.0) * s.abs().powf(p - 2.0) * s * w2 / w0 - big_p * s / w0;
    Ok((Local { w0, s, big_p, dp }, [d[0], d[1], d[2], d[3]]))
}

fn flux(w: &RadialField, setup: &IdentitySetup, r: f64) -> Result<f64> {
    let (l, _) = local(w, setup, r)?;
    let p = setup.potential_p;
    let n = setup.dim as f64;
    Ok(l.w0.powf(2.0 - n) * (p - 1.0) * l.s.abs().powf(p - 2.0) * l.dp)
}

pub fn identity_residual(
    w: &RadialField,
    setup: &IdentitySetup,
    r: f64,
) -> Result<IdentityResidual> {
    let p = setup.potential_p;
    let dim = setup.dim;
    let n = dim as f64;
    let h = setup.h;
    if !(r > h) {
        return Err(LabError::Domain(format!(
            "identity check needs r > h = {h}, got {r}"
        )));
    }

    let weighted = |x: f64| -> Result<f64> { Ok(x.powf(n - 1.0) * flux(w, setup, x)?) };
    let lhs = (weighted(r + h)? - weighted(r - h)?) / (2.0 * h * r.powf(n - 1.0));

    let (l, d) = local(w, setup, r)?;
    let (w1, w2, w3) = (d[1], d[2], d[3]);
    let s = l.s;
    let abs_s = s.abs();

    let mut xi = DMatrix::<f64>::zeros(dim, 1);
    xi[(0, 0)] = s;
    let mut hess = DMatrix::<f64>::identity(dim, dim) * (w1 / r);
    hess[(0, 0)] = w2;
    let a_mat = (DMatrix::<f64>::identity(dim, dim) + &xi * xi.transpose() * ((p - 2.0) / (s * s)))
        * abs_s.powf(p - 2.0);
    let a_vec = &xi * abs_s.powf(p - 2.0);
    let w_mat = &a_mat * &hess;
    let mut grad_p = DMatrix::<f64>::zeros(dim, 1);
    grad_p[(0, 0)] = l.dp;

    let tr_w = w_mat.trace();
    let tr_w2 = (&w_mat * &w_mat).trace();
    let d_tr_w = (p - 1.0) * (p - 2.0) * abs_s.powf(p - 4.0) * s * w2 * w2
        + (p - 1.0) * abs_s.powf(p - 2.0) * w3
        + (n - 1.0)
            * ((p - 1.0) * abs_s.powf(p - 2.0) * w2 / r - abs_s.powf(p - 2.0) * s / (r * r));

    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let third = |i: usize, j: usize, k: usize| {
        (p - 2.0)
            * abs_s.powf(p - 4.0)
            * (xi[k] * delta(i, j) + xi[i] * delta(j, k) + xi[j] * delta(i, k))
            + (p - 2.0) * (p - 4.0) * abs_s.powf(p - 6.0) * xi[i] * xi[j] * xi[k]
    };
    let mut contraction = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                contraction += xi[j] * third(i, j, k) * hess[(k, i)];
            }
        }
    }

    let terms = [
        -n * (&a_mat * &grad_p).dot(&xi),
        -l.big_p * tr_w,
        n * (p - 1.0) * tr_w2,
        n * (p - 1.0) * d_tr_w * a_vec[0],
        -l.big_p * contraction,
    ];
    let weight = l.w0.powf(1.0 - n);
    let rhs = weight * terms.iter().sum::<f64>();
    let scale = lhs
        .abs()
        .max(weight * terms.iter().map(|t| t.abs()).sum::<f64>());
    Ok(IdentityResidual {
        r,
        lhs,
        rhs,
        scale,
        relative: if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfunction::v_of_u;

    #[test]
    fn paraboloid_in_three_dimensions() {
        let w = RadialField::power_law(1.0, 1.0, 2.0);
        let setup = IdentitySetup::from_params(&Params::new(3, 2.0).unwrap());
        // both sides vanish at r = 1 for this profile
        let res = identity_residual(&w, &setup, 1.0).unwrap();
        assert!(res.relative < 1e-5, "{res:?}");
        let res = identity_residual(&w, &setup, 0.5).unwrap();
        assert!(res.relative < 1e-5, "{res:?}");
        assert!(res.lhs.abs() > 1e-3, "{res:?}");
    }

    #[test]
    fn degenerate_exponent_with_explicit_constant() {
        let w = RadialField::power_law(1.0, 1.0, 2.0);
        let setup = IdentitySetup::new(4, 4.0, 1.0);
        for &r in &[0.5, 1.0, 2.0] {
            let res = identity_residual(&w, &setup, r).unwrap();
            assert!(res.relative < 1e-5, "{res:?}");
        }
    }

    #[test]
    fn bubble_v_balances() {
        let params = Params::new(4, 2.0).unwrap();
        let v = v_of_u(&RadialField::bubble(&params, 1.0), &params).unwrap();
        let setup = IdentitySetup::from_params(&params);
        let res = identity_residual(&v.v, &setup, 1.5).unwrap();
        assert!(res.relative < 1e-5, "{res:?}");
    }

    #[test]
    fn cubic_profile_with_degenerate_exponent() {
        let w = RadialField::power_law(1.0, 0.5, 3.0);
        let setup = IdentitySetup::new(3, 3.0, 0.7);
        for &r in &[0.6, 1.2, 2.5] {
            let res = identity_residual(&w, &setup, r).unwrap();
            assert!(res.relative < 1e-5, "{res:?}");
        }
    }

    #[test]
    fn flat_gradient_is_refused() {
        let w = RadialField::power_law(1.0, 1.0, 2.0);
        let setup = IdentitySetup::new(3, 2.0, 1.0);
        assert!(matches!(
            identity_residual(&w, &setup, 0.01),
            Err(LabError::DegeneratePoint { .. }) | Err(LabError::Domain(_))
        ));
    }
}
