//! Empirical decay envelopes of a positive radial field:
//!
//!   c₀ ≤ u (1 + r^{(n-p)/(p-1)}) ≤ C₀,   |u'| (1 + r^{(n-1)/(p-1)}) ≤ C₁,
//!
//! and the matching two-sided bound ĉ₀ ≤ v / (1 + r^{p/(p-1)}) ≤ Ĉ₀ for
//! v = u^{-p/(n-p)}. Constants are read off a fitting grid with a safety
//! margin and then validated on a denser, shifted grid.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{Decay, RadialField};
use crate::kappa::log_grid;
use crate::params::Params;

const FIT_POINTS: usize = 200;
const VALIDATION_POINTS: usize = 997;
const MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub c0: f64,
    pub big_c0: f64,
    pub c1: f64,
    /// Bounds for v / (1 + r^{p/(p-1)}).
    pub v_lo: f64,
    pub v_hi: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Points of the validation grid outside any fitted envelope.
    pub violations: usize,
}

impl Envelope {
    /// Radius of the ball that must contain the maximum point of u,
    /// ((Ĉ₀ - ĉ₀)/ĉ₀)^{(p-1)/p}.
    pub fn peak_radius(&self, params: &Params) -> f64 {
        ((self.v_hi - self.v_lo) / self.v_lo)
            .max(0.0)
            .powf((params.p - 1.0) / params.p)
    }
}

struct Samples {
    u: Vec<f64>,
    grad: Vec<f64>,
    v: Vec<f64>,
}

fn sample(u: &RadialField, params: &Params, radii: &[f64]) -> Result<Samples> {
    let gu = params.decay_u();
    let gg = params.decay_grad();
    let q = params.p_conj;
    let inv_m = 1.0 / params.scaling_exponent();
    let mut s = Samples {
        u: Vec::with_capacity(radii.len()),
        grad: Vec::with_capacity(radii.len()),
        v: Vec::with_capacity(radii.len()),
    };
    for &r in radii {
        let d = u.eval_derivs(r, 1)?;
        if !(d[0] > 0.0) {
            return Err(LabError::NonPositive {
                what: "u in the decay envelope",
                r,
                value: d[0],
            });
        }
        s.u.push(d[0] * (1.0 + r.powf(gu)));
        s.grad.push(d[1].abs() * (1.0 + r.powf(gg)));
        s.v.push(d[0].powf(-inv_m) / (1.0 + r.powf(q)));
    }
    Ok(s)
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        })
}

/// Fit the envelopes over r in [1e-2, 1e3].
pub fn decay_envelope(u: &RadialField, params: &Params) -> Result<Envelope> {
    let (r_min, r_max) = (1e-2, 1e3);
    match u.decay() {
        Decay::Power(g) if g <= 0.0 => {
            return Err(LabError::NonDecaying(format!("{u} decays like r^-{g}")));
        }
        _ => {}
    }
    let fit = sample(u, params, &log_grid(r_min, r_max, FIT_POINTS))?;
    let (lo_u, hi_u) = min_max(&fit.u);
    let (_, hi_g) = min_max(&fit.grad);
    let (lo_v, hi_v) = min_max(&fit.v);
    // A field that does not decay at the expected rate makes the weighted
    // product sweep over many orders of magnitude.
    if hi_u / lo_u > 1e6 {
        return Err(LabError::NonDecaying(format!(
            "u (1 + r^{}) ranges over [{lo_u:e}, {hi_u:e}]",
            params.decay_u()
        )));
    }
    let env = Envelope {
        c0: lo_u * (1.0 - MARGIN),
        big_c0: hi_u * (1.0 + MARGIN),
        c1: hi_g * (1.0 + MARGIN),
        v_lo: lo_v * (1.0 - MARGIN),
        v_hi: hi_v * (1.0 + MARGIN),
        r_min,
        r_max,
        violations: 0,
    };
    let check = sample(
        u,
        params,
        &log_grid(r_min * 1.003, r_max * 0.997, VALIDATION_POINTS),
    )?;
    let violations = (0..VALIDATION_POINTS)
        .filter(|&i| {
            check.u[i] < env.c0
                || check.u[i] > env.big_c0
                || check.grad[i] > env.c1
                || check.v[i] < env.v_lo
                || check.v[i] > env.v_hi
        })
        .count();
    Ok(Envelope { violations, ..env })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_envelope() {
        for &(n, p) in &[(4usize, 2.0), (5, 2.0), (4, 3.0)] {
            let params = Params::new(n, p).unwrap();
            let env = decay_envelope(&RadialField::bubble(&params, 1.0), &params).unwrap();
            assert!(env.big_c0 / env.c0 < 10.0, "{env:?}");
            assert_eq!(env.violations, 0);
            assert!(env.c1.is_finite() && env.c1 > 0.0);
        }
    }

    #[test]
    fn perturbed_bubble_stays_close() {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0);
        let base = decay_envelope(&u, &params).unwrap();
        let ue = u.add(&RadialField::bump(1.0).scale(1e-2));
        let env = decay_envelope(&ue, &params).unwrap();
        for (a, b) in [
            (env.c0, base.c0),
            (env.big_c0, base.big_c0),
            (env.c1, base.c1),
        ] {
            assert!(a / b < 2.0 && b / a < 2.0);
        }
        assert_eq!(env.violations, 0);
    }

    #[test]
    fn constant_is_rejected() {
        let params = Params::new(4, 2.0).unwrap();
        assert!(matches!(
            decay_envelope(&RadialField::constant(1.0), &params),
            Err(LabError::NonDecaying(_))
        ));
    }
}
