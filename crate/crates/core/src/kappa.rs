//! Coefficients of the perturbed critical equation -Δ_p u = κ u^{p*-1}.

use crate::error::{LabError, Result};
use crate::field::{p_laplacian, Decay, RadialField};
use crate::params::Params;

#[derive(Debug, Clone)]
pub enum KappaField {
    /// An explicit coefficient.
    Closed(RadialField),
    /// κ = -Δ_p u / u^{p*-1}, recomputed at every evaluation, so `u`
    /// solves the equation exactly.
    Induced { u: RadialField, params: Params },
}

impl KappaField {
    pub fn constant(c: f64) -> Self {
        KappaField::Closed(RadialField::constant(c))
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        match self {
            KappaField::Closed(f) => f.value(r),
            KappaField::Induced { u, params } => {
                let lap = p_laplacian(u, params, r)?;
                let base = u.value(r)?;
                if base <= 0.0 {
                    return Err(LabError::NonPositive {
                        what: "u in the induced coefficient",
                        r,
                        value: base,
                    });
                }
                Ok(-lap / base.powf(params.p_star - 1.0))
            }
        }
    }

    /// The coefficient paired with T_{0,lambda} u, namely r -> κ(lambda r).
    pub fn transform(&self, params: &Params, lambda: f64) -> Self {
        match self {
            KappaField::Closed(f) => KappaField::Closed(f.dilate(lambda)),
            KappaField::Induced { u, params: own } => KappaField::Induced {
                u: u.dilate(lambda)
                    .scale(lambda.powf(params.scaling_exponent())),
                params: *own,
            },
        }
    }

    pub fn decay(&self) -> Decay {
        match self {
            KappaField::Closed(f) => f.decay(),
            KappaField::Induced { .. } => Decay::Unknown,
        }
    }

    pub fn kinks(&self) -> Vec<f64> {
        match self {
            KappaField::Closed(f) => f.kinks(),
            KappaField::Induced { u, .. } => u.kinks(),
        }
    }

    /// Fails with the first sampled radius where κ is not positive.
    pub fn check_positive(&self, radii: &[f64]) -> Result<()> {
        for &r in radii {
            let k = self.value(r)?;
            if !(k > 0.0) {
                return Err(LabError::NonPositive {
                    what: "kappa",
                    r,
                    value: k,
                });
            }
        }
        Ok(())
    }
}

/// `count` points spaced evenly in log r over [lo, hi].
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// κ = -Δ_p u / u^{p*-1}, checked for positivity on a log grid.
pub fn induced_kappa(u: &RadialField, params: &Params) -> Result<KappaField> {
    if !u.is_positive() {
        return Err(LabError::Domain(format!(
            "induced coefficient needs u > 0, got {u}"
        )));
    }
    let kappa = KappaField::Induced {
        u: u.clone(),
        params: *params,
    };
    let mut radii = log_grid(1e-3, 1e3, 64);
    radii.extend(u.kinks().iter().map(|k| k * (1.0 - 1e-6)));
    kappa.check_positive(&radii)?;
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_induces_unit_coefficient() {
        for &(n, p) in &[(4usize, 2.0), (5, 2.0), (4, 3.0), (3, 1.5)] {
            let params = Params::new(n, p).unwrap();
            let u = RadialField::bubble(&params, 0.8);
            let k = induced_kappa(&u, &params).unwrap();
            for r in log_grid(1e-2, 1e2, 17) {
                let k = k.value(r).unwrap();
                // far out the two terms of the operator nearly cancel
                assert!((k - 1.0).abs() < 1e-9, "n={n} p={p} r={r} k={k}");
            }
        }
    }

    #[test]
    fn scaled_bubble_induces_power_of_scale() {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0).scale(2.0);
        let k = induced_kappa(&u, &params).unwrap();
        // c^{p-1} / c^{p*-1} = c^{-2}
        assert!((k.value(0.7).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn transformed_coefficient_is_dilated() {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0).add(&RadialField::bump(1.0).scale(0.05));
        let k = induced_kappa(&u, &params).unwrap();
        let kt = k.transform(&params, 3.0);
        for &r in &[0.05, 0.2, 0.31] {
            let a = kt.value(r).unwrap();
            let b = k.value(3.0 * r).unwrap();
            assert!((a - b).abs() < 1e-12 * b.abs());
        }
    }

    #[test]
    fn rejects_sign_changing_u() {
        let params = Params::new(4, 2.0).unwrap();
        assert!(induced_kappa(&RadialField::bump(1.0), &params).is_err());
    }
}
