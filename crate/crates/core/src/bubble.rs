//! Bubbles, Talenti elements, the scaling symmetry and the Sobolev level.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{p_laplacian, RadialField};
use crate::norms::{norm_integral, NormKind};
use crate::params::Params;
use crate::quad::QuadConfig;

/// U[z, λ](x) = (A(λ) / (λ^{p'} + |x - z|^{p'}))^{(n-p)/p}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    /// Empty means the origin.
    #[serde(default)]
    pub center: Vec<f64>,
    pub lambda: f64,
}

/// a (1 + b |x - z|^{p'})^{-(n-p)/p}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalentiElement {
    pub amp_a: f64,
    pub b: f64,
    #[serde(default)]
    pub center: Vec<f64>,
}

fn is_origin(z: &[f64]) -> bool {
    z.iter().all(|x| *x == 0.0)
}

impl Bubble {
    pub fn centered(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LabError::Domain(format!(
                "bubble scale {lambda} must be positive"
            )));
        }
        Ok(Self {
            center: Vec::new(),
            lambda,
        })
    }

    pub fn is_centered(&self) -> bool {
        is_origin(&self.center)
    }

    /// The bubble as a radial field about its centre.
    pub fn field(&self, params: &Params) -> RadialField {
        RadialField::bubble(params, self.lambda)
    }

    /// Value and radial derivative at distance `r` from the centre.
    pub fn eval(&self, params: &Params, r: f64) -> Result<(f64, f64)> {
        let d = self.field(params).eval_derivs(r, 1)?;
        Ok((d[0], d[1]))
    }

    pub fn to_talenti(&self, params: &Params) -> TalentiElement {
        let q = params.p_conj;
        let lq = self.lambda.powf(q);
        TalentiElement {
            amp_a: (params.bubble_numerator(self.lambda) / lq).powf(params.scaling_exponent()),
            b: 1.0 / lq,
            center: self.center.clone(),
        }
    }
}

impl TalentiElement {
    pub fn new(amp_a: f64, b: f64) -> Result<Self> {
        if amp_a == 0.0 || !amp_a.is_finite() || !(b > 0.0) || !b.is_finite() {
            return Err(LabError::Domain(format!(
                "Talenti element needs a != 0 and b > 0, got a = {amp_a}, b = {b}"
            )));
        }
        Ok(Self {
            amp_a,
            b,
            center: Vec::new(),
        })
    }

    pub fn field(&self, params: &Params) -> RadialField {
        RadialField::talenti(params, self.amp_a, self.b)
    }

    pub fn eval(&self, params: &Params, r: f64) -> Result<f64> {
        self.field(params).value(r)
    }
}

/// T_{z,λ} f (x) = λ^{(n-p)/p} f(λ (x - z)); only z = 0 is supported.
pub fn transform(f: &RadialField, params: &Params, z: &[f64], lambda: f64) -> Result<RadialField> {
    if !is_origin(z) {
        return Err(LabError::Unsupported(
            "translations: fields are radial about the origin".into(),
        ));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LabError::Domain(format!("scale {lambda} must be positive")));
    }
    Ok(f.dilate(lambda)
        .scale(lambda.powf(params.scaling_exponent())))
}

/// |Δ_p u + u^{p*-1}| / u^{p*-1} at r.
pub fn pde_residual(u: &RadialField, params: &Params, r: f64) -> Result<f64> {
    let lap = p_laplacian(u, params, r)?;
    let source = u.value(r)?.powf(params.p_star - 1.0);
    Ok((lap + source).abs() / source)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevLevel {
    /// S^n = ‖∇U‖_p^p.
    pub s_pow_n: f64,
    pub s: f64,
    /// ‖U‖_{p*}^{p*}, which must agree with S^n.
    pub mass: f64,
    pub err_est: f64,
}

impl SobolevLevel {
    pub fn relative_gap(&self) -> f64 {
        (self.s_pow_n - self.mass).abs() / self.s_pow_n
    }
}

/// Largest relative disagreement tolerated between the two integrals.
pub const LEVEL_CROSS_CHECK_TOL: f64 = 1e-6;

/// S^n from the energy of the unit bubble, cross-checked against its mass.
pub fn sobolev_level(params: &Params, quad: &QuadConfig) -> Result<SobolevLevel> {
    sobolev_level_at(params, quad, 1.0)
}

/// As [`sobolev_level`], integrating the bubble of scale `lambda`.
pub fn sobolev_level_at(params: &Params, quad: &QuadConfig, lambda: f64) -> Result<SobolevLevel> {
    let u = Bubble::centered(lambda)?.field(params);
    let energy = norm_integral(&u, &NormKind::GradLp, params, quad)?;
    let mass = norm_integral(&u, &NormKind::LpStar, params, quad)?;
    let level = SobolevLevel {
        s_pow_n: energy.value,
        s: energy.value.powf(1.0 / params.dim()),
        mass: mass.value,
        err_est: energy.err_est + mass.err_est,
    };
    if level.relative_gap() > LEVEL_CROSS_CHECK_TOL {
        return Err(LabError::CrossCheck {
            what: "bubble energy against bubble mass",
            lhs: energy.value,
            rhs: mass.value,
        });
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn centre_values() {
        let params = Params::new(4, 2.0).unwrap();
        let (v, d) = Bubble::centered(1.0).unwrap().eval(&params, 0.0).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(d, 0.0);
        for &(n, p, lambda) in &[(4usize, 2.0, 3.0), (5, 2.0, 0.5), (4, 3.0, 2.0)] {
            let params = Params::new(n, p).unwrap();
            let unit = Bubble::centered(1.0).unwrap().eval(&params, 0.0).unwrap().0;
            let scaled = Bubble::centered(lambda)
                .unwrap()
                .eval(&params, 0.0)
                .unwrap()
                .0;
            let expect = lambda.powf(-params.scaling_exponent()) * unit;
            assert!((scaled - expect).abs() < 1e-13 * expect);
        }
    }

    #[test]
    fn talenti_parameters() {
        let p42 = Params::new(4, 2.0).unwrap();
        let t = Bubble::centered(1.0).unwrap().to_talenti(&p42);
        assert!((t.b - 1.0).abs() < 1e-15);
        assert!((t.amp_a - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let t = Bubble::centered(2.0).unwrap().to_talenti(&p42);
        assert!((t.b - 0.25).abs() < 1e-15);
        let neg = TalentiElement::new(-1.0, 1.0).unwrap();
        assert!(neg.eval(&p42, 0.3).unwrap() < 0.0);
        assert_eq!(
            TalentiElement::new(1.0, 1.0)
                .unwrap()
                .eval(&p42, 0.0)
                .unwrap(),
            1.0
        );
        assert!(TalentiElement::new(0.0, 1.0).is_err());
    }

    #[test]
    fn off_centre_transform_is_rejected() {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0);
        assert!(matches!(
            transform(&u, &params, &[0.0, 1.0, 0.0, 0.0], 2.0),
            Err(LabError::Unsupported(_))
        ));
        assert!(transform(&u, &params, &[0.0; 4], 2.0).is_ok());
    }

    #[test]
    fn level_in_four_dimensions() {
        let params = Params::new(4, 2.0).unwrap();
        let level = sobolev_level(&params, &QuadConfig::default()).unwrap();
        let exact = 32.0 * PI * PI / 3.0;
        assert!((level.s_pow_n - exact).abs() < 1e-9 * exact);
        assert!((level.s.powi(4) - level.s_pow_n).abs() < 1e-12 * exact);
    }
}
