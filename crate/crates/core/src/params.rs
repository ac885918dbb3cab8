use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Dimension and exponent of the critical problem, with the derived
/// exponents every other module reads from here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub p: f64,
    /// Sobolev conjugate np/(n-p).
    pub p_star: f64,
    /// Hölder conjugate p/(p-1).
    pub p_conj: f64,
    /// Hölder conjugate of p_star.
    pub p_star_conj: f64,
}

impl Params {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(LabError::Domain(format!(
                "dimension n = {n} must be at least 2"
            )));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(LabError::Domain(format!("exponent p = {p} must exceed 1")));
        }
        let nf = n as f64;
        if p >= nf {
            return Err(LabError::Domain(format!(
                "exponent p = {p} must be below n = {n}"
            )));
        }
        let p_star = nf * p / (nf - p);
        Ok(Self {
            n,
            p,
            p_star,
            p_conj: p / (p - 1.0),
            p_star_conj: p_star / (p_star - 1.0),
        })
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// (n-p)/p: the scaling weight of the symmetry operators and the
    /// exponent relating a bubble to its paraboloid.
    pub fn scaling_exponent(&self) -> f64 {
        (self.dim() - self.p) / self.p
    }

    /// Decay rate (n-p)/(p-1) of finite-energy solutions.
    pub fn decay_u(&self) -> f64 {
        (self.dim() - self.p) / (self.p - 1.0)
    }

    /// Decay rate (n-1)/(p-1) of their gradients.
    pub fn decay_grad(&self) -> f64 {
        (self.dim() - 1.0) / (self.p - 1.0)
    }

    /// (p/(n-p))^{p-1}, the zeroth-order coefficient of the P-function.
    pub fn p_function_constant(&self) -> f64 {
        (self.p / (self.dim() - self.p)).powf(self.p - 1.0)
    }

    /// Numerator constant of the bubble profile at scale lambda:
    /// lambda^{1/(p-1)} n^{1/p} ((n-p)/(p-1))^{(p-1)/p}.
    pub fn bubble_numerator(&self, lambda: f64) -> f64 {
        let p = self.p;
        lambda.powf(1.0 / (p - 1.0))
            * self.dim().powf(1.0 / p)
            * ((self.dim() - p) / (p - 1.0)).powf((p - 1.0) / p)
    }

    /// Area of the unit sphere in R^n.
    pub fn surface_measure(&self) -> f64 {
        surface_measure(self.n)
    }
}

/// sigma_{n-1} = 2 pi^{n/2} / Gamma(n/2), with Gamma(n/2) by recurrence.
pub fn surface_measure(n: usize) -> f64 {
    use std::f64::consts::PI;
    // Gamma(k/2) for k = n, starting from Gamma(1/2) or Gamma(1).
    let mut gamma = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k < n {
        gamma *= k as f64 / 2.0;
        k += 2;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn critical_exponents() {
        let p = Params::new(4, 2.0).unwrap();
        assert_eq!(p.p_star, 4.0);
        assert_eq!(p.p_conj, 2.0);
        assert!((p.p_star_conj - 4.0 / 3.0).abs() < 1e-15);

        let p = Params::new(5, 2.0).unwrap();
        assert!((p.p_star - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(Params::new(4, 4.0), Err(LabError::Domain(_))));
        assert!(matches!(Params::new(4, 1.0), Err(LabError::Domain(_))));
        assert!(matches!(Params::new(1, 0.5), Err(LabError::Domain(_))));
        assert!(Params::new(4, f64::NAN).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((surface_measure(2) - 2.0 * PI).abs() < 1e-14);
        assert!((surface_measure(3) - 4.0 * PI).abs() < 1e-13);
        assert!((surface_measure(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((surface_measure(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }
}
