//! Truncated Taylor jets: a value together with its first three
//! derivatives in the radial variable.
//!
//! Entries that are undefined at a point (for instance the second
//! derivative of `r^1.5` at the origin) are carried as non-finite values.
//! No rule below reads an entry of higher order than the one it produces,
//! so a bad entry never contaminates lower orders.

use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub const ZERO: Jet = Jet([0.0; 4]);

    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    /// The identity map r -> r evaluated at `r`.
    pub fn variable(r: f64) -> Self {
        Jet([r, 1.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn d1(&self) -> f64 {
        self.0[1]
    }

    pub fn d2(&self) -> f64 {
        self.0[2]
    }

    pub fn d3(&self) -> f64 {
        self.0[3]
    }

    pub fn scale(self, c: f64) -> Self {
        Jet(self.0.map(|x| c * x))
    }

    /// Chain rule (Faa di Bruno to third order) for `h(self)`, where
    /// `outer` holds h, h', h'', h''' evaluated at `self.value()`.
    pub fn compose(self, outer: [f64; 4]) -> Self {
        let [_, f1, f2, f3] = self.0;
        let [h0, h1, h2, h3] = outer;
        Jet([
            h0,
            h1 * f1,
            h2 * f1 * f1 + h1 * f2,
            h3 * f1 * f1 * f1 + 3.0 * h2 * f1 * f2 + h1 * f3,
        ])
    }

    /// `self^alpha` for a positive base.
    pub fn powf(self, alpha: f64) -> Self {
        let x = self.value();
        let h0 = x.powf(alpha);
        let h1 = alpha * h0 / x;
        let h2 = (alpha - 1.0) * h1 / x;
        let h3 = (alpha - 2.0) * h2 / x;
        self.compose([h0, h1, h2, h3])
    }

    /// `self^k` for a non-negative integer exponent; valid for any sign
    /// of the base.
    pub fn powi(self, k: i32) -> Self {
        let x = self.value();
        let kf = k as f64;
        let pow = |e: i32| if e < 0 { 0.0 } else { x.powi(e) };
        self.compose([
            pow(k),
            kf * pow(k - 1),
            kf * (kf - 1.0) * pow(k - 2),
            kf * (kf - 1.0) * (kf - 2.0) * pow(k - 3),
        ])
    }

    /// Substitution r -> lambda r: derivatives pick up powers of lambda.
    pub fn dilated(self, lambda: f64) -> Self {
        let [f0, f1, f2, f3] = self.0;
        Jet([f0, lambda * f1, lambda * lambda * f2, lambda.powi(3) * f3])
    }

    pub fn as_slice(&self, order: usize) -> &[f64] {
        &self.0[..=order]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
            self.0[3] + rhs.0[3],
        ])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

// Leibniz rule.
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let [f0, f1, f2, f3] = self.0;
        let [g0, g1, g2, g3] = rhs.0;
        Jet([
            f0 * g0,
            f1 * g0 + f0 * g1,
            f2 * g0 + 2.0 * f1 * g1 + f0 * g2,
            f3 * g0 + 3.0 * f2 * g1 + 3.0 * f1 * g2 + f0 * g3,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn polynomial_product() {
        // (1 + r^2) * r at r = 2: value 10, d1 = 1 + 3r^2 = 13, d2 = 6r = 12, d3 = 6
        let r = Jet::variable(2.0);
        let f = (Jet::constant(1.0) + r * r) * r;
        assert_eq!(f.0, [10.0, 13.0, 12.0, 6.0]);
    }

    #[test]
    fn power_chain_rule() {
        // (1 + r^2)^{-1} at r = 1
        let r = Jet::variable(1.0);
        let f = (Jet::constant(1.0) + r * r).powf(-1.0);
        // d/dr = -2r/(1+r^2)^2 = -0.5; d2 = (6r^2-2)/(1+r^2)^3 = 0.5; d3 = 24r(1-r^2)/(1+r^2)^4 = 0
        assert!(close(f.value(), 0.5));
        assert!(close(f.d1(), -0.5));
        assert!(close(f.d2(), 0.5));
        assert!(close(f.d3(), 0.0));
    }

    #[test]
    fn integer_power_of_negative_base() {
        let r = Jet::variable(3.0);
        let s = Jet::constant(1.0) - r; // -2
        let f = s.powi(4);
        assert!(close(f.value(), 16.0));
        assert!(close(f.d1(), -4.0 * (-8.0)));
        assert!(close(f.d2(), 12.0 * 4.0));
        assert!(close(f.d3(), -24.0 * (-2.0)));
    }

    #[test]
    fn dilation() {
        // g(r) = f(2r) with f(s) = s^2, at r = 0.5
        let s = Jet::variable(1.0);
        let g = (s * s).dilated(2.0);
        assert_eq!(g.0, [1.0, 4.0, 8.0, 0.0]);
    }
}
