//! Closed-form radial fields on R^n.
//!
//! A [`RadialField`] is an immutable expression tree over a handful of
//! profiles (constants, power laws, bubbles, Talenti profiles, a compactly
//! supported bump and imported splines) closed under sums, scalar
//! multiples, products, real powers of positive fields and dilations.
//! Every node evaluates to a [`Jet`], so derivatives up to order three are
//! exact up to rounding.

use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::grid::CubicSpline;
use crate::jet::{Jet, MAX_ORDER};
use crate::params::Params;

/// Asymptotic behaviour of a field as r -> infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// Vanishes identically for r >= the given radius.
    Compact(f64),
    /// Behaves like r^{-gamma}; negative gamma means growth.
    Power(f64),
    Unknown,
}

impl Decay {
    fn combine_sum(self, other: Decay) -> Decay {
        match (self, other) {
            (Decay::Unknown, _) | (_, Decay::Unknown) => Decay::Unknown,
            (Decay::Compact(a), Decay::Compact(b)) => Decay::Compact(a.max(b)),
            (Decay::Compact(_), d) | (d, Decay::Compact(_)) => d,
            (Decay::Power(a), Decay::Power(b)) => Decay::Power(a.min(b)),
        }
    }

    fn combine_product(self, other: Decay) -> Decay {
        match (self, other) {
            (Decay::Compact(a), Decay::Compact(b)) => Decay::Compact(a.min(b)),
            (Decay::Compact(a), _) | (_, Decay::Compact(a)) => Decay::Compact(a),
            (Decay::Unknown, _) | (_, Decay::Unknown) => Decay::Unknown,
            (Decay::Power(a), Decay::Power(b)) => Decay::Power(a + b),
        }
    }

    /// Decay rate, if the field decays like a power law.
    pub fn rate(self) -> Option<f64> {
        match self {
            Decay::Power(g) => Some(g),
            _ => None,
        }
    }
}

#[derive(Debug)]
enum Node {
    Constant(f64),
    /// c0 + c1 r^k
    PowerLaw {
        c0: f64,
        c1: f64,
        k: f64,
    },
    /// (num / (lambda^q + r^q))^m
    Bubble {
        lambda: f64,
        num: f64,
        q: f64,
        m: f64,
    },
    /// a (1 + b r^q)^{-m}
    Talenti {
        a: f64,
        b: f64,
        q: f64,
        m: f64,
    },
    /// (1 - (r/R)^2)^4 on [0, R), zero beyond.
    Bump {
        radius: f64,
    },
    Spline(Arc<CubicSpline>),
    Sum(Vec<RadialField>),
    Scale(f64, RadialField),
    Product(RadialField, RadialField),
    Power(RadialField, f64),
    /// r -> f(lambda r)
    Dilate(f64, RadialField),
}

#[derive(Debug, Clone)]
pub struct RadialField(Arc<Node>);

fn power_law_jet(c0: f64, c1: f64, k: f64, r: f64) -> Jet {
    if c1 == 0.0 {
        return Jet::constant(c0);
    }
    let mut out = [0.0; 4];
    let mut coeff = 1.0;
    for (j, slot) in out.iter_mut().enumerate() {
        if j > 0 {
            coeff *= k - (j as f64 - 1.0);
        }
        *slot = if coeff == 0.0 {
            0.0
        } else {
            c1 * coeff * r.powf(k - j as f64)
        };
    }
    out[0] += c0;
    Jet(out)
}

impl RadialField {
    fn new(node: Node) -> Self {
        RadialField(Arc::new(node))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Node::Constant(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// c0 + c1 r^k, the p-paraboloid when k = p/(p-1).
    pub fn power_law(c0: f64, c1: f64, k: f64) -> Self {
        Self::new(Node::PowerLaw { c0, c1, k })
    }

    /// The centred bubble of scale `lambda`.
    pub fn bubble(params: &Params, lambda: f64) -> Self {
        Self::new(Node::Bubble {
            lambda,
            num: params.bubble_numerator(lambda),
            q: params.p_conj,
            m: params.scaling_exponent(),
        })
    }

    /// a (1 + b r^{p/(p-1)})^{-(n-p)/p}
    pub fn talenti(params: &Params, a: f64, b: f64) -> Self {
        Self::new(Node::Talenti {
            a,
            b,
            q: params.p_conj,
            m: params.scaling_exponent(),
        })
    }

    /// The C^3 cutoff (1 - (r/R)^2)^4 supported in [0, R].
    pub fn bump(radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        Self::new(Node::Bump { radius })
    }

    pub fn spline(spline: CubicSpline) -> Self {
        Self::new(Node::Spline(Arc::new(spline)))
    }

    pub fn sum(terms: Vec<RadialField>) -> Self {
        Self::new(Node::Sum(terms))
    }

    pub fn add(&self, other: &RadialField) -> Self {
        Self::sum(vec![self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &RadialField) -> Self {
        Self::sum(vec![self.clone(), other.scale(-1.0)])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(Node::Scale(c, self.clone()))
    }

    pub fn mul(&self, other: &RadialField) -> Self {
        Self::new(Node::Product(self.clone(), other.clone()))
    }

    /// f^alpha; only defined for fields known to be positive.
    pub fn powf(&self, alpha: f64) -> Result<Self> {
        if !self.is_positive() {
            return Err(LabError::Domain(format!(
                "power {alpha} of a field not known to be positive: {self}"
            )));
        }
        Ok(Self::new(Node::Power(self.clone(), alpha)))
    }

    pub fn recip(&self) -> Result<Self> {
        self.powf(-1.0)
    }

    /// r -> f(lambda r)
    pub fn dilate(&self, lambda: f64) -> Self {
        assert!(lambda > 0.0, "dilation factor must be positive");
        Self::new(Node::Dilate(lambda, self.clone()))
    }

    pub fn jet(&self, r: f64) -> Result<Jet> {
        Ok(match &*self.0 {
            Node::Constant(c) => Jet::constant(*c),
            Node::PowerLaw { c0, c1, k } => power_law_jet(*c0, *c1, *k, r),
            Node::Bubble { lambda, num, q, m } => {
                let base = power_law_jet(lambda.powf(*q), 1.0, *q, r);
                base.powf(-m).scale(num.powf(*m))
            }
            Node::Talenti { a, b, q, m } => {
                let base = power_law_jet(1.0, *b, *q, r);
                base.powf(-m).scale(*a)
            }
            Node::Bump { radius } => {
                if r >= *radius {
                    Jet::ZERO
                } else {
                    let s = Jet([
                        1.0 - (r / radius).powi(2),
                        -2.0 * r / (radius * radius),
                        -2.0 / (radius * radius),
                        0.0,
                    ]);
                    s.powi(4)
                }
            }
            Node::Spline(s) => s.jet(r),
            Node::Sum(terms) => {
                let mut acc = Jet::ZERO;
                for t in terms {
                    acc = acc + t.jet(r)?;
                }
                acc
            }
            Node::Scale(c, f) => f.jet(r)?.scale(*c),
            Node::Product(f, g) => f.jet(r)? * g.jet(r)?,
            Node::Power(f, alpha) => {
                let inner = f.jet(r)?;
                if inner.value() <= 0.0 || inner.value().is_nan() {
                    return Err(LabError::NonPositive {
                        what: "base of a real power",
                        r,
                        value: inner.value(),
                    });
                }
                inner.powf(*alpha)
            }
            Node::Dilate(lambda, f) => f.jet(lambda * r)?.dilated(*lambda),
        })
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        let v = self.jet(r)?.value();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LabError::DerivativeUndefined { r, order: 0 })
        }
    }

    /// Derivatives of orders 0..=order at `r`.
    pub fn eval_derivs(&self, r: f64, order: usize) -> Result<Vec<f64>> {
        if order > MAX_ORDER {
            return Err(LabError::Domain(format!(
                "derivative order {order} exceeds {MAX_ORDER}"
            )));
        }
        if !(r >= 0.0) {
            return Err(LabError::Domain(format!("radius {r} must be non-negative")));
        }
        let jet = self.jet(r)?;
        let vals = jet.as_slice(order);
        if let Some(bad) = vals.iter().position(|x| !x.is_finite()) {
            return Err(LabError::DerivativeUndefined { r, order: bad });
        }
        Ok(vals.to_vec())
    }

    /// Whether the field is structurally known to be strictly positive.
    pub fn is_positive(&self) -> bool {
        match &*self.0 {
            Node::Constant(c) => *c > 0.0,
            Node::PowerLaw { c0, c1, .. } => *c0 > 0.0 && *c1 >= 0.0,
            Node::Bubble { .. } => true,
            Node::Talenti { a, b, .. } => *a > 0.0 && *b > 0.0,
            Node::Bump { .. } => false,
            Node::Spline(s) => s.is_positive(),
            Node::Sum(terms) => {
                terms.iter().all(|t| t.is_nonnegative()) && terms.iter().any(|t| t.is_positive())
            }
            Node::Scale(c, f) => *c > 0.0 && f.is_positive(),
            Node::Product(f, g) => f.is_positive() && g.is_positive(),
            Node::Power(..) => true,
            Node::Dilate(_, f) => f.is_positive(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match &*self.0 {
            Node::Constant(c) => *c >= 0.0,
            Node::PowerLaw { c0, c1, .. } => *c0 >= 0.0 && *c1 >= 0.0,
            Node::Talenti { a, .. } => *a >= 0.0,
            Node::Bump { .. } => true,
            Node::Spline(s) => s.is_nonnegative(),
            Node::Sum(terms) => terms.iter().all(|t| t.is_nonnegative()),
            Node::Scale(c, f) => *c >= 0.0 && f.is_nonnegative(),
            Node::Product(f, g) => f.is_nonnegative() && g.is_nonnegative(),
            Node::Dilate(_, f) => f.is_nonnegative(),
            Node::Bubble { .. } | Node::Power(..) => true,
        }
    }

    /// Whether any node was fitted to sampled data.
    pub fn is_reduced_precision(&self) -> bool {
        match &*self.0 {
            Node::Spline(_) => true,
            Node::Sum(terms) => terms.iter().any(|t| t.is_reduced_precision()),
            Node::Scale(_, f) | Node::Power(f, _) | Node::Dilate(_, f) => f.is_reduced_precision(),
            Node::Product(f, g) => f.is_reduced_precision() || g.is_reduced_precision(),
            _ => false,
        }
    }

    pub fn support_radius(&self) -> Option<f64> {
        match self.decay() {
            Decay::Compact(r) => Some(r),
            _ => None,
        }
    }

    pub fn decay(&self) -> Decay {
        match &*self.0 {
            Node::Constant(c) => {
                if *c == 0.0 {
                    Decay::Compact(0.0)
                } else {
                    Decay::Power(0.0)
                }
            }
            Node::PowerLaw { c0, c1, k } => {
                if *c1 != 0.0 {
                    Decay::Power(-k.max(0.0))
                } else if *c0 != 0.0 {
                    Decay::Power(0.0)
                } else {
                    Decay::Compact(0.0)
                }
            }
            Node::Bubble { q, m, .. } | Node::Talenti { q, m, .. } => Decay::Power(q * m),
            Node::Bump { radius } => Decay::Compact(*radius),
            Node::Spline(s) => s.decay(),
            Node::Sum(terms) => terms
                .iter()
                .map(|t| t.decay())
                .fold(Decay::Compact(0.0), Decay::combine_sum),
            Node::Scale(c, f) => {
                if *c == 0.0 {
                    Decay::Compact(0.0)
                } else {
                    f.decay()
                }
            }
            Node::Product(f, g) => f.decay().combine_product(g.decay()),
            Node::Power(f, alpha) => match f.decay() {
                Decay::Power(g) => Decay::Power(alpha * g),
                _ => Decay::Unknown,
            },
            Node::Dilate(lambda, f) => match f.decay() {
                Decay::Compact(r) => Decay::Compact(r / lambda),
                d => d,
            },
        }
    }

    /// Asymptotic behaviour of the radial derivative.
    pub fn grad_decay(&self) -> Decay {
        match &*self.0 {
            Node::Constant(_) => Decay::Compact(0.0),
            Node::PowerLaw { c1, k, .. } => {
                if *c1 != 0.0 && *k != 0.0 {
                    Decay::Power(1.0 - k)
                } else {
                    Decay::Compact(0.0)
                }
            }
            Node::Bubble { q, m, .. } | Node::Talenti { q, m, .. } => Decay::Power(q * m + 1.0),
            Node::Bump { radius } => Decay::Compact(*radius),
            Node::Spline(s) => match s.decay() {
                Decay::Power(g) => Decay::Power(g + 1.0),
                d => d,
            },
            Node::Sum(terms) => terms
                .iter()
                .map(|t| t.grad_decay())
                .fold(Decay::Compact(0.0), Decay::combine_sum),
            Node::Scale(c, f) => {
                if *c == 0.0 {
                    Decay::Compact(0.0)
                } else {
                    f.grad_decay()
                }
            }
            Node::Product(f, g) => f
                .grad_decay()
                .combine_product(g.decay())
                .combine_sum(f.decay().combine_product(g.grad_decay())),
            Node::Power(f, alpha) => match (f.decay(), f.grad_decay()) {
                (Decay::Power(g), Decay::Compact(_)) if g == 0.0 => Decay::Compact(0.0),
                (Decay::Power(g), Decay::Power(dg)) => Decay::Power((alpha - 1.0) * g + dg),
                _ => Decay::Unknown,
            },
            Node::Dilate(lambda, f) => match f.grad_decay() {
                Decay::Compact(r) => Decay::Compact(r / lambda),
                d => d,
            },
        }
    }

    /// Radii where the field loses smoothness (support edges, spline ends).
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_kinks(1.0, &mut out);
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
        out
    }

    fn collect_kinks(&self, scale: f64, out: &mut Vec<f64>) {
        match &*self.0 {
            Node::Bump { radius } => out.push(radius * scale),
            Node::Spline(s) => out.extend(s.kinks().into_iter().map(|r| r * scale)),
            Node::Sum(terms) => terms.iter().for_each(|t| t.collect_kinks(scale, out)),
            Node::Scale(_, f) | Node::Power(f, _) => f.collect_kinks(scale, out),
            Node::Product(f, g) => {
                f.collect_kinks(scale, out);
                g.collect_kinks(scale, out);
            }
            Node::Dilate(lambda, f) => f.collect_kinks(scale / lambda, out),
            _ => {}
        }
    }
}

impl fmt::Display for RadialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Constant(c) => write!(f, "{c}"),
            Node::PowerLaw { c0, c1, k } => write!(f, "({c0} + {c1} r^{k})"),
            Node::Bubble { lambda, .. } => write!(f, "U[{lambda}]"),
            Node::Talenti { a, b, .. } => write!(f, "T[a={a}, b={b}]"),
            Node::Bump { radius } => write!(f, "bump[{radius}]"),
            Node::Spline(s) => write!(f, "spline[{} knots]", s.len()),
            Node::Sum(terms) => {
                write!(f, "(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Node::Scale(c, g) => write!(f, "{c}*{g}"),
            Node::Product(a, b) => write!(f, "{a}*{b}"),
            Node::Power(g, alpha) => write!(f, "{g}^{alpha}"),
            Node::Dilate(lambda, g) => write!(f, "{g}({lambda} r)"),
        }
    }
}

/// |s|^{p-2} s, the one-dimensional stress.
pub fn stress(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(p - 1.0)
    }
}

/// Radial p-Laplacian (p-1)|f'|^{p-2} f'' + (n-1)|f'|^{p-2} f'/r.
///
/// At the origin the limit is returned when f''(0) is finite and the
/// limit exists: n f''(0) for p = 2, zero for p > 2.
pub fn p_laplacian(f: &RadialField, params: &Params, r: f64) -> Result<f64> {
    let p = params.p;
    let n = params.dim();
    if r < 0.0 {
        return Err(LabError::Domain(format!("radius {r} must be non-negative")));
    }
    if r == 0.0 {
        let d = f
            .eval_derivs(0.0, 2)
            .map_err(|_| LabError::DegeneratePoint {
                r,
                what: "p-Laplacian at the origin needs a finite second derivative",
            })?;
        return if p == 2.0 {
            Ok(n * d[2])
        } else if p > 2.0 {
            Ok(0.0)
        } else if d[2] == 0.0 {
            Err(LabError::DegeneratePoint {
                r,
                what: "singular p-Laplacian at a flat origin",
            })
        } else {
            Err(LabError::DegeneratePoint {
                r,
                what: "singular p-Laplacian at the origin for p < 2",
            })
        };
    }
    let d = f.eval_derivs(r, 2)?;
    let (s, s2) = (d[1], d[2]);
    if s == 0.0 {
        return if p == 2.0 {
            Ok(s2 + (n - 1.0) * s2)
        } else if p > 2.0 {
            Ok(0.0)
        } else {
            Err(LabError::DegeneratePoint {
                r,
                what: "critical point of a singular p-Laplacian",
            })
        };
    }
    let weight = s.abs().powf(p - 2.0);
    Ok((p - 1.0) * weight * s2 + (n - 1.0) * weight * s / r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, p: f64) -> Params {
        Params::new(n, p).unwrap()
    }

    #[test]
    fn paraboloid_derivatives() {
        let f = RadialField::power_law(1.0, 1.0, 2.0);
        assert_eq!(f.eval_derivs(3.0, 2).unwrap(), vec![10.0, 6.0, 2.0]);
        assert_eq!(f.eval_derivs(0.0, 3).unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn fractional_power_is_undefined_at_origin() {
        let f = RadialField::power_law(0.0, 1.0, 1.5);
        assert_eq!(f.eval_derivs(0.0, 1).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            f.eval_derivs(0.0, 2),
            Err(LabError::DerivativeUndefined { order: 2, .. })
        ));
    }

    #[test]
    fn bubble_centre_and_slope() {
        let pr = params(4, 2.0);
        let u = RadialField::bubble(&pr, 1.0);
        let d = u.eval_derivs(0.0, 1).unwrap();
        assert!((d[0] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(d[1], 0.0);
        for &(n, p) in &[(5usize, 2.0), (4, 3.0), (9, 3.0), (3, 1.5)] {
            let u = RadialField::bubble(&params(n, p), 0.7);
            assert_eq!(u.eval_derivs(0.0, 1).unwrap()[1], 0.0);
        }
    }

    #[test]
    fn bump_is_c3_at_the_edge() {
        let phi = RadialField::bump(1.0);
        let inside = phi.eval_derivs(1.0 - 1e-9, 3).unwrap();
        let outside = phi.eval_derivs(1.0, 3).unwrap();
        for (a, b) in inside.iter().zip(&outside) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(phi.support_radius(), Some(1.0));
        assert_eq!(phi.dilate(2.0).support_radius(), Some(0.5));
    }

    #[test]
    fn power_requires_positive_base() {
        assert!(RadialField::bump(1.0).powf(0.5).is_err());
        let pr = params(4, 2.0);
        let u = RadialField::bubble(&pr, 1.0).add(&RadialField::bump(1.0).scale(0.1));
        assert!(u.is_positive());
        assert!(u.powf(-1.0).is_ok());
        let garbage = RadialField::power_law(1.0, -1.0, 2.0);
        assert!(garbage.powf(2.0).is_err());
    }

    #[test]
    fn decay_bookkeeping() {
        let pr = params(4, 2.0);
        let u = RadialField::bubble(&pr, 1.0);
        assert_eq!(u.decay(), Decay::Power(2.0));
        assert_eq!(u.grad_decay(), Decay::Power(3.0));
        let v = u.powf(-1.0).unwrap();
        assert_eq!(v.decay(), Decay::Power(-2.0));
        let ue = u.add(&RadialField::bump(1.0).scale(1e-3));
        assert_eq!(ue.decay(), Decay::Power(2.0));
        assert_eq!(ue.kinks(), vec![1.0]);
    }

    #[test]
    fn p_laplacian_simple_cases() {
        let pr = params(3, 2.0);
        let f = RadialField::power_law(1.0, 1.0, 2.0);
        for &r in &[0.0, 0.5, 2.0] {
            assert!((p_laplacian(&f, &pr, r).unwrap() - 6.0).abs() < 1e-12);
        }
        let c = RadialField::constant(3.0);
        assert_eq!(p_laplacian(&c, &params(4, 3.0), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn p_laplacian_origin_for_singular_p() {
        let pr = params(3, 1.5);
        let u = RadialField::bubble(&pr, 1.0);
        assert!(matches!(
            p_laplacian(&u, &pr, 0.0),
            Err(LabError::DegeneratePoint { .. })
        ));
    }
}
