//! Import of sampled radial profiles.
//!
//! A grid is fitted once by a natural cubic spline on its knot range and
//! continued beyond the last knot by the power law through the last two
//! samples (or by zero when those samples do not share a sign). Fields
//! built from grids are flagged as reduced precision.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::Decay;
use crate::jet::Jet;

#[derive(Debug, Clone, Serialize)]
pub struct SplineDiagnostics {
    pub knots: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Exponent gamma of the r^{-gamma} continuation, if any.
    pub tail_exponent: Option<f64>,
    /// Largest gap between the spline and the chord at interval midpoints,
    /// relative to the largest sample magnitude. A rough oscillation gauge.
    pub max_midpoint_deviation: f64,
}

#[derive(Debug, Clone)]
enum Tail {
    Power { coeff: f64, gamma: f64 },
    Zero,
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    r: Vec<f64>,
    y: Vec<f64>,
    // Per-interval coefficients of y_i + b dx + c dx^2 + d dx^3.
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    tail: Tail,
}

impl CubicSpline {
    /// Natural cubic spline through `(r[i], y[i])`.
    pub fn fit(r: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = r.len();
        if n != y.len() {
            return Err(LabError::Grid(
                "radius and value columns differ in length".into(),
            ));
        }
        if n < 3 {
            return Err(LabError::Grid(format!("need at least 3 samples, got {n}")));
        }
        if r[0] < 0.0 {
            return Err(LabError::Grid(format!("negative radius {}", r[0])));
        }
        if let Some(w) = r.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(LabError::Grid(format!(
                "radii must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if y.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(LabError::Grid("non-finite sample".into()));
        }

        let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        // Tridiagonal system for the second-derivative coefficients c_i
        // with natural end conditions c_0 = c_{n-1} = 0.
        let mut c = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            upper[i] = h[i];
            rhs[i] = 3.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        // Thomas algorithm; the lower diagonal entry of row i is h[i-1].
        for i in 1..n - 1 {
            let lower = h[i - 1];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            c[i] = (rhs[i] - upper[i] * c[i + 1]) / diag[i];
        }
        let mut b = vec![0.0; n - 1];
        let mut d = vec![0.0; n - 1];
        for i in 0..n - 1 {
            b[i] = (y[i + 1] - y[i]) / h[i] - h[i] * (2.0 * c[i] + c[i + 1]) / 3.0;
            d[i] = (c[i + 1] - c[i]) / (3.0 * h[i]);
        }
        c.truncate(n - 1);

        let (r1, r2, y1, y2) = (r[n - 2], r[n - 1], y[n - 2], y[n - 1]);
        let tail = if y1 * y2 > 0.0 && r1 > 0.0 {
            let gamma = -(y2 / y1).ln() / (r2 / r1).ln();
            Tail::Power {
                coeff: y2 * r2.powf(gamma),
                gamma,
            }
        } else {
            Tail::Zero
        };

        Ok(Self {
            r,
            y,
            b,
            c,
            d,
            tail,
        })
    }

    /// Parse two-column text: radius and value per line, separated by
    /// whitespace or a comma; blank lines and lines starting with '#'
    /// are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|ch: char| ch == ',' || ch.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(LabError::Grid(format!(
                    "line {}: expected 2 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| LabError::Grid(format!("line {}: {s:?}: {e}", lineno + 1)))
            };
            r.push(parse(cols[0])?);
            y.push(parse(cols[1])?);
        }
        Self::fit(r, y)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn interval(&self, r: f64) -> usize {
        match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(self.r.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.r.len() - 2),
        }
    }

    pub fn jet(&self, r: f64) -> Jet {
        let last = *self.r.last().unwrap();
        if r > last {
            return match self.tail {
                Tail::Power { coeff, gamma } => Jet::variable(r).powf(-gamma).scale(coeff),
                Tail::Zero => Jet::ZERO,
            };
        }
        let i = self.interval(r);
        let dx = r - self.r[i];
        let (b, c, d) = (self.b[i], self.c[i], self.d[i]);
        Jet([
            self.y[i] + dx * (b + dx * (c + dx * d)),
            b + dx * (2.0 * c + 3.0 * d * dx),
            2.0 * c + 6.0 * d * dx,
            6.0 * d,
        ])
    }

    pub fn decay(&self) -> Decay {
        match self.tail {
            Tail::Power { gamma, .. } => Decay::Power(gamma),
            Tail::Zero => Decay::Compact(*self.r.last().unwrap()),
        }
    }

    /// The last knot, where the power-law continuation takes over.
    pub fn kinks(&self) -> Vec<f64> {
        vec![*self.r.last().unwrap()]
    }

    /// Positive at every knot, every interval midpoint, and in the tail.
    /// A sampling test: the spline is not certified positive between.
    pub fn is_positive(&self) -> bool {
        let tail_ok = matches!(self.tail, Tail::Power { coeff, .. } if coeff > 0.0);
        tail_ok && self.probe().all(|v| v > 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        let tail_ok = match self.tail {
            Tail::Power { coeff, .. } => coeff > 0.0,
            Tail::Zero => true,
        };
        tail_ok && self.probe().all(|v| v >= 0.0)
    }

    fn probe(&self) -> impl Iterator<Item = f64> + '_ {
        self.r.windows(2).flat_map(move |w| {
            [w[0], 0.5 * (w[0] + w[1]), w[1]]
                .into_iter()
                .map(move |x| self.jet(x).value())
        })
    }

    pub fn diagnostics(&self) -> SplineDiagnostics {
        let scale = self
            .y
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let max_dev = (0..self.r.len() - 1)
            .map(|i| {
                let mid = 0.5 * (self.r[i] + self.r[i + 1]);
                let chord = 0.5 * (self.y[i] + self.y[i + 1]);
                (self.jet(mid).value() - chord).abs() / scale
            })
            .fold(0.0, f64::max);
        SplineDiagnostics {
            knots: self.r.len(),
            r_min: self.r[0],
            r_max: *self.r.last().unwrap(),
            tail_exponent: match self.tail {
                Tail::Power { gamma, .. } => Some(gamma),
                Tail::Zero => None,
            },
            max_midpoint_deviation: max_dev,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_interior_and_linear_data() {
        let r: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = r.iter().map(|x| 2.0 - 0.5 * x).collect();
        let s = CubicSpline::fit(r, y).unwrap();
        for &x in &[0.05, 1.0, 2.2, 2.99] {
            let j = s.jet(x);
            assert!((j.value() - (2.0 - 0.5 * x)).abs() < 1e-13);
            assert!((j.d1() + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_and_continues_with_power_law() {
        let r: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let y: Vec<f64> = r.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
        let s = CubicSpline::fit(r.clone(), y.clone()).unwrap();
        for (x, v) in r.iter().zip(&y) {
            assert!((s.jet(*x).value() - v).abs() < 1e-14);
        }
        assert!((s.jet(0.525).value() - 1.0 / (1.0 + 0.525f64.powi(2))).abs() < 1e-5);
        match s.decay() {
            Decay::Power(g) => assert!((g - 2.0).abs() < 0.03),
            d => panic!("unexpected decay {d:?}"),
        }
        assert!(s.is_positive());
        let d = s.diagnostics();
        assert_eq!(d.knots, 200);
        assert!(d.max_midpoint_deviation < 1e-3);
    }

    #[test]
    fn parse_text() {
        let text = "# radius value\n0 1\n0.5, 0.8\n\n1.0\t0.5\n2 0.2\n";
        let s = CubicSpline::parse(text).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s.jet(0.5).value() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(
            CubicSpline::parse("0 1\n0 2\n1 3\n"),
            Err(LabError::Grid(_))
        ));
        assert!(CubicSpline::parse("0 1 2\n").is_err());
        assert!(CubicSpline::parse("0 x\n1 2\n2 3\n").is_err());
        assert!(CubicSpline::parse("0 1\n1 2\n").is_err());
    }
}
