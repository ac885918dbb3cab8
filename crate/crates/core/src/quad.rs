//! Adaptive radial quadrature on R^n.
//!
//! Integrals of radial densities are reduced to
//! sigma_{n-1} * int_0^inf f(r) r^{n-1} dr. The half line is split at r = 1:
//! the inner part is integrated in r, the outer part in s = ln r up to the
//! cutoff radius, and the remainder beyond the cutoff is either dropped or
//! replaced by the integral of the power law matching the integrand there.
//! Panels are refined globally (largest error first) with a 21-point
//! Gauss-Kronrod rule, and the final sum runs over panels sorted by their
//! left endpoint, so the result does not depend on refinement order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Decay;
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// Add the integral of the power law fitted at the cutoff.
    AnalyticPowerTail,
    /// Ignore everything beyond the cutoff.
    HardTruncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub r_cut: f64,
    pub tail_policy: TailPolicy,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            r_cut: 1e6,
            tail_policy: TailPolicy::AnalyticPowerTail,
            max_subdivisions: 4000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(LabError::Domain(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if !(self.r_cut > 1.0) || !self.r_cut.is_finite() {
            return Err(LabError::Domain(format!(
                "cutoff radius {} must be finite and exceed 1",
                self.r_cut
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(LabError::Domain("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    /// Compact identifier recorded next to every number computed with
    /// this configuration.
    pub fn id(&self) -> String {
        let tail = match self.tail_policy {
            TailPolicy::AnalyticPowerTail => "tail",
            TailPolicy::HardTruncate => "cut",
        };
        format!(
            "gk21:rel={:e}:abs={:e}:rcut={:e}:{tail}:max={}",
            self.rel_tol, self.abs_tol, self.r_cut, self.max_subdivisions
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub err_est: f64,
    pub subdivisions_used: usize,
}

/// What the integrator needs to know about a radial density besides its
/// values: its behaviour at infinity, where it is not smooth, and the
/// radial limits of integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub decay: Decay,
    pub kinks: Vec<f64>,
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Domain {
    pub fn whole_space(decay: Decay, kinks: Vec<f64>) -> Self {
        Self {
            decay,
            kinks,
            lower: 0.0,
            upper: None,
        }
    }

    /// The centred ball of radius `t`.
    pub fn ball(t: f64, kinks: Vec<f64>) -> Self {
        Self {
            decay: Decay::Unknown,
            kinks,
            lower: 0.0,
            upper: Some(t),
        }
    }

    /// Complement of the centred ball of radius `t`.
    pub fn exterior(t: f64, decay: Decay, kinks: Vec<f64>) -> Self {
        Self {
            decay,
            kinks,
            lower: t,
            upper: None,
        }
    }
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525832617,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    // Roundoff-limited: further bisection cannot help.
    frozen: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk21<F>(g: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<f64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(centre)?;
    let mut kronrod = fc * WGK[10];
    let mut abs_k = kronrod.abs();
    let mut gauss = 0.0;
    let mut fv = [(0.0, 0.0); 10];
    for (j, slot) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = g(centre - dx)?;
        let f2 = g(centre + dx)?;
        if !f1.is_finite() || !f2.is_finite() {
            return Err(LabError::Domain(format!(
                "non-finite integrand near r in [{a}, {b}]"
            )));
        }
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
        *slot = (f1, f2);
    }
    if !fc.is_finite() {
        return Err(LabError::Domain(format!(
            "non-finite integrand at r = {centre}"
        )));
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_k * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    let frozen = err <= floor || (b - a).abs() <= 1e3 * f64::EPSILON * a.abs().max(b.abs());
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    Ok(Panel {
        a,
        b,
        value,
        err,
        frozen,
    })
}

/// Kahan-Babuska (Neumaier) summation.
pub(crate) fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integrate a scalar function over [a, b] by adaptive Gauss-Kronrod,
/// with mandatory breakpoints. Returns the integral and the error estimate.
fn adaptive<F>(g: &F, breaks: &[f64], quad: &QuadConfig, extra_value: f64) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut heap = BinaryHeap::new();
    let mut frozen = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let panel = gk21(g, w[0], w[1])?;
            if panel.frozen {
                frozen.push(panel);
            } else {
                heap.push(panel);
            }
        }
    }
    let mut subdivisions = 0;
    loop {
        let all = heap.iter().chain(frozen.iter());
        let value = stable_sum(all.clone().map(|p| p.value)) + extra_value;
        let err: f64 = all.map(|p| p.err).sum();
        let tol = quad.abs_tol.max(quad.rel_tol * value.abs());
        if err <= tol || heap.is_empty() {
            break;
        }
        if subdivisions >= quad.max_subdivisions {
            return Err(LabError::NonConvergence {
                value,
                err_est: err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let panel = gk21(g, a, b)?;
            if panel.frozen {
                frozen.push(panel);
            } else {
                heap.push(panel);
            }
        }
        subdivisions += 1;
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(IntegralResult {
        value: stable_sum(panels.iter().map(|p| p.value)),
        err_est: panels.iter().map(|p| p.err).sum(),
        subdivisions_used: subdivisions,
    })
}

/// sigma_{n-1} * int f(r) r^{n-1} dr over the radial extent of `domain`.
///
/// `domain.decay` describes f itself (not the volume-weighted density).
pub fn integrate<F>(
    f: F,
    domain: &Domain,
    params: &Params,
    quad: &QuadConfig,
) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    quad.validate()?;
    let n = params.dim();
    let lower = domain.lower;
    let (upper, with_tail) = match (domain.upper, domain.decay) {
        (Some(t), _) => (t, false),
        (None, Decay::Compact(r)) => (r.min(quad.r_cut), r > quad.r_cut),
        (None, _) => (quad.r_cut, true),
    };
    if upper <= lower {
        return Ok(IntegralResult {
            value: 0.0,
            err_est: 0.0,
            subdivisions_used: 0,
        });
    }
    let mut kinks: Vec<f64> = domain
        .kinks
        .iter()
        .copied()
        .filter(|k| *k > lower && *k < upper)
        .collect();
    kinks.sort_by(|a, b| a.total_cmp(b));

    let density = |r: f64| -> Result<f64> {
        let v = f(r)?;
        Ok(if v == 0.0 { 0.0 } else { v * r.powf(n - 1.0) })
    };

    // Inner part, linear variable.
    let inner_end = upper.min(1.0);
    let mut inner = 0.0;
    let mut inner_err = 0.0;
    let mut subdivisions = 0;
    if lower < inner_end {
        let mut breaks = vec![lower];
        let pieces = 4;
        for i in 1..pieces {
            let x = lower + (inner_end - lower) * i as f64 / pieces as f64;
            breaks.push(x);
        }
        breaks.extend(kinks.iter().copied().filter(|k| *k < inner_end));
        breaks.push(inner_end);
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        let res = adaptive(&density, &breaks, quad, 0.0)?;
        inner = res.value;
        inner_err = res.err_est;
        subdivisions += res.subdivisions_used;
    }

    // Outer part in s = ln r.
    let mut outer = 0.0;
    let mut outer_err = 0.0;
    let start = lower.max(1.0);
    if upper > start {
        let (s0, s1) = (start.ln(), upper.ln());
        let pieces = ((s1 - s0).ceil() as usize).max(1);
        let mut breaks: Vec<f64> = (0..=pieces)
            .map(|i| s0 + (s1 - s0) * i as f64 / pieces as f64)
            .collect();
        breaks.extend(kinks.iter().filter(|k| **k > start).map(|k| k.ln()));
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        let g = |s: f64| -> Result<f64> {
            let r = s.exp();
            Ok(density(r)? * r)
        };
        let res = adaptive(&g, &breaks, quad, inner)?;
        outer = res.value;
        outer_err = res.err_est;
        subdivisions += res.subdivisions_used;
    }

    let (tail, tail_err) = if with_tail && quad.tail_policy == TailPolicy::AnalyticPowerTail {
        power_tail(&density, upper, n, domain.decay, quad.abs_tol)?
    } else {
        (0.0, 0.0)
    };

    let sigma = params.surface_measure();
    Ok(IntegralResult {
        value: sigma * stable_sum([inner, outer, tail]),
        err_est: sigma * (inner_err + outer_err + tail_err),
        subdivisions_used: subdivisions,
    })
}

/// int_R^inf g(r) dr for a density g behaving like g(R) (r/R)^{-alpha}.
/// The error estimate is the gap between the declared and the observed
/// power at the cutoff.
fn power_tail<F>(density: &F, big_r: f64, n: f64, decay: Decay, abs_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let g_r = density(big_r)?;
    if g_r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let g_half = density(0.5 * big_r)?;
    let observed = if g_half != 0.0 && g_half.signum() == g_r.signum() {
        Some(-(g_r / g_half).ln() / 2f64.ln())
    } else {
        None
    };
    let alpha = match (decay.rate(), observed) {
        (Some(gamma), _) => gamma - (n - 1.0),
        (None, Some(a)) if a > 1.0 => a,
        // Undeclared decay and no usable slope: accept only a tail that is
        // already below the absolute tolerance, reporting it as the error.
        (None, _) if (g_r * big_r).abs() <= abs_tol => return Ok((0.0, (g_r * big_r).abs())),
        (None, a) => {
            return Err(LabError::DivergentTail {
                exponent: a.map_or(f64::NAN, |a| a + n - 1.0),
            });
        }
    };
    if alpha <= 1.0 {
        return Err(LabError::DivergentTail {
            exponent: alpha + n - 1.0,
        });
    }
    let tail = g_r * big_r / (alpha - 1.0);
    let err = match observed {
        Some(a) if a > 1.0 => (tail - g_r * big_r / (a - 1.0)).abs(),
        _ => tail.abs(),
    };
    Ok((tail, err))
}
