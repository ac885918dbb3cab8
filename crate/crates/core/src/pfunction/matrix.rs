//! Randomized check of the two matrix inequalities for X = P S with P
//! symmetric positive definite and S symmetric:
//!
//!   |X - Xᵀ|² ≤ 2c |X|²   and   tr X² - |X|² ≥ -c |X̊|²,
//!
//! where c = (1-ρ)²/(1+ρ²) and ρ is the eigenvalue ratio of P.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// c(ρ) = (1-ρ)²/(1+ρ²).
pub fn c_of_rho(rho: f64) -> f64 {
    (1.0 - rho).powi(2) / (1.0 + rho * rho)
}

/// Whether c(ρ) is strictly decreasing on `count` evenly spaced ρ in [lo, 1].
pub fn c_is_decreasing(lo: f64, count: usize) -> bool {
    let values: Vec<f64> = (0..count)
        .map(|i| c_of_rho(lo + (1.0 - lo) * i as f64 / (count - 1) as f64))
        .collect();
    values.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    /// Trials where |X - Xᵀ|² - 2c|X|² exceeds slack·|X|².
    pub commutator_violations: usize,
    /// Trials where -c|X̊|² - (tr X² - |X|²) exceeds slack·|X|².
    pub trace_violations: usize,
    /// Largest value of the two excesses relative to |X|² (negative when
    /// every trial holds with room to spare).
    pub max_commutator_excess: f64,
    pub max_trace_excess: f64,
    pub min_rho: f64,
}

impl MatrixReport {
    pub fn passed(&self) -> bool {
        self.commutator_violations == 0 && self.trace_violations == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    commutator: f64,
    trace: f64,
    rho: f64,
}

/// Both inequalities for one pair, as excesses relative to |X|².
fn excesses(p: &DMatrix<f64>, s: &DMatrix<f64>, rho: f64) -> (f64, f64) {
    let n = p.nrows();
    let x = p * s;
    let c = c_of_rho(rho);
    let norm2 = x.norm_squared();
    if norm2 == 0.0 {
        return (0.0, 0.0);
    }
    let skew2 = (&x - x.transpose()).norm_squared();
    let tr_x2 = (&x * &x).trace();
    let traceless = &x - DMatrix::identity(n, n) * (x.trace() / n as f64);
    let commutator = (skew2 - 2.0 * c * norm2) / norm2;
    let trace = (-c * traceless.norm_squared() - (tr_x2 - norm2)) / norm2;
    (commutator, trace)
}

fn random_trial(dim: usize, seed: u64, index: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((dim as u64) << 40) | index);
    let gaussian = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let q = gaussian.qr().q();
    // Eigenvalue ratios spread over [1e-3, 1], with a quarter of the
    // trials close to the equality case ρ = 1.
    let near_one = rng.random::<f64>() < 0.25;
    let eig = DVector::<f64>::from_fn(dim, |_, _| {
        if near_one {
            1.0 - 0.05 * rng.random::<f64>()
        } else {
            (-3.0 * std::f64::consts::LN_10 * rng.random::<f64>()).exp()
        }
    });
    let rho = eig.min() / eig.max();
    let p = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let p = (&p + p.transpose()) * 0.5;
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let s = (&g + g.transpose()) * 0.5;
    let (commutator, trace) = excesses(&p, &s, rho);
    Trial {
        commutator,
        trace,
        rho,
    }
}

/// Random trials in dimension `dim`. Trial i draws from its own stream of
/// the seeded generator, so results do not depend on scheduling.
pub fn matrix_inequality_check(dim: usize, trials: usize, seed: u64, slack: f64) -> MatrixReport {
    let results: Vec<Trial> = (0..trials as u64)
        .into_par_iter()
        .map(|i| random_trial(dim, seed, i))
        .collect();
    MatrixReport {
        dim,
        trials,
        seed,
        slack,
        commutator_violations: results.iter().filter(|t| t.commutator > slack).count(),
        trace_violations: results.iter().filter(|t| t.trace > slack).count(),
        max_commutator_excess: results
            .iter()
            .map(|t| t.commutator)
            .fold(f64::NEG_INFINITY, f64::max),
        max_trace_excess: results
            .iter()
            .map(|t| t.trace)
            .fold(f64::NEG_INFINITY, f64::max),
        min_rho: results.iter().map(|t| t.rho).fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_equality() {
        let p = DMatrix::<f64>::identity(3, 3);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 2.0, -1.0, 0.0, 0.5, 0.0, 3.0]);
        let (a, b) = excesses(&p, &s, 1.0);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
    }

    #[test]
    fn c_is_monotone() {
        assert!(c_is_decreasing(0.01, 100));
        assert_eq!(c_of_rho(1.0), 0.0);
    }

    #[test]
    fn small_run_is_reproducible_and_clean() {
        let a = matrix_inequality_check(3, 500, 7, 1e-10);
        let b = matrix_inequality_check(3, 500, 7, 1e-10);
        assert_eq!(a, b);
        assert!(a.passed(), "{a:?}");
        assert!(a.min_rho < 0.1);
    }

    #[test]
    fn a_wrong_constant_is_caught() {
        // With c replaced by c/4 the commutator bound must fail somewhere.
        let mut caught = false;
        for i in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let g = DMatrix::<f64>::from_fn(2, 2, |_, _| rng.sample(StandardNormal));
            let s = (&g + g.transpose()) * 0.5;
            let p = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.01]));
            let x = &p * &s;
            let skew2 = (&x - x.transpose()).norm_squared();
            if skew2 > 0.5 * c_of_rho(0.01) * x.norm_squared() {
                caught = true;
            }
        }
        assert!(caught);
    }
}
