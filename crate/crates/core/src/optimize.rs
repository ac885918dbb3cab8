//! One-dimensional minimisation by golden-section search.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimise `f` on [a, b], assuming it is unimodal there. Stops when the
/// bracket is shorter than `x_tol` or after `max_iter` reductions; the
/// returned point is the best one evaluated.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, x_tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 2;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..max_iter {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
        evaluations += 1;
    }
    Ok(Minimum {
        x: best.0,
        value: best.1,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let m = golden_section(|x| Ok((x - 0.3).powi(2) + 1.0), -2.0, 5.0, 1e-10, 200).unwrap();
        assert!((m.x - 0.3).abs() < 1e-8);
        assert!((m.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn respects_bracket_ends() {
        let m = golden_section(Ok, 1.0, 2.0, 1e-12, 200).unwrap();
        assert!((m.x - 1.0).abs() < 1e-10);
    }
}
