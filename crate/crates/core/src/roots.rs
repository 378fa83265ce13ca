//! Bracketed root finding for monotone scalar equations.
//!
//! The distance solver needs roots of strictly monotone functions with a
//! pole at one end of the bracket, so plain Newton is not safe. The hybrid
//! here bisects until the bracket is narrow and only then lets Newton polish,
//! keeping every iterate inside the current bracket.

use crate::error::{HeisError, Result};
use crate::scalar::Scalar;

/// Controls for [`bisect_newton`].
#[derive(Debug, Clone, Copy)]
pub struct HybridConfig<T> {
    /// Bracket width at which bisection hands over to Newton.
    pub bisect_width: T,
    /// Newton stops once `|g(x)| <= residual_tol * scale`.
    pub residual_tol: T,
    pub max_bisections: usize,
    pub max_newton: usize,
}

impl<T: Scalar> Default for HybridConfig<T> {
    fn default() -> Self {
        let width = T::lit(1e-6).max(T::epsilon() * T::lit(64.0));
        HybridConfig { bisect_width: width, residual_tol: T::solver_tol(), max_bisections: 200, max_newton: 40 }
    }
}

/// Root of `g` on `[lo, hi]` where `g(lo) <= 0 <= g(hi)` up to sign
/// convention: `increasing` says whether `g` grows with `x`.
///
/// `g` returns the pair `(g(x), g'(x))`. `scale` is the magnitude used for
/// the relative residual test (typically the target value).
pub fn bisect_newton<T, G>(
    mut g: G,
    mut lo: T,
    mut hi: T,
    increasing: bool,
    scale: T,
    cfg: &HybridConfig<T>,
) -> Result<T>
where
    T: Scalar,
    G: FnMut(T) -> (T, T),
{
    if !(lo < hi) {
        return Err(HeisError::InvalidArgument(format!("empty bracket [{lo}, {hi}]")));
    }
    let sign = if increasing { T::one() } else { -T::one() };
    let half = T::lit(0.5);
    let tol = cfg.residual_tol * scale.abs().max(T::min_positive_value());

    let mut n = 0;
    while hi - lo > cfg.bisect_width && n < cfg.max_bisections {
        let mid = half * (lo + hi);
        let (v, _) = g(mid);
        if !v.is_finite() {
            return Err(HeisError::Numeric(format!("non-finite residual at {mid}")));
        }
        if v == T::zero() {
            return Ok(mid);
        }
        if sign * v < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        n += 1;
    }

    let mut x = half * (lo + hi);
    for _ in 0..cfg.max_newton {
        let (v, dv) = g(x);
        if !v.is_finite() {
            return Err(HeisError::Numeric(format!("non-finite residual at {x}")));
        }
        if v.abs() <= tol {
            return Ok(x);
        }
        if sign * v < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if dv != T::zero() && dv.is_finite() { x - v / dv } else { T::nan() };
        if !(next > lo && next < hi) {
            next = half * (lo + hi);
        }
        if (next - x).abs() <= T::epsilon() * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    // Residual target was not reached within the iteration cap; the bracket
    // is already narrow so the midpoint is still a good answer.
    Ok(x)
}

/// Plain bisection on a monotone `g`, run until the bracket is `width` wide.
pub fn bisect<T, G>(mut g: G, mut lo: T, mut hi: T, increasing: bool, width: T) -> Result<T>
where
    T: Scalar,
    G: FnMut(T) -> T,
{
    if !(lo < hi) {
        return Err(HeisError::InvalidArgument(format!("empty bracket [{lo}, {hi}]")));
    }
    let sign = if increasing { T::one() } else { -T::one() };
    let half = T::lit(0.5);
    for _ in 0..400 {
        if hi - lo <= width {
            break;
        }
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if !v.is_finite() {
            return Err(HeisError::Numeric(format!("non-finite residual at {mid}")));
        }
        if sign * v < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(half * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect_newton(|x: f64| (x * x - 2.0, 2.0 * x), 0.0, 2.0, true, 2.0, &HybridConfig::default()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn decreasing_function_with_pole() {
        // g(x) = 1/x − 3 on (0, 1], pole at 0
        let r =
            bisect_newton(|x: f64| (1.0 / x - 3.0, -1.0 / (x * x)), 1e-300, 1.0, false, 3.0, &HybridConfig::default())
                .unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bad_derivative_falls_back_to_bisection() {
        let r =
            bisect_newton(|x: f64| (x.powi(3) - 0.001, 0.0), -1.0, 1.0, true, 1.0, &HybridConfig::default()).unwrap();
        assert!((r - 0.1).abs() < 1e-6);
    }

    #[test]
    fn empty_bracket_rejected() {
        assert!(bisect(|x: f64| x, 1.0, 1.0, true, 1e-9).is_err());
        assert!(bisect_newton(|x: f64| (x, 1.0), 2.0, 1.0, true, 1.0, &HybridConfig::default()).is_err());
    }

    #[test]
    fn plain_bisection() {
        let r = bisect(|x: f64| x.cos() - x, 0.0, 1.0, false, 1e-14).unwrap();
        assert!((r.cos() - r).abs() < 1e-13);
    }
}
