//! Scalar root finding and one-dimensional minimization used by the
//! threshold and head-start calibration searches.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Finds a root of `f` inside the bracket `[lo, hi]`.
///
/// Uses a secant step whenever it lands safely inside the current bracket
/// and falls back to bisection otherwise, so convergence is guaranteed for
/// any continuous sign-changing function. Terminates when the residual
/// drops to `f_tol` or the bracket width shrinks to `x_tol` (relative to
/// the magnitude of the abscissa).
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an invalid bracket and
/// [`Error::Numeric`] when `f(lo)` and `f(hi)` share a sign or the budget
/// of `max_iter` iterations runs out. Errors from `f` are passed through.
pub fn find_root_bracketed<T: Real>(
    f: impl Fn(T) -> Result<T>,
    lo: T,
    hi: T,
    x_tol: T,
    f_tol: T,
    max_iter: usize,
) -> Result<T> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa.abs() <= f_tol {
        return Ok(a);
    }
    if fb.abs() <= f_tol {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::numeric(format!(
            "no sign change on bracket [{lo}, {hi}]: f(lo)={fa}, f(hi)={fb}"
        )));
    }
    let half = real::<T>(0.5);
    for _ in 0..max_iter {
        let width = b - a;
        let mid = a + half * width;
        if width <= x_tol * T::one().max(mid.abs()) {
            return Ok(mid);
        }
        // Secant candidate from the bracket endpoints; fall back to the
        // midpoint when it degenerates or leaves the bracket interior.
        let denom = fb - fa;
        let mut x = if denom == T::zero() { mid } else { b - fb * width / denom };
        let margin = width * real::<T>(1e-3);
        if !(x > a + margin && x < b - margin) {
            x = mid;
        }
        let fx = f(x)?;
        if fx.abs() <= f_tol {
            return Ok(x);
        }
        if (fx > T::zero()) == (fa > T::zero()) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Err(Error::numeric(format!(
        "root search did not converge in {max_iter} iterations; bracket [{a}, {b}]"
    )))
}

/// Minimizes `f` on `[lo, hi]` by golden-section search.
///
/// Makes no smoothness assumptions beyond unimodality on the bracket, so it
/// also handles kinked objectives such as absolute spreads. Returns the
/// abscissa and value of the located minimum.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an invalid bracket and
/// [`Error::Numeric`] when the width fails to shrink to `x_tol` within
/// `max_iter` iterations. Errors from `f` are passed through.
pub fn golden_section_min<T: Real>(
    f: impl Fn(T) -> Result<T>,
    lo: T,
    hi: T,
    x_tol: T,
    max_iter: usize,
) -> Result<(T, T)> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    let inv_phi = real::<T>(0.618_033_988_749_894_9);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..max_iter {
        if b - a <= x_tol {
            let mid = a + (b - a) * real::<T>(0.5);
            return Ok((mid, f(mid)?));
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Err(Error::numeric(format!(
        "golden-section search did not converge in {max_iter} iterations; bracket [{a}, {b}]"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        let delta = (actual - expected).abs();
        assert!(
            delta <= tol,
            "{what}: expected {expected}, got {actual} (delta={delta:e}, tol={tol:e})"
        );
    }

    #[test]
    fn finds_square_root_of_two() {
        let root =
            find_root_bracketed(|x: f64| Ok(x * x - 2.0), 0.0, 2.0, 1e-15, 1e-14, 200).unwrap();
        assert_close(root, std::f64::consts::SQRT_2, 1e-12, "sqrt(2)");
    }

    #[test]
    fn finds_cosine_zero() {
        let root = find_root_bracketed(|x: f64| Ok(x.cos()), 0.0, 2.0, 1e-15, 1e-14, 200).unwrap();
        assert_close(root, std::f64::consts::FRAC_PI_2, 1e-12, "pi/2");
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        let err = find_root_bracketed(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 1e-12, 100);
        assert!(matches!(err, Err(Error::Numeric(_))), "got {err:?}");
    }

    #[test]
    fn rejects_degenerate_bracket() {
        let err = find_root_bracketed(|x: f64| Ok(x), 1.0, 1.0, 1e-12, 1e-12, 100);
        assert!(matches!(err, Err(Error::InvalidInput(_))), "got {err:?}");
    }

    #[test]
    fn propagates_objective_errors() {
        let err = find_root_bracketed(
            |_: f64| Err(Error::invalid("objective blew up")),
            0.0,
            1.0,
            1e-12,
            1e-12,
            100,
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))), "got {err:?}");
    }

    #[test]
    fn golden_section_finds_smooth_minimum() {
        let (x, v) =
            golden_section_min(|x: f64| Ok((x - 1.3) * (x - 1.3) + 0.25), 0.0, 3.0, 1e-10, 200)
                .unwrap();
        // A smooth minimum is only locatable to about sqrt(eps) times its
        // scale; past that the objective rounds flat.
        assert_close(x, 1.3, 2e-7, "parabola minimizer");
        assert_close(v, 0.25, 1e-14, "parabola minimum value");
    }

    #[test]
    fn golden_section_handles_kinked_objectives() {
        let target = 0.632_435_495_178_921_2;
        let (x, v) =
            golden_section_min(|x: f64| Ok((x - target).abs()), 0.0, 1.5, 1e-10, 200).unwrap();
        assert_close(x, target, 1e-9, "kink location");
        assert!(v < 1e-9, "kink value {v} should be near zero");
    }
}
