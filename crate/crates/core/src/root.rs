//! Bracketed bisection for strictly increasing scalar maps.

use crate::error::{Error, Result};

/// Maximum number of outward doublings before a bracket search gives up.
pub const MAX_EXPANSIONS: usize = 64;

const MAX_BISECTIONS: usize = 400;

/// Find `x*` with `|g(x*)| <= tol` for a strictly increasing `g`.
///
/// The seed bracket is widened by doubling its width on whichever side
/// fails to straddle zero, at most [`MAX_EXPANSIONS`] times, then bisected.
pub fn root_solve_monotone<G>(g: G, seed_bracket: (f64, f64), tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("root tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = if seed_bracket.0 <= seed_bracket.1 {
        seed_bracket
    } else {
        (seed_bracket.1, seed_bracket.0)
    };
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::RootBracketFailure { lo, hi, expansions: 0 });
    }
    if hi - lo < f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
        lo -= 0.5;
        hi += 0.5;
    }

    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    let mut expansions = 0;
    loop {
        if g_lo.is_nan() || g_hi.is_nan() {
            return Err(Error::RootBracketFailure { lo, hi, expansions });
        }
        if g_lo.abs() <= tol {
            return Ok(lo);
        }
        if g_hi.abs() <= tol {
            return Ok(hi);
        }
        if g_lo < 0.0 && g_hi > 0.0 {
            break;
        }
        if expansions == MAX_EXPANSIONS {
            return Err(Error::RootBracketFailure { lo, hi, expansions });
        }
        let width = hi - lo;
        if g_lo > 0.0 {
            lo -= width;
            g_lo = g(lo);
        }
        if g_hi < 0.0 {
            hi += width;
            g_hi = g(hi);
        }
        expansions += 1;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        let g_mid = g(mid);
        if g_mid.is_nan() {
            return Err(Error::RootBracketFailure { lo, hi, expansions });
        }
        if g_mid.abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            // Bracket has collapsed to adjacent floats.
            return Err(Error::RootTolerance { x: mid, residual: g_mid });
        }
        if g_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = lo + 0.5 * (hi - lo);
    Err(Error::RootTolerance { x: mid, residual: g(mid) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-10;

    #[test]
    fn shifted_identity_outside_seed() {
        let x = root_solve_monotone(|x| x - 3.0, (0.0, 1.0), TOL).unwrap();
        assert!((x - 3.0).abs() <= TOL);
    }

    #[test]
    fn affine_root() {
        let x = root_solve_monotone(|x| 2.0 * x + 1.0, (0.0, 1.0), TOL).unwrap();
        assert!((x + 0.5).abs() <= TOL);
    }

    #[test]
    fn cubic_root_at_one() {
        let g = |x: f64| x * x * x + x - 2.0;
        assert_eq!(g(1.0), 0.0);
        let x = root_solve_monotone(g, (-4.0, -3.0), TOL).unwrap();
        assert!(g(x).abs() <= TOL);
        // g' >= 1, so the argument error is at most the residual.
        assert!((x - 1.0).abs() <= TOL);
    }

    #[test]
    fn reversed_or_degenerate_seed_is_accepted() {
        let x = root_solve_monotone(|x| x - 10.0, (5.0, 5.0), TOL).unwrap();
        assert!((x - 10.0).abs() <= TOL);
        let x = root_solve_monotone(|x| x + 7.0, (2.0, -1.0), TOL).unwrap();
        assert!((x + 7.0).abs() <= TOL);
    }

    #[test]
    fn bounded_map_fails_to_bracket() {
        // atan never reaches 2.
        let err = root_solve_monotone(|x: f64| x.atan() - 2.0, (0.0, 1.0), TOL).unwrap_err();
        match err {
            Error::RootBracketFailure { expansions, .. } => assert_eq!(expansions, MAX_EXPANSIONS),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_reported() {
        let err = root_solve_monotone(|_| f64::NAN, (0.0, 1.0), TOL).unwrap_err();
        assert!(matches!(err, Error::RootBracketFailure { .. }));
    }

    #[test]
    fn non_positive_tolerance_rejected() {
        assert!(matches!(
            root_solve_monotone(|x| x, (0.0, 1.0), 0.0),
            Err(Error::InvalidInput(_))
        ));
    }
}
