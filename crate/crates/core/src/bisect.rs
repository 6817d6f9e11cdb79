use crate::error::{Error, Result};

/// Root of a nondecreasing function on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Stops as soon as `|f(x)| ≤ tol`, or when the bracket can no longer be
/// split in floating point, in which case the endpoint with the smaller
/// residual is returned.
pub(crate) fn increasing_root<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    let mut f_hi = f(hi)?;
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::Numerical(format!(
            "root not bracketed on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if !f_mid.is_finite() {
            return Err(Error::Numerical(format!("non-finite residual at {mid}")));
        }
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
        Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
    } else {
        Err(Error::Numerical(format!(
            "bisection did not reach tolerance {tol} in {max_iter} iterations"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = increasing_root(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn endpoint_roots() {
        assert_eq!(increasing_root(Ok, 0.0, 1.0, 1e-12, 200).unwrap(), 0.0);
        assert_eq!(increasing_root(|x| Ok(x - 1.0), 0.0, 1.0, 1e-12, 200).unwrap(), 1.0);
    }

    #[test]
    fn unbracketed_fails() {
        assert!(increasing_root(|x| Ok(x + 1.0), 0.0, 1.0, 1e-12, 200).is_err());
    }

    #[test]
    fn step_function_collapses_bracket() {
        // No point satisfies the tolerance; the bracket shrinks to the jump.
        let r = increasing_root(|x| Ok(if x < 0.3 { -1.0 } else { 1.0 }), 0.0, 1.0, 1e-12, 200).unwrap();
        assert!((r - 0.3).abs() < 1e-15);
    }
}
