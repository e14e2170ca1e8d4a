//! Lower real branch `W_{-1}` of the Lambert W function.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 64;

/// `W_{-1}(x)` for `x` in `[-1/e, 0)`: the solution `w <= -1` of `w e^w = x`.
///
/// Halley iteration from the branch-point series (near `-1/e`) or the
/// logarithmic asymptote (near `0`).
pub fn lambert_w_m1<T: Scalar>(x: T) -> Result<T> {
    let inv_e = (-T::one()).exp();
    if x.is_nan() || x >= T::zero() || x < -inv_e * (T::one() + T::epsilon() * T::lit(4.0)) {
        return domain(format!("W_-1 is defined on [-1/e, 0), got {x}"));
    }
    let branch = T::one() + T::E() * x;
    if branch <= T::zero() {
        return Ok(-T::one());
    }
    let mut w = initial_guess(x, branch);
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let w1 = w + T::one();
        if w1 == T::zero() {
            break;
        }
        let denom = ew * w1 - (w + T::lit(2.0)) * f / (T::lit(2.0) * w1);
        let step = f / denom;
        let next = w - step;
        let done = step.abs() <= T::epsilon() * T::lit(4.0) * w.abs();
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

fn initial_guess<T: Scalar>(x: T, branch: T) -> T {
    if branch < T::lit(0.25) {
        // series about the branch point in p = -sqrt(2 (1 + e x))
        let p = -(T::lit(2.0) * branch).sqrt();
        -T::one() + p - p * p / T::lit(3.0) + T::lit(11.0 / 72.0) * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfies_defining_equation() {
        for &x in &[-0.367_879f64, -0.3, -0.2, -0.1, -1e-3, -1e-10, -1e-100] {
            let w = lambert_w_m1(x).unwrap();
            assert!(w <= -1.0);
            let r = (w * w.exp() - x).abs() / x.abs();
            assert!(r < 1e-13, "x={x} w={w} r={r}");
        }
    }

    #[test]
    fn known_values() {
        // W_{-1}(-ln 2 / 2) = -2 ln 2, since (-2 ln2) e^{-2 ln 2} = -ln2/2
        let x = -std::f64::consts::LN_2 / 2.0;
        let w = lambert_w_m1(x).unwrap();
        assert!((w + 2.0 * std::f64::consts::LN_2).abs() < 1e-14);
        let w = lambert_w_m1(-(-1.0f64).exp()).unwrap();
        assert!((w + 1.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(lambert_w_m1(0.0).is_err());
        assert!(lambert_w_m1(0.5).is_err());
        assert!(lambert_w_m1(-0.5).is_err());
    }
}
