//! Numerical integration: globally adaptive Gauss–Kronrod (7/15) and
//! fixed-order Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: T,
    pub subdivisions: usize,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Scalar> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl<T: Scalar> Eq for Segment<T> {}

impl<T: Scalar> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center);
    let mut gauss = fc * T::lit(WG[3]);
    let mut kronrod = fc * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod = kronrod + T::lit(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let value = kronrod * radius;
    let error = ((kronrod - gauss) * radius).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |value|)`. The integrand is never evaluated at the
/// endpoints, so integrable endpoint singularities are allowed.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_subdivisions: usize,
) -> Result<Integral<T>> {
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            abs_error: T::zero(),
            subdivisions: 0,
        });
    }
    let (v0, e0) = kronrod15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total = v0;
    let mut err = e0;
    let mut count = 1;
    let half = T::lit(0.5);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if count >= max_subdivisions {
            return Err(Error::Internal(format!(
                "quadrature did not converge: estimate {total}, error {err} after {count} segments"
            )));
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = half * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at working precision
            heap.push(Segment {
                error: T::zero(),
                ..seg
            });
            err = heap.iter().fold(T::zero(), |s, x| s + x.error);
            total = heap.iter().fold(T::zero(), |s, x| s + x.value);
            continue;
        }
        let (v1, e1) = kronrod15(&f, seg.a, mid);
        let (v2, e2) = kronrod15(&f, mid, seg.b);
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        count += 1;
        // resum to keep rounding from drifting across many updates
        total = heap.iter().fold(T::zero(), |s, x| s + x.value);
        err = heap.iter().fold(T::zero(), |s, x| s + x.error);
    }
    Ok(Integral {
        value: total,
        abs_error: err,
        subdivisions: count,
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
/// Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1);
    let mut out = vec![(T::zero(), T::zero()); n];
    let nn = T::from_usize(n).expect("usize");
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess
        let theta = T::PI() * (T::from_usize(i).expect("usize") + T::lit(0.75)) / (nn + T::lit(0.5));
        let mut x = theta.cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre_with_deriv(n, x);
        if d != T::zero() {
            dp = d;
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = T::zero();
    }
    out
}

fn legendre_with_deriv<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for j in 2..=n {
        let jf = T::from_usize(j).expect("usize");
        let p2 = ((T::lit(2.0) * jf - T::one()) * x * p1 - (jf - T::one()) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize(n).expect("usize");
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Applies a rule from [`gauss_legendre`] on `[a, b]`.
pub fn apply_rule<T: Scalar, F: Fn(T) -> T>(rule: &[(T, T)], f: F, a: T, b: T) -> T {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let r = half * (b - a);
    rule.iter().fold(T::zero(), |acc, &(x, w)| acc + w * f(c + r * x)) * r
}
