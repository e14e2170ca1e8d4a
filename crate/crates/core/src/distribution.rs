//! Nonnegative distributions described by their upper quantile function
//! `f(u) = F^{-1}(1 - u)`.

use serde::{Deserialize, Serialize};

use crate::binom::{g_kernel_unchecked, q_value_unchecked};
use crate::error::{domain, Result};
use crate::quadrature;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec<T> {
    Uniform {
        lo: T,
        hi: T,
    },
    Exponential {
        rate: T,
    },
    Pareto {
        shape: T,
        scale: T,
    },
    /// Piecewise-linear upper quantile through `(u, value)` knots. The first
    /// knot sits at `u = 0` and the last at `u = 1`.
    QuantileTable {
        knots: Vec<(T, T)>,
    },
    /// Two-point law: `B + A / p` with probability `p`, `B` otherwise.
    AtomWorstCase {
        a: T,
        b: T,
        p: T,
    },
}

impl<T: Scalar> DistributionSpec<T> {
    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn exponential(rate: T) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn pareto(shape: T, scale: T) -> Result<Self> {
        Self::Pareto { shape, scale }.validated()
    }

    pub fn quantile_table(knots: Vec<(T, T)>) -> Result<Self> {
        Self::QuantileTable { knots }.validated()
    }

    pub fn atom_worst_case(a: T, b: T, p: T) -> Result<Self> {
        Self::AtomWorstCase { a, b, p }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: T| x.is_finite();
        match self {
            Self::Uniform { lo, hi } => {
                if !(finite(*lo) && finite(*hi)) || *lo < T::zero() || *hi < *lo {
                    return domain(format!("uniform needs 0 <= lo <= hi, got [{lo}, {hi}]"));
                }
            }
            Self::Exponential { rate } => {
                if !finite(*rate) || *rate <= T::zero() {
                    return domain(format!("exponential rate must be positive, got {rate}"));
                }
            }
            Self::Pareto { shape, scale } => {
                if !finite(*shape) || *shape <= T::one() {
                    return domain(format!(
                        "pareto shape must exceed 1 for a finite mean, got {shape}"
                    ));
                }
                if !finite(*scale) || *scale <= T::zero() {
                    return domain(format!("pareto scale must be positive, got {scale}"));
                }
            }
            Self::QuantileTable { knots } => {
                if knots.len() < 2 {
                    return domain("quantile table needs at least two knots");
                }
                if knots[0].0 != T::zero() || knots[knots.len() - 1].0 != T::one() {
                    return domain("quantile table must start at u = 0 and end at u = 1");
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return domain("quantile table u values must be strictly increasing");
                    }
                    if w[1].1 > w[0].1 {
                        return domain("quantile table values must be nonincreasing in u");
                    }
                }
                if knots
                    .iter()
                    .any(|&(u, v)| !finite(u) || !finite(v) || v < T::zero())
                {
                    return domain("quantile table values must be finite and nonnegative");
                }
            }
            Self::AtomWorstCase { a, b, p } => {
                if !(finite(*a) && finite(*b)) || *a < T::zero() || *b < T::zero() {
                    return domain(format!("atom law needs A, B >= 0, got A = {a}, B = {b}"));
                }
                if !(*p > T::zero() && *p <= T::one()) {
                    return domain(format!("atom resolution p must lie in (0, 1], got {p}"));
                }
            }
        }
        Ok(())
    }

    /// `f(u) = F^{-1}(1 - u)`, nonincreasing in `u`.
    pub fn upper_quantile(&self, u: T) -> T {
        match self {
            Self::Uniform { lo, hi } => *hi - u * (*hi - *lo),
            Self::Exponential { rate } => {
                if u <= T::zero() {
                    T::infinity()
                } else {
                    -u.ln() / *rate
                }
            }
            Self::Pareto { shape, scale } => {
                if u <= T::zero() {
                    T::infinity()
                } else {
                    *scale * u.powf(-shape.recip())
                }
            }
            Self::QuantileTable { knots } => {
                let i = knots.partition_point(|&(x, _)| x <= u);
                if i == 0 {
                    return knots[0].1;
                }
                if i >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (u0, v0) = knots[i - 1];
                let (u1, v1) = knots[i];
                v0 + (v1 - v0) * (u - u0) / (u1 - u0)
            }
            Self::AtomWorstCase { a, b, p } => {
                if u < *p {
                    *b + *a / *p
                } else {
                    *b
                }
            }
        }
    }

    pub fn mean(&self) -> T {
        self.upper_integral(T::one())
    }

    /// `int_0^q f(u) du`, in closed form for every variant.
    pub fn upper_integral(&self, q: T) -> T {
        let half = T::lit(0.5);
        if q <= T::zero() {
            return T::zero();
        }
        match self {
            Self::Uniform { lo, hi } => *hi * q - half * (*hi - *lo) * q * q,
            Self::Exponential { rate } => (q - q * q.ln()) / *rate,
            Self::Pareto { shape, scale } => {
                let e = T::one() - shape.recip();
                *scale * q.powf(e) / e
            }
            Self::QuantileTable { knots } => {
                let mut acc = T::zero();
                for w in knots.windows(2) {
                    let (u0, v0) = w[0];
                    let (u1, v1) = w[1];
                    if u0 >= q {
                        break;
                    }
                    let hi = u1.min(q);
                    let vh = v0 + (v1 - v0) * (hi - u0) / (u1 - u0);
                    acc = acc + half * (v0 + vh) * (hi - u0);
                }
                acc
            }
            Self::AtomWorstCase { a, b, p } => {
                if q < *p {
                    q * (*b + *a / *p)
                } else {
                    *a + q * *b
                }
            }
        }
    }

    /// `int_0^1 g_{n,k}(u) f(u) du`.
    ///
    /// Uses the antiderivative `int_0^x g_{n,k} = Q_{n,k}(x)` for the
    /// piecewise variants and adaptive quadrature for the smooth ones.
    pub(crate) fn kernel_integral(&self, n: u64, k: u64) -> Result<T> {
        match self {
            Self::AtomWorstCase { a, b, p } => Ok(*b * T::count(k) + (*a / *p) * q_value_unchecked(n, k, *p)),
            Self::QuantileTable { knots } => Ok(table_kernel_integral(knots, n, k)),
            Self::Uniform { lo, hi } => {
                // f(u) = hi - (hi - lo) u; int u g = first moment
                let m1 = kernel_first_moment::<T>(n, k);
                Ok(*hi * T::count(k) - (*hi - *lo) * m1)
            }
            Self::Exponential { .. } | Self::Pareto { .. } => {
                let integrand = |u: T| g_kernel_unchecked(n, k, u) * self.upper_quantile(u);
                let tol = T::epsilon().sqrt() * T::lit(1e-4);
                let r = quadrature::integrate(integrand, T::zero(), T::one(), tol, tol, 4000)?;
                Ok(r.value)
            }
        }
    }
}

/// `int_0^1 u g_{n,k}(u) du = sum_{i=1}^{k} i / (n + 1)`, the summed means of
/// the `k` smallest of `n` uniforms.
fn kernel_first_moment<T: Scalar>(n: u64, k: u64) -> T {
    let kk = T::count(k);
    kk * (kk + T::one()) / (T::lit(2.0) * T::count(n + 1))
}

/// `int_0^x u g_{n,k}(u) du = sum_{i=1}^{k} (i / (n + 1)) P[Binomial(n + 1, x) >= i + 1]`.
fn kernel_first_moment_partial<T: Scalar>(n: u64, k: u64, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return kernel_first_moment(n, k);
    }
    let law = crate::binom::BinomialLaw::new(n + 1, x).expect("x in (0,1)");
    let mut acc = T::zero();
    for i in 1..=k {
        acc = acc + T::count(i) * law.upper_tail(i + 1);
    }
    acc / T::count(n + 1)
}

fn table_kernel_integral<T: Scalar>(knots: &[(T, T)], n: u64, k: u64) -> T {
    let mut acc = T::zero();
    for w in knots.windows(2) {
        let (u0, v0) = w[0];
        let (u1, v1) = w[1];
        let slope = (v1 - v0) / (u1 - u0);
        let intercept = v0 - slope * u0;
        let g0 = q_value_unchecked(n, k, u0);
        let g1 = q_value_unchecked(n, k, u1);
        let m0 = kernel_first_moment_partial::<T>(n, k, u0);
        let m1 = kernel_first_moment_partial::<T>(n, k, u1);
        acc = acc + intercept * (g1 - g0) + slope * (m1 - m0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<DistributionSpec<f64>> {
        vec![
            DistributionSpec::uniform(0.0, 1.0).unwrap(),
            DistributionSpec::uniform(2.0, 5.0).unwrap(),
            DistributionSpec::exponential(2.0).unwrap(),
            DistributionSpec::pareto(3.0, 1.0).unwrap(),
            DistributionSpec::quantile_table(vec![(0.0, 10.0), (0.1, 4.0), (0.5, 1.0), (1.0, 0.0)]).unwrap(),
            DistributionSpec::atom_worst_case(0.2, 0.3, 0.01).unwrap(),
        ]
    }

    #[test]
    fn integral_matches_quadrature_of_quantile() {
        for d in catalog() {
            for &q in &[0.003, 0.05, 0.3, 0.77, 1.0] {
                let r = quadrature::integrate(|u| d.upper_quantile(u), 0.0, q, 1e-12, 1e-12, 4000).unwrap();
                let c = d.upper_integral(q);
                // atom breakpoints are discontinuities; allow the adaptive rule some slack
                assert!(
                    (r.value - c).abs() < 1e-8 * c.max(1.0),
                    "{d:?} q={q}: {} vs {c}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn atom_integral_is_exact_beyond_resolution() {
        let d = DistributionSpec::<f64>::atom_worst_case(0.25, 0.5, 0.01).unwrap();
        for &q in &[0.01, 0.2, 1.0] {
            assert!((d.upper_integral(q) - (0.25 + q * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_integral_matches_quadrature() {
        for d in catalog() {
            for &(n, k) in &[(1u64, 1u64), (4, 2), (9, 3), (12, 12)] {
                let oracle = quadrature::integrate(
                    |u| g_kernel_unchecked(n, k, u) * d.upper_quantile(u),
                    0.0,
                    1.0,
                    1e-12,
                    1e-12,
                    4000,
                )
                .unwrap()
                .value;
                let got = d.kernel_integral(n, k).unwrap();
                assert!(
                    (got - oracle).abs() < 1e-7 * oracle.max(1.0),
                    "{d:?} n={n} k={k}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DistributionSpec::uniform(1.0, 0.5).is_err());
        assert!(DistributionSpec::uniform(-1.0, 0.5).is_err());
        assert!(DistributionSpec::exponential(0.0).is_err());
        assert!(DistributionSpec::pareto(1.0, 1.0).is_err());
        assert!(DistributionSpec::quantile_table(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(DistributionSpec::quantile_table(vec![(0.1, 1.0), (1.0, 0.0)]).is_err());
        assert!(DistributionSpec::atom_worst_case(1.0, 0.0, 0.0).is_err());
        assert!(DistributionSpec::atom_worst_case(-1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn means() {
        assert!((DistributionSpec::<f64>::exponential(4.0).unwrap().mean() - 0.25).abs() < 1e-15);
        assert!((DistributionSpec::<f64>::pareto(3.0, 2.0).unwrap().mean() - 3.0).abs() < 1e-14);
        assert!((DistributionSpec::<f64>::uniform(2.0, 4.0).unwrap().mean() - 3.0).abs() < 1e-15);
    }
}
