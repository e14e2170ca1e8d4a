//! `(1 - epsilon, k)`-competition complexity: the smallest scaling `m / n`
//! of the online sequence that lifts the single-threshold ratio to
//! `1 - epsilon`.

use serde::{Deserialize, Serialize};

use crate::binom::{expected_shortfall, poisson_shortfall, Quantile};
use crate::error::{domain, Error, Result};
use crate::lambert::lambert_w_m1;
use crate::scalar::Scalar;

/// Smallest epsilon accepted; below it `ln(1/epsilon)` arithmetic degrades.
pub const MIN_EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityQuery<T> {
    pub k: u64,
    pub epsilon: T,
    pub n: Option<u64>,
    #[serde(default)]
    pub n_grid: Vec<u64>,
}

impl<T: Scalar> ComplexityQuery<T> {
    pub fn new(k: u64, epsilon: T) -> Result<Self> {
        let q = Self {
            k,
            epsilon,
            n: None,
            n_grid: Vec::new(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_n(mut self, n: u64) -> Result<Self> {
        self.n = Some(n);
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_grid(mut self, grid: Vec<u64>) -> Result<Self> {
        self.n_grid = grid;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return domain("k must be at least 1");
        }
        check_epsilon(self.epsilon)?;
        for &n in self.n.iter().chain(self.n_grid.iter()) {
            if n < self.k {
                return domain(format!("need n >= k, got n = {n}, k = {}", self.k));
            }
        }
        Ok(())
    }
}

fn check_epsilon<T: Scalar>(eps: T) -> Result<()> {
    if eps == T::zero() {
        return Err(Error::InfiniteComplexity);
    }
    if eps.is_nan() || eps < T::lit(MIN_EPSILON) || eps >= T::one() {
        return domain(format!("epsilon must lie in [{MIN_EPSILON:e}, 1), got {eps}"));
    }
    Ok(())
}

/// `beta_{k,n}(epsilon) = m / n` for the smallest admissible `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteNComplexity<T> {
    pub m: u64,
    pub n: u64,
    pub ratio: T,
}

/// Smallest `m >= k` with `Q_{m,k}(k/n) >= k (1 - epsilon)`.
///
/// The test is carried out in the equivalent shortfall form
/// `E[(k - Y)_+] <= k epsilon`, which stays accurate for small epsilon.
pub fn beta_finite_n<T: Scalar>(k: u64, n: u64, epsilon: T) -> Result<FiniteNComplexity<T>> {
    if k < 1 || n < k {
        return domain(format!("need n >= k >= 1, got n = {n}, k = {k}"));
    }
    check_epsilon(epsilon)?;
    let q = Quantile::new(T::count(k) / T::count(n))?;
    let budget = T::count(k) * epsilon;
    let ok = |m: u64| -> Result<bool> { Ok(expected_shortfall(m, k, q)? <= budget) };
    let finish = |m: u64| FiniteNComplexity {
        m,
        n,
        ratio: T::count(m) / T::count(n),
    };
    if ok(k)? {
        return Ok(finish(k));
    }
    let mut lo = k;
    let mut hi = k.max(1) * 2;
    while !ok(hi)? {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Internal("m search overflow".into()))?;
    }
    // invariant: !ok(lo), ok(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(finish(hi))
}

/// `psi_k(t, epsilon) = (t (k - 1) + ln(1/epsilon)) / (k (1 - e^{-t}))`.
pub fn psi<T: Scalar>(k: u64, t: T, epsilon: T) -> Result<T> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    if t.is_nan() || t <= T::zero() {
        return domain(format!("psi needs t > 0, got {t}"));
    }
    check_epsilon(epsilon)?;
    Ok(psi_unchecked(k, t, epsilon))
}

fn psi_unchecked<T: Scalar>(k: u64, t: T, epsilon: T) -> T {
    let kk = T::count(k);
    (t * (kk - T::one()) - epsilon.ln()) / (-kk * (-t).exp_m1())
}

fn theta<T: Scalar>(k: u64, epsilon: T) -> T {
    -epsilon.ln() / T::count(k - 1)
}

fn check_t_star_args<T: Scalar>(k: u64, epsilon: T) -> Result<()> {
    if k < 2 {
        return domain("t* is defined for k > 1");
    }
    check_epsilon(epsilon)
}

/// Unique `t > 0` with `e^t = theta + 1 + t`, `theta = ln(1/epsilon) / (k - 1)`,
/// by Newton's method started to the right of the root.
pub fn t_star<T: Scalar>(k: u64, epsilon: T) -> Result<T> {
    check_t_star_args(k, epsilon)?;
    let th = theta(k, epsilon);
    let two = T::lit(2.0);
    // e^{t*} <= 1 + theta + sqrt(theta^2 + 2 theta)
    let mut t = (th + (th * th + two * th).sqrt()).ln_1p();
    for _ in 0..200 {
        let f = t.exp_m1() - t - th;
        let df = t.exp_m1();
        if df <= T::zero() {
            break;
        }
        let step = f / df;
        t = t - step;
        if step.abs() <= T::epsilon() * T::lit(4.0) * t.abs() {
            break;
        }
    }
    Ok(t)
}

/// Closed form `t* = ln(-W_{-1}(-exp(-theta - 1)))`.
pub fn t_star_lambert<T: Scalar>(k: u64, epsilon: T) -> Result<T> {
    check_t_star_args(k, epsilon)?;
    let th = theta(k, epsilon);
    let w = lambert_w_m1(-(-th - T::one()).exp())?;
    Ok((-w).ln())
}

/// `1 + 2 ln(1/eps)/(k-1) + sqrt(2 ln(1/eps)/(k-1))`.
pub fn closed_form_upper<T: Scalar>(k: u64, epsilon: T) -> Result<T> {
    check_t_star_args(k, epsilon)?;
    let two_theta = T::lit(2.0) * theta(k, epsilon);
    Ok(T::one() + two_theta + two_theta.sqrt())
}

/// Smallest `beta` with `E[(k - Z)_+] <= k epsilon` for `Z ~ Poisson(beta k)`:
/// the `n -> infinity` limit of `beta_{k,n}(epsilon)`.
pub fn poisson_estimate<T: Scalar>(k: u64, epsilon: T) -> Result<T> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    check_epsilon(epsilon)?;
    let kk = T::count(k);
    let budget = kk * epsilon;
    let lower = -epsilon.ln() / kk;
    let excess = |beta: T| -> Result<T> { Ok(poisson_shortfall(k, beta * kk)? - budget) };
    if excess(lower)? <= T::zero() {
        return Ok(lower);
    }
    let mut lo = lower;
    let mut hi = if k > 1 {
        closed_form_upper(k, epsilon)?
    } else {
        lower * T::lit(2.0) + T::one()
    };
    while excess(hi)? > T::zero() {
        lo = hi;
        hi = hi * T::lit(2.0);
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0) * hi);
    while hi - lo > tol {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid)? <= T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport<T> {
    pub k: u64,
    pub epsilon: T,
    /// `ln(1/epsilon) / k`.
    pub lower: T,
    /// Best proven upper bound: `psi_k(t*, epsilon)` for `k > 1`, `ln(1/epsilon)` for `k = 1`.
    pub upper: T,
    /// `1 + 2 theta + sqrt(2 theta)`; absent for `k = 1`.
    pub closed_form_upper: Option<T>,
    /// Minimiser of `psi_k(., epsilon)`; absent for `k = 1`, where the infimum is approached as `t -> infinity`.
    pub t_star: Option<T>,
    pub psi_at_t_star: Option<T>,
    /// Limit of `beta_{k,n}` as `n -> infinity`. An estimate of `beta_k` for `k > 1`.
    pub poisson_estimate: T,
    pub finite_n_value: Option<FiniteNComplexity<T>>,
    /// `beta_{k,n}` over the requested grid of `n`.
    pub n_grid_values: Vec<FiniteNComplexity<T>>,
    /// Largest grid value: a certified lower witness for `beta_k`.
    pub n_grid_sup: Option<T>,
}

pub fn beta_bounds<T: Scalar>(query: &ComplexityQuery<T>) -> Result<ComplexityReport<T>> {
    query.validate()?;
    let k = query.k;
    let eps = query.epsilon;
    let log_inv = -eps.ln();
    let lower = log_inv / T::count(k);
    let (upper, closed, t, psi_t) = if k == 1 {
        (log_inv, None, None, None)
    } else {
        let t = t_star(k, eps)?;
        let p = psi_unchecked(k, t, eps);
        let c = closed_form_upper(k, eps)?;
        (p.min(c), Some(c), Some(t), Some(p))
    };
    let poisson = poisson_estimate(k, eps)?;
    let finite_n_value = query.n.map(|n| beta_finite_n(k, n, eps)).transpose()?;
    let n_grid_values = query
        .n_grid
        .iter()
        .map(|&n| beta_finite_n(k, n, eps))
        .collect::<Result<Vec<_>>>()?;
    let n_grid_sup = n_grid_values
        .iter()
        .map(|v| v.ratio)
        .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(ComplexityReport {
        k,
        epsilon: eps,
        lower,
        upper,
        closed_form_upper: closed,
        t_star: t,
        psi_at_t_star: psi_t,
        poisson_estimate: poisson,
        finite_n_value,
        n_grid_values,
        n_grid_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on e^t - t - 1 - theta, independent of the Newton path.
    fn bisect_t_star(theta: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi.exp() - hi - 1.0 - theta < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.exp() - mid - 1.0 - theta < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn finite_n_examples() {
        let r = beta_finite_n::<f64>(1, 1000, 1.0 - 0.7474).unwrap();
        assert_eq!((r.m, r.n), (1376, 1000));
        assert!((r.ratio - 1.376).abs() < 1e-15);
        let r = beta_finite_n(5, 1000, 1.0 - 0.9086).unwrap();
        assert_eq!(r.m, 1244);
        let r = beta_finite_n(1, 1, 0.5).unwrap();
        assert_eq!(r.m, 1);
    }

    #[test]
    fn finite_n_is_minimal() {
        for &(k, n, eps) in &[(1u64, 50u64, 0.1), (3, 40, 0.05), (7, 300, 0.01), (2, 2, 0.3)] {
            let r = beta_finite_n(k, n, eps).unwrap();
            let q = Quantile::new(k as f64 / n as f64).unwrap();
            let target = k as f64 * (1.0 - eps);
            assert!(crate::binom::q_value(r.m, k, q).unwrap() >= target - 1e-12);
            if r.m > k {
                assert!(crate::binom::q_value(r.m - 1, k, q).unwrap() < target);
            }
        }
    }

    #[test]
    fn t_star_examples() {
        let eps = (-1.0f64).exp();
        let t = t_star(2, eps).unwrap();
        let oracle = bisect_t_star(1.0);
        assert!((t - oracle).abs() < 1e-12);
        assert!((t - 1.14619).abs() < 1e-5);
        // psi at t* equals (1 - 1/k) e^{t*}
        let p = psi(2, t, eps).unwrap();
        assert!((p - 0.5 * t.exp()).abs() < 1e-12);
        assert!((p - 1.5731).abs() < 1e-4);
        // theta -> 0 drives t* -> 0
        let t_small = t_star(2, 1.0 - 1e-9).unwrap();
        assert!(t_small > 0.0 && t_small < 1e-3);
    }

    #[test]
    fn newton_and_lambert_agree() {
        for k in 2..=30u64 {
            for &eps in &[0.5f64, 0.1, 1e-2, 1e-4, 1e-6, 1e-12] {
                let a = t_star(k, eps).unwrap();
                let b = t_star_lambert(k, eps).unwrap();
                assert!((a - b).abs() < 1e-10, "k={k} eps={eps}: {a} vs {b}");
                let th = -eps.ln() / (k - 1) as f64;
                let resid = (a.exp() - (th + 1.0 + a)).abs() / a.exp();
                assert!(resid < 1e-12);
            }
        }
    }

    #[test]
    fn psi_examples() {
        let v = psi(2, std::f64::consts::LN_2, 0.5).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(psi(2, 1e-12, 0.5).unwrap() > 1e10);
        assert!(psi(2, 0.0, 0.5).is_err());
        assert!(psi(2, -1.0, 0.5).is_err());
    }

    #[test]
    fn t_star_minimises_psi() {
        for &(k, eps) in &[(2u64, 0.3), (5, 1e-3), (20, 1e-6)] {
            let t = t_star(k, eps).unwrap();
            let best = psi(k, t, eps).unwrap();
            for i in 1..2000 {
                let s = i as f64 * 0.005;
                assert!(psi(k, s, eps).unwrap() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn bounds_examples() {
        let r = beta_bounds(&ComplexityQuery::new(1, 0.01).unwrap()).unwrap();
        let ln100 = 100f64.ln();
        assert!((r.lower - ln100).abs() < 1e-12);
        assert!((r.upper - ln100).abs() < 1e-12);
        assert!((r.poisson_estimate - ln100).abs() < 1e-9);
        assert!((ln100 - 4.60517).abs() < 1e-5);
        assert!(r.t_star.is_none());

        let eps = (-1.0f64).exp();
        let r = beta_bounds(&ComplexityQuery::new(2, eps).unwrap()).unwrap();
        assert!((r.lower - 0.5).abs() < 1e-15);
        let closed = r.closed_form_upper.unwrap();
        assert!((closed - (3.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((r.psi_at_t_star.unwrap() - 1.5731).abs() < 1e-4);
        assert!(r.poisson_estimate >= 0.5 && r.poisson_estimate <= r.upper);
    }

    #[test]
    fn epsilon_domain() {
        assert_eq!(
            ComplexityQuery::new(1, 0.0f64).unwrap_err(),
            Error::InfiniteComplexity
        );
        assert!(ComplexityQuery::new(1, 1.0f64).is_err());
        assert!(ComplexityQuery::new(1, 1e-16f64).is_err());
        assert!(ComplexityQuery::new(3, 0.1f64).unwrap().with_n(2).is_err());
    }

    #[test]
    fn grid_sup_reported() {
        let q = ComplexityQuery::new(2, 0.05)
            .unwrap()
            .with_n_grid(vec![10, 100, 1000])
            .unwrap();
        let r = beta_bounds(&q).unwrap();
        assert_eq!(r.n_grid_values.len(), 3);
        let sup = r.n_grid_values.iter().map(|v| v.ratio).fold(0.0, f64::max);
        assert_eq!(r.n_grid_sup, Some(sup));
    }
}
