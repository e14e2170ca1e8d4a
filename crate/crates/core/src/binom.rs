//! Binomial and Poisson primitives, the acceptance-count function `Q_{m,k}`
//! and the order-statistic kernel `g_{n,k}`.
//!
//! Probability mass sums walk the ratio recurrence `p_{l+1} / p_l` in log
//! space outward from the mode, seeded by a saddle-point evaluation of
//! `ln p` that stays accurate for supports of size `10^7` and beyond. The
//! endpoints `q = 0` and `q = 1` are handled by their analytic limits.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

/// The triple `(m, n, k)`: `m` values observed online, a prophet sequence of
/// length `n`, and a selection budget `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct SelectionInstance {
    m: u64,
    n: u64,
    k: u64,
}

#[derive(Deserialize)]
struct RawInstance {
    m: u64,
    n: u64,
    k: u64,
}

impl TryFrom<RawInstance> for SelectionInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        SelectionInstance::new(raw.m, raw.n, raw.k)
    }
}

impl SelectionInstance {
    pub fn new(m: u64, n: u64, k: u64) -> Result<Self> {
        if k < 1 {
            return domain("selection budget k must be at least 1");
        }
        if n < k {
            return domain(format!("need n >= k, got n = {n}, k = {k}"));
        }
        if m < k {
            return domain(format!("need m >= k, got m = {m}, k = {k}"));
        }
        Ok(Self { m, n, k })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// The optimal threshold quantile `k / n`.
    pub fn critical_quantile<T: Scalar>(&self) -> T {
        T::count(self.k) / T::count(self.n)
    }
}

impl std::fmt::Display for SelectionInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(m={}, n={}, k={})", self.m, self.n, self.k)
    }
}

/// A probability level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quantile<T>(T);

impl<T: Scalar> Quantile<T> {
    pub fn new(q: T) -> Result<Self> {
        if q.is_nan() || q < T::zero() || q > T::one() {
            return domain(format!("quantile must lie in [0, 1], got {q}"));
        }
        Ok(Self(q))
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Binomial law with `trials` draws and success probability `success`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialLaw<T> {
    trials: u64,
    success: T,
}

impl<T: Scalar> BinomialLaw<T> {
    pub fn new(trials: u64, success: T) -> Result<Self> {
        let success = Quantile::new(success)?.get();
        Ok(Self { trials, success })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn success(&self) -> T {
        self.success
    }

    pub fn mean(&self) -> T {
        T::count(self.trials) * self.success
    }

    /// `ln P[Y = ell]`.
    pub fn ln_pmf(&self, ell: u64) -> Result<T> {
        if ell > self.trials {
            return domain(format!("outcome {ell} outside support 0..={}", self.trials));
        }
        Ok(ln_pmf_unchecked(self.trials, self.success, ell))
    }

    fn chain(&self) -> Chain<T, impl Fn(u64) -> T + '_, impl Fn(u64) -> T + '_> {
        binomial_chain(self.trials, self.success)
    }

    /// `P[Y <= j]`, summing whichever side of the mean `j` lies on.
    pub fn cdf(&self, j: u64) -> T {
        let q = self.success;
        if j >= self.trials || q == T::zero() {
            return T::one();
        }
        if q == T::one() {
            return T::zero();
        }
        let c = self.chain();
        let v = if T::count(j) < self.mean() {
            c.sum(0, j, |_| T::one())
        } else {
            T::one() - c.sum(j + 1, self.trials, |_| T::one())
        };
        v.max(T::zero()).min(T::one())
    }

    /// `P[Y >= j]`.
    pub fn upper_tail(&self, j: u64) -> T {
        if j == 0 {
            return T::one();
        }
        if j > self.trials || self.success == T::zero() {
            return T::zero();
        }
        if self.success == T::one() {
            return T::one();
        }
        let c = self.chain();
        let v = if T::count(j) > self.mean() {
            c.sum(j, self.trials, |_| T::one())
        } else {
            T::one() - c.sum(0, j - 1, |_| T::one())
        };
        v.max(T::zero()).min(T::one())
    }
}

/// A unimodal pmf on `0..=last`, summed by walking outward from a seed
/// point with the ratio recurrence `ln(p_{l+1} / p_l) = step(l)`.
///
/// Seeds come from an accurate closed-form `ln p`, placed at the mode when
/// the summation range contains it. Rounding in a log-space walk grows with
/// `|ln p|`, so starting where `p` is largest keeps the dominant terms exact;
/// terms far from the mode are negligible and walks stop once they are.
struct Chain<T, Seed, Step> {
    last: u64,
    mode: u64,
    seed: Seed,
    step: Step,
    _scalar: PhantomData<fn() -> T>,
}

impl<T: Scalar, Seed: Fn(u64) -> T, Step: Fn(u64) -> T> Chain<T, Seed, Step> {
    /// `sum_{l = lo}^{hi} w(l) p_l`.
    fn sum(&self, lo: u64, hi: u64, w: impl Fn(u64) -> T) -> T {
        let hi = hi.min(self.last);
        if lo > hi {
            return T::zero();
        }
        let tiny = T::epsilon() * T::lit(1e-3);
        let start = self.mode.clamp(lo, hi);
        let lp0 = (self.seed)(start);
        let mut acc = w(start) * lp0.exp();
        let mut lp = lp0;
        let mut ell = start;
        while ell < hi {
            lp = lp + (self.step)(ell);
            ell += 1;
            let term = w(ell) * lp.exp();
            acc = acc + term;
            if ell > self.mode && term <= tiny * acc {
                break;
            }
        }
        lp = lp0;
        ell = start;
        while ell > lo {
            ell -= 1;
            lp = lp - (self.step)(ell);
            let term = w(ell) * lp.exp();
            acc = acc + term;
            if ell < self.mode && term <= tiny * acc {
                break;
            }
        }
        acc
    }
}

fn binomial_chain<T: Scalar>(trials: u64, q: T) -> Chain<T, impl Fn(u64) -> T, impl Fn(u64) -> T> {
    let odds = q.ln() - (-q).ln_1p();
    let mode = (T::count(trials + 1) * q)
        .floor()
        .to_u64()
        .unwrap_or(0)
        .min(trials);
    Chain {
        last: trials,
        mode,
        seed: move |ell| ln_pmf_unchecked(trials, q, ell),
        step: move |ell| pmf_ratio_ln::<T>(trials, ell) + odds,
        _scalar: PhantomData,
    }
}

fn poisson_chain<T: Scalar>(lambda: T) -> Chain<T, impl Fn(u64) -> T, impl Fn(u64) -> T> {
    let ln_l = lambda.ln();
    Chain {
        last: u64::MAX,
        mode: lambda.floor().to_u64().unwrap_or(u64::MAX),
        seed: move |ell| {
            if ell == 0 {
                -lambda
            } else {
                let x = T::count(ell);
                -stirling_error::<T>(ell) - deviance(x, lambda) - T::lit(0.5) * (T::TAU() * x).ln()
            }
        },
        step: move |ell| ln_l - T::count(ell + 1).ln(),
        _scalar: PhantomData,
    }
}

/// `(E[min{k, Y}], E[(k - Y)_+])` from a chain with mean `mean`.
///
/// The shortfall is always summed directly. `E[min{k, Y}]` is `mean` minus
/// the excess `E[(Y - k)_+]` when `mean < k` and `k` minus the shortfall
/// otherwise; in both cases the subtracted sum is the smaller side.
fn min_and_shortfall<T: Scalar>(
    k: u64,
    mean: T,
    chain: &Chain<T, impl Fn(u64) -> T, impl Fn(u64) -> T>,
) -> (T, T) {
    let kk = T::count(k);
    let shortfall = chain.sum(0, k - 1, |ell| T::count(k - ell));
    let min = if mean < kk {
        mean - chain.sum(k + 1, chain.last, |ell| T::count(ell - k))
    } else {
        kk - shortfall
    };
    (min.max(T::zero()).min(kk), shortfall)
}

/// `ln C(n, r)` as a sum of `min(r, n - r)` logarithms.
pub(crate) fn ln_choose<T: Scalar>(n: u64, r: u64) -> T {
    debug_assert!(r <= n);
    let r = r.min(n - r);
    let mut acc = T::zero();
    for i in 1..=r {
        acc = acc + (T::count(n - r + i) / T::count(i)).ln();
    }
    acc
}

/// `ln(p_{l+1} / p_l)` minus the log-odds term, i.e. `ln((trials - l) / (l + 1))`.
fn pmf_ratio_ln<T: Scalar>(trials: u64, ell: u64) -> T {
    (T::count(trials - ell) / T::count(ell + 1)).ln()
}

fn ln_pmf_unchecked<T: Scalar>(trials: u64, q: T, ell: u64) -> T {
    if q == T::zero() {
        return if ell == 0 { T::zero() } else { T::neg_infinity() };
    }
    if q == T::one() {
        return if ell == trials {
            T::zero()
        } else {
            T::neg_infinity()
        };
    }
    if ell == 0 {
        return T::count(trials) * (-q).ln_1p();
    }
    if ell == trials {
        return T::count(trials) * q.ln();
    }
    // saddle-point form: O(1) per point, no cancellation for large supports
    let (n, x) = (T::count(trials), T::count(ell));
    let y = n - x;
    let lc = stirling_error::<T>(trials)
        - stirling_error::<T>(ell)
        - stirling_error::<T>(trials - ell)
        - deviance(x, n * q)
        - deviance(y, n * (T::one() - q));
    lc - T::lit(0.5) * (T::TAU() * x * y / n).ln()
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirling_error<T: Scalar>(n: u64) -> T {
    if n <= 15 {
        let nn = T::count(n);
        let ln_fact = (2..=n).fold(T::zero(), |acc, i| acc + T::count(i).ln());
        let base = if n == 0 {
            T::zero()
        } else {
            T::lit(0.5) * (T::TAU() * nn).ln() + nn * nn.ln() - nn
        };
        return ln_fact - base;
    }
    let nn = T::count(n);
    let inv2 = (nn * nn).recip();
    let (s0, s1, s2, s3, s4) = (
        T::lit(1.0 / 12.0),
        T::lit(1.0 / 360.0),
        T::lit(1.0 / 1260.0),
        T::lit(1.0 / 1680.0),
        T::lit(1.0 / 1188.0),
    );
    (s0 - (s1 - (s2 - (s3 - s4 * inv2) * inv2) * inv2) * inv2) / nn
}

/// `x ln(x / np) + np - x`, summed as a series when `x` is close to `np`.
fn deviance<T: Scalar>(x: T, np: T) -> T {
    if (x - np).abs() < T::lit(0.1) * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = T::lit(2.0) * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej = ej * v2;
            let s1 = s + ej / T::count(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// `ln P[Y = ell]` for `Y ~ Binomial(law.trials, law.success)`.
pub fn binom_pmf_log<T: Scalar>(law: &BinomialLaw<T>, ell: u64) -> Result<T> {
    law.ln_pmf(ell)
}

fn check_mk(m: u64, k: u64) -> Result<()> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    if m < k {
        return domain(format!("need m >= k, got m = {m}, k = {k}"));
    }
    Ok(())
}

/// `Q_{m,k}(q) = E[min{k, Y}]` for `Y ~ Binomial(m, q)`: the expected number
/// of acceptances of a threshold policy with acceptance probability `q`.
pub fn q_value<T: Scalar>(m: u64, k: u64, q: Quantile<T>) -> Result<T> {
    check_mk(m, k)?;
    Ok(q_value_unchecked(m, k, q.get()))
}

pub(crate) fn q_value_unchecked<T: Scalar>(m: u64, k: u64, q: T) -> T {
    binomial_min_shortfall(m, k, q).0
}

/// `Q_{m,k}(q) - q Q'_{m,k}(q) = k P[Y >= k + 1]`, since `q Q' = E[Y; Y <= k]`.
pub(crate) fn q_tangent_gap_unchecked<T: Scalar>(m: u64, k: u64, q: T) -> T {
    let law = BinomialLaw {
        trials: m,
        success: q,
    };
    T::count(k) * law.upper_tail(k + 1)
}

/// `E[(k - Y)_+]` for `Y ~ Binomial(m, q)`, computed without cancellation.
pub fn expected_shortfall<T: Scalar>(m: u64, k: u64, q: Quantile<T>) -> Result<T> {
    check_mk(m, k)?;
    Ok(binomial_min_shortfall(m, k, q.get()).1)
}

fn binomial_min_shortfall<T: Scalar>(m: u64, k: u64, q: T) -> (T, T) {
    let kk = T::count(k);
    if q == T::zero() {
        return (T::zero(), kk);
    }
    if q == T::one() {
        return (kk, T::zero());
    }
    min_and_shortfall(k, T::count(m) * q, &binomial_chain(m, q))
}

/// `Q'_{m,k}(q) = m P[Binomial(m - 1, q) <= k - 1]`.
pub fn q_deriv<T: Scalar>(m: u64, k: u64, q: Quantile<T>) -> Result<T> {
    check_mk(m, k)?;
    Ok(q_deriv_unchecked(m, k, q.get()))
}

pub(crate) fn q_deriv_unchecked<T: Scalar>(m: u64, k: u64, q: T) -> T {
    let law = BinomialLaw {
        trials: m - 1,
        success: q,
    };
    T::count(m) * law.cdf(k - 1)
}

/// `Q''_{m,k}(q) = -m (m - 1) C(m - 2, k - 1) q^{k-1} (1 - q)^{m-k-1}`,
/// identically zero when `m = k`.
pub fn q_second_deriv<T: Scalar>(m: u64, k: u64, q: Quantile<T>) -> Result<T> {
    check_mk(m, k)?;
    let q = q.get();
    if m == k {
        return Ok(T::zero());
    }
    let c = T::count(m) * T::count(m - 1);
    let lw = ln_beta_weight(m, k, q);
    Ok(-c * lw.exp())
}

/// `ln w(q)` with `w(q) = C(m - 2, k - 1) q^{k-1} (1 - q)^{m-k-1}`, for `m > k`.
pub(crate) fn ln_beta_weight<T: Scalar>(m: u64, k: u64, q: T) -> T {
    debug_assert!(m > k);
    let pow_ln = |base_ln: T, e: u64| {
        if e == 0 {
            T::zero()
        } else {
            T::count(e) * base_ln
        }
    };
    ln_choose::<T>(m - 2, k - 1) + pow_ln(q.ln(), k - 1) + pow_ln((-q).ln_1p(), m - k - 1)
}

/// `g_{n,k}(u) = sum_{l=n-k+1}^{n} l C(n, l) (1 - u)^{l-1} u^{n-l}`.
pub fn g_kernel<T: Scalar>(n: u64, k: u64, u: T) -> Result<T> {
    check_mk(n, k)?;
    Quantile::new(u).map_err(|_| Error::Domain(format!("kernel argument must lie in [0, 1], got {u}")))?;
    Ok(g_kernel_unchecked(n, k, u))
}

pub(crate) fn g_kernel_unchecked<T: Scalar>(n: u64, k: u64, u: T) -> T {
    if u == T::zero() {
        // only l = n survives: n (1 - 0)^{n-1}
        return T::count(n);
    }
    if u == T::one() {
        // only l = 1 with u^{n-1} survives, present when k = n
        return if k == n { T::count(n) } else { T::zero() };
    }
    let ln_u = u.ln();
    let ln_1mu = (-u).ln_1p();
    let mut acc = T::zero();
    for ell in (n - k + 1)..=n {
        let lt = T::count(ell).ln()
            + ln_choose::<T>(n, ell)
            + T::count(ell - 1) * ln_1mu
            + T::count(n - ell) * ln_u;
        acc = acc + lt.exp();
    }
    acc
}

/// `E[min{k, Z}]` for `Z ~ Poisson(lambda)`.
pub fn poisson_min_expectation<T: Scalar>(k: u64, lambda: T) -> Result<T> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    if lambda.is_nan() || lambda < T::zero() {
        return domain(format!("lambda must be nonnegative, got {lambda}"));
    }
    Ok(poisson_min_shortfall(k, lambda).0)
}

/// `E[(k - Z)_+]` for `Z ~ Poisson(lambda)`.
pub fn poisson_shortfall<T: Scalar>(k: u64, lambda: T) -> Result<T> {
    if k < 1 {
        return domain("k must be at least 1");
    }
    if lambda.is_nan() || lambda < T::zero() {
        return domain(format!("lambda must be nonnegative, got {lambda}"));
    }
    Ok(poisson_min_shortfall(k, lambda).1)
}

fn poisson_min_shortfall<T: Scalar>(k: u64, lambda: T) -> (T, T) {
    if lambda == T::zero() {
        return (T::zero(), T::count(k));
    }
    if lambda.is_infinite() {
        return (T::count(k), T::zero());
    }
    min_and_shortfall(k, lambda, &poisson_chain(lambda))
}
