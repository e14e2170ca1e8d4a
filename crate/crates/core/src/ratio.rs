//! Threshold-policy value, prophet value, and the exact single-threshold
//! competitive ratio `gamma_{m,n,k} = Q_{m,k}(k/n) / k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binom::{q_value_unchecked, Quantile, SelectionInstance};
use crate::certificate::PrimalCertificate;
use crate::distribution::DistributionSpec;
use crate::error::{domain, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioResult<T> {
    pub gamma: T,
    pub optimal_quantile: T,
    pub instance: SelectionInstance,
}

/// Expected reward of the threshold policy that accepts the first `k` of `m`
/// values above `F^{-1}(1 - q)`: `(Q_{m,k}(q) / q) int_0^q f`.
pub fn alg_value<T: Scalar>(dist: &DistributionSpec<T>, m: u64, k: u64, q: Quantile<T>) -> Result<T> {
    if k < 1 || m < k {
        return domain(format!("need m >= k >= 1, got m = {m}, k = {k}"));
    }
    dist.validate()?;
    let q = q.get();
    if q == T::zero() {
        return Ok(T::zero());
    }
    Ok(q_value_unchecked(m, k, q) / q * dist.upper_integral(q))
}

/// Prophet value `OPT_{n,k}(F) = int_0^1 g_{n,k}(u) f(u) du`: the expected sum
/// of the `k` largest of `n` draws.
pub fn opt_value<T: Scalar>(dist: &DistributionSpec<T>, n: u64, k: u64) -> Result<T> {
    if k < 1 || n < k {
        return domain(format!("need n >= k >= 1, got n = {n}, k = {k}"));
    }
    dist.validate()?;
    let v = dist.kernel_integral(n, k)?;
    if !v.is_finite() {
        return domain("prophet value is not finite for this distribution");
    }
    Ok(v)
}

pub fn competitive_ratio<T: Scalar>(inst: &SelectionInstance) -> RatioResult<T> {
    let q = inst.critical_quantile::<T>();
    RatioResult {
        gamma: q_value_unchecked(inst.m(), inst.k(), q) / T::count(inst.k()),
        optimal_quantile: q,
        instance: *inst,
    }
}

/// The curve `phi(q) = (Q_{m,k}(q) / q)(A + q B)` for the worst-case
/// certificate constants, with `phi(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve<T> {
    pub points: Vec<(T, T)>,
    /// Index of the largest value (first one on ties).
    pub argmax: usize,
}

impl<T: Scalar> PhiCurve<T> {
    pub fn max_value(&self) -> T {
        self.points[self.argmax].1
    }

    /// Indices whose value is within `rel_tol` of the maximum.
    pub fn near_argmax(&self, rel_tol: T) -> Vec<usize> {
        let top = self.max_value();
        let floor = top - rel_tol * top.abs();
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 >= floor)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn phi_value<T: Scalar>(cert: &PrimalCertificate<T>, m: u64, k: u64, q: T) -> T {
    if q <= T::zero() {
        return T::zero();
    }
    q_value_unchecked(m, k, q) / q * (cert.a + q * cert.b)
}

/// Evaluates `phi` on the uniform grid `i / (grid - 1)`.
pub fn phi_curve<T: Scalar>(inst: &SelectionInstance, grid: usize) -> Result<PhiCurve<T>> {
    if grid < 2 {
        return domain("phi grid needs at least two points");
    }
    let cert = PrimalCertificate::build(inst);
    let last = T::from_usize(grid - 1).expect("usize");
    let points: Vec<(T, T)> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let q = T::from_usize(i).expect("usize") / last;
            (q, phi_value(&cert, inst.m(), inst.k(), q))
        })
        .collect();
    let argmax = points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.1 > points[best].1 { i } else { best });
    Ok(PhiCurve { points, argmax })
}
