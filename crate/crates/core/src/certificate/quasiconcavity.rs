//! Shape of `phi(q) = (Q(q)/q)(A + qB)`: for `m >= k + 2` through the ratio
//! `R(q) = q^2 I(q) / J(q)`, for `m in {k, k + 1}` directly.
//!
//! With `w(q) = C(m-2, k-1) q^{k-1} (1-q)^{m-k-1}`, `I(q) = int_q^1 w` and
//! `J(q) = int_0^q t w(t) dt`, we have `Q' = c I` and `Q - q Q' = c J` for
//! `c = m(m-1)`, so `phi'` has the sign of `B R(q) - A`. `R` is decreasing
//! iff `h = 2IJ - q w J - q^2 w I < 0`. All three integrals are evaluated in
//! log space by a Gauss-Legendre rule that is exact for their integrands.

use serde::{Deserialize, Serialize};

use super::{CheckReport, GridSpec, PrimalCertificate};
use crate::binom::{ln_beta_weight, q_deriv_unchecked, q_tangent_gap_unchecked, SelectionInstance};
use crate::error::{domain, Result};
use crate::quadrature::gauss_legendre;
use crate::ratio::phi_value;
use crate::scalar::{log_add_exp, Scalar};

/// Relative tolerance for the `Q' = cI` and `Q - qQ' = cJ` identities.
pub const IDENTITY_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiconcavityProfile<T> {
    pub points: Vec<T>,
    pub ln_r: Vec<T>,
    /// `h / (I J)`; same sign as `h`.
    pub h_scaled: Vec<T>,
    /// `h` at `q = 0` and `q = 1`.
    pub h_endpoints: (T, T),
    /// Points where `|h / (IJ)|` is below the cancellation floor.
    pub unresolved: usize,
    pub identity_residual: T,
    pub sign_mismatches: usize,
    pub report: CheckReport<T>,
}

struct LogIntegrals<T> {
    rule: Vec<(T, T)>,
    m: u64,
    k: u64,
}

impl<T: Scalar> LogIntegrals<T> {
    fn new(m: u64, k: u64) -> Self {
        // integrands have degree at most m - 1
        let nodes = (m as usize).div_ceil(2) + 1;
        Self {
            rule: gauss_legendre(nodes),
            m,
            k,
        }
    }

    fn ln_w(&self, q: T) -> T {
        if q == T::zero() && self.k > 1 {
            return T::neg_infinity();
        }
        if q == T::one() {
            return T::neg_infinity();
        }
        ln_beta_weight(self.m, self.k, q)
    }

    /// `ln int_a^b t^p w(t) dt` for `p` in {0, 1}.
    fn ln_integral(&self, a: T, b: T, with_t: bool) -> T {
        if b <= a {
            return T::neg_infinity();
        }
        let half = (b - a) * T::lit(0.5);
        let mid = (b + a) * T::lit(0.5);
        self.rule.iter().fold(T::neg_infinity(), |acc, &(x, wt)| {
            let t = mid + half * x;
            let mut term = (wt * half).ln() + self.ln_w(t);
            if with_t {
                term = term + t.ln();
            }
            log_add_exp(acc, term)
        })
    }

    fn ln_i(&self, q: T) -> T {
        self.ln_integral(q, T::one(), false)
    }

    fn ln_j(&self, q: T) -> T {
        self.ln_integral(T::zero(), q, true)
    }
}

/// Requires `m >= k + 2`. Checks, over the interior grid points, that
/// `h < 0` (hence `R` strictly decreasing), that `h(0) = h(1) = 0`, the two
/// derivative identities, `R(k/n) = A/B`, and that `sign(phi')` computed from
/// closed forms matches `sign(R(q) - R(k/n))`.
pub fn check_quasiconcavity<T: Scalar>(
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
) -> Result<QuasiconcavityProfile<T>> {
    let (m, k) = (inst.m(), inst.k());
    if m < k + 2 {
        return domain(format!("quasiconcavity analysis needs m >= k + 2, got {inst}"));
    }
    let li = LogIntegrals::<T>::new(m, k);
    let c = T::count(m) * T::count(m - 1);
    let ln_c = c.ln();
    let cert = PrimalCertificate::<T>::build(inst);
    let bp = inst.critical_quantile::<T>();
    let ln_r_star = T::lit(2.0) * bp.ln() + li.ln_i(bp) - li.ln_j(bp);
    let floor = T::epsilon() * T::lit(64.0);

    let points: Vec<T> = grid.interior().to_vec();
    let mut ln_r = Vec::with_capacity(points.len());
    let mut h_scaled = Vec::with_capacity(points.len());
    let mut unresolved = 0;
    let mut identity_residual = T::zero();
    let mut sign_mismatches = 0;
    let mut passed = true;
    let mut worst: (T, Option<T>) = (T::neg_infinity(), None);

    for &q in &points {
        let (lw, ln_iq, ln_jq) = (li.ln_w(q), li.ln_i(q), li.ln_j(q));
        let lr = T::lit(2.0) * q.ln() + ln_iq - ln_jq;
        let hs = T::lit(2.0) - (q.ln() + lw - ln_iq).exp() - (T::lit(2.0) * q.ln() + lw - ln_jq).exp();
        if hs.abs() <= floor {
            unresolved += 1;
        } else if hs > T::zero() {
            passed = false;
            if hs > worst.0 {
                worst = (hs, Some(q));
            }
        }

        let qd = q_deriv_unchecked(m, k, q);
        // Q' underflows near q = 1 for large m; compare absolutely there
        let tiny = T::min_positive_value().sqrt();
        let r1 = ((ln_c + ln_iq).exp() - qd).abs() / qd.max(tiny);
        let gap_q = q_tangent_gap_unchecked(m, k, q);
        let r2 = ((ln_c + ln_jq).exp() - gap_q).abs() / gap_q.max(tiny);
        identity_residual = identity_residual.max(r1).max(r2);

        let t1 = -cert.a * gap_q;
        let t2 = cert.b * q * q * qd;
        let num = t1 + t2;
        let gap = lr - ln_r_star;
        let sig = T::lit(1e-9);
        let resolved = num.abs() > sig * (t1.abs() + t2.abs()) && gap.abs() > sig;
        if resolved && (num > T::zero()) != (gap > T::zero()) {
            sign_mismatches += 1;
            if worst.1.is_none() {
                worst.1 = Some(q);
            }
        }
        ln_r.push(lr);
        h_scaled.push(hs);
    }
    for w in ln_r.windows(2) {
        if !(w[1] < w[0] + T::lit(1e-13) * T::one().max(w[0].abs())) {
            passed = false;
        }
    }

    // endpoints, in linear space: J(0) = 0, I(1) = 0 and w(1) = 0
    let h_at = |q: T| {
        let (i, j, w) = (li.ln_i(q).exp(), li.ln_j(q).exp(), li.ln_w(q).exp());
        T::lit(2.0) * i * j - q * w * j - q * q * w * i
    };
    let h_endpoints = (h_at(T::zero()), h_at(T::one()));
    if h_endpoints.0 != T::zero() || h_endpoints.1 != T::zero() {
        passed = false;
    }
    // k = n puts the breakpoint at q = 1, where R vanishes along with A
    let ab_gap = if inst.k() == inst.n() {
        cert.a.abs()
    } else {
        (ln_r_star - (cert.a / cert.b).ln()).abs()
    };
    if !(identity_residual <= T::lit(IDENTITY_REL_TOL)) || !(ab_gap <= T::lit(IDENTITY_REL_TOL)) {
        passed = false;
    }
    if sign_mismatches > 0 {
        passed = false;
    }
    let max_residual = identity_residual.max(ab_gap).max(worst.0.max(T::zero()));
    Ok(QuasiconcavityProfile {
        points,
        ln_r,
        h_scaled,
        h_endpoints,
        unresolved,
        identity_residual,
        sign_mismatches,
        report: CheckReport {
            instance: *inst,
            check: "quasiconcavity".into(),
            max_residual,
            passed,
            witness: worst.1,
        },
    })
}

/// `m = k`: `phi` is constant on `(0, 1]`. `m = k + 1`: `phi` is concave,
/// checked through decreasing slopes of successive grid secants.
pub fn check_low_competition_shape<T: Scalar>(
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
) -> Result<CheckReport<T>> {
    let (m, k) = (inst.m(), inst.k());
    let cert = PrimalCertificate::<T>::build(inst);
    let pts = grid.points();
    let phi: Vec<T> = pts.iter().map(|&q| phi_value(&cert, m, k, q)).collect();
    let top = phi.iter().copied().fold(T::zero(), T::max);
    let mut worst = T::zero();
    let mut witness = None;
    let passed;
    if m == k {
        for (&q, &p) in pts.iter().zip(&phi).skip(1) {
            let r = (p - cert.d).abs() / cert.d;
            if r > worst {
                worst = r;
                witness = Some(q);
            }
        }
        passed = worst <= T::lit(1e-12);
    } else if m == k + 1 {
        let min_h = pts.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min);
        let tol = T::lit(1e3) * T::epsilon() * top / min_h;
        let slopes: Vec<T> = (0..pts.len() - 1)
            .map(|i| (phi[i + 1] - phi[i]) / (pts[i + 1] - pts[i]))
            .collect();
        for (i, s) in slopes.windows(2).enumerate() {
            let rise = s[1] - s[0];
            if rise > worst {
                worst = rise;
                witness = Some(pts[i + 1]);
            }
        }
        passed = worst <= tol;
    } else {
        return domain(format!("direct shape check covers m in {{k, k+1}}, got {inst}"));
    }
    Ok(CheckReport {
        instance: *inst,
        check: "phi_shape".into(),
        max_residual: worst,
        passed,
        witness,
    })
}
