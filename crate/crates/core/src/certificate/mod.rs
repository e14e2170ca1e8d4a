//! Numerical verification of the explicit optimal primal/dual pair of the
//! worst-case linear program over nonincreasing quantile functions.
//!
//! Primal: `f(u) = A delta(u) + B` on `(0, 1]` with objective `d`.
//! Dual: `alpha = delta_{k/n}`, `v = Q_{m,k}(k/n) / k`, and the two-branch
//! `eta`. Both objectives are the same expression, so `d == v` bitwise.

mod lp;
mod quasiconcavity;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binom::{
    g_kernel_unchecked, q_deriv_unchecked, q_tangent_gap_unchecked, q_value_unchecked, SelectionInstance,
};
use crate::error::{domain, Error, Result};
use crate::ratio::{phi_curve, phi_value};
use crate::scalar::Scalar;

pub use lp::{solve_discretized_lp, LpCrossCheck, MAX_LP_CELLS, MIN_LP_CELLS};
pub use quasiconcavity::{check_low_competition_shape, check_quasiconcavity, QuasiconcavityProfile};

/// Relative tolerance on primal constraint violations and on equality at `k/n`.
pub const PRIMAL_REL_TOL: f64 = 1e-10;
/// Tolerance on the residual of the dual equality constraint.
pub const DUAL_EQ_TOL: f64 = 1e-10;
/// Lowest admissible value of `eta` on a grid.
pub const ETA_FLOOR: f64 = -1e-12;
/// Slack for identities that hold exactly in real arithmetic.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalCertificate<T> {
    pub a: T,
    pub b: T,
    pub d: T,
}

impl<T: Scalar> PrimalCertificate<T> {
    /// `A = k Q'(k/n) / (n^2 Q(k/n))`, `B = 1/k - Q'(k/n) / (n Q(k/n))`, `d = Q(k/n)/k`.
    ///
    /// `B` is evaluated as `(Q - qQ')(k/n) / (k Q(k/n))` through the tail
    /// form of `Q - qQ'`, which avoids the cancellation in `1/k - Q'/(nQ)`
    /// when `k/n` is small.
    pub fn build(inst: &SelectionInstance) -> Self {
        let (m, n, k) = (inst.m(), inst.n(), inst.k());
        let q = inst.critical_quantile::<T>();
        let qv = q_value_unchecked(m, k, q);
        let qd = q_deriv_unchecked(m, k, q);
        let (nn, kk) = (T::count(n), T::count(k));
        Self {
            a: kk * qd / (nn * nn * qv),
            b: q_tangent_gap_unchecked(m, k, q) / (kk * qv),
            d: dual_objective(inst),
        }
    }

    /// `A n + B k`, equal to one for the optimal pair.
    pub fn normalization(&self, inst: &SelectionInstance) -> T {
        self.a * T::count(inst.n()) + self.b * T::count(inst.k())
    }

    /// A normalized pair `(A', (1 - n A') / k)` with `d'` raised to the grid
    /// supremum of `phi`, i.e. the cheapest feasible objective on that grid.
    pub fn repaired(inst: &SelectionInstance, a: T, grid: &GridSpec<T>) -> Result<Self> {
        let n = T::count(inst.n());
        if a < T::zero() || a * n > T::one() {
            return domain(format!("atom mass must lie in [0, 1/n], got {a}"));
        }
        let b = (T::one() - n * a) / T::count(inst.k());
        let mut cert = Self { a, b, d: T::zero() };
        cert.d = grid
            .points()
            .iter()
            .map(|&q| phi_value(&cert, inst.m(), inst.k(), q))
            .fold(T::zero(), T::max);
        Ok(cert)
    }
}

fn dual_objective<T: Scalar>(inst: &SelectionInstance) -> T {
    q_value_unchecked(inst.m(), inst.k(), inst.critical_quantile::<T>()) / T::count(inst.k())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate<T> {
    pub v: T,
    /// Location of the unit atom of `alpha`.
    pub atom_location: T,
    /// `Q_{m,k}(k/n)`.
    pub q_hat: T,
    pub n: u64,
    pub k: u64,
}

impl<T: Scalar> DualCertificate<T> {
    pub fn build(inst: &SelectionInstance) -> Self {
        let q = inst.critical_quantile::<T>();
        Self {
            v: dual_objective(inst),
            atom_location: q,
            q_hat: q_value_unchecked(inst.m(), inst.k(), q),
            n: inst.n(),
            k: inst.k(),
        }
    }

    /// Total mass of `alpha` (a single unit atom).
    pub fn alpha_mass(&self) -> T {
        T::one()
    }

    fn slope(&self) -> T {
        T::count(self.n) / T::count(self.k) * self.q_hat
    }

    /// `eta(u)`; uses `int_0^u g_{n,k} = Q_{n,k}(u)`.
    pub fn eta(&self, u: T) -> T {
        let g_int = q_value_unchecked(self.n, self.k, u);
        if u <= self.atom_location {
            self.slope() * u - self.v * g_int
        } else {
            self.q_hat - self.v * g_int
        }
    }

    /// `eta'(u)` from the branch formula.
    pub fn eta_derivative(&self, u: T) -> T {
        let g = g_kernel_unchecked(self.n, self.k, u);
        if u <= self.atom_location {
            self.slope() - self.v * g
        } else {
            -self.v * g
        }
    }

    /// Right-hand side of the dual equality: `int_u^1 alpha(q) Q(q)/q dq`.
    pub fn dual_rhs(&self, u: T) -> T {
        if u <= self.atom_location {
            self.slope()
        } else {
            T::zero()
        }
    }
}

pub fn build_certificates<T: Scalar>(inst: &SelectionInstance) -> (PrimalCertificate<T>, DualCertificate<T>) {
    (PrimalCertificate::build(inst), DualCertificate::build(inst))
}

/// Sorted evaluation grid over `[0, 1]` containing both endpoints and `k/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    points: Vec<T>,
    breakpoint: usize,
}

impl<T: Scalar> GridSpec<T> {
    /// `points` uniform nodes `i / (points - 1)` plus the breakpoint `k/n`.
    pub fn new(points: usize, inst: &SelectionInstance) -> Result<Self> {
        if points < 2 {
            return domain("grid needs at least two points");
        }
        let bp = inst.critical_quantile::<T>();
        let last = T::from_usize(points - 1).expect("usize");
        let mut v: Vec<T> = (0..points)
            .map(|i| T::from_usize(i).expect("usize") / last)
            .collect();
        let pos = v.partition_point(|&x| x < bp);
        if pos >= v.len() || v[pos] != bp {
            v.insert(pos, bp);
        }
        Ok(Self {
            points: v,
            breakpoint: pos,
        })
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn breakpoint_index(&self) -> usize {
        self.breakpoint
    }

    pub fn interior(&self) -> &[T] {
        &self.points[1..self.points.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One verification record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport<T> {
    pub instance: SelectionInstance,
    pub check: String,
    pub max_residual: T,
    pub passed: bool,
    /// Point where the residual is largest (or where a failure occurred).
    pub witness: Option<T>,
}

impl<T: Scalar> CheckReport<T> {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Verification {
                check: self.check.clone(),
                detail: format!("{} residual {}", self.instance, self.max_residual),
                witness: self.witness.map(|w| w.as_f64()),
            })
        }
    }
}

struct Worst<T> {
    value: T,
    at: Option<T>,
}

impl<T: Scalar> Worst<T> {
    fn new() -> Self {
        Self {
            value: T::neg_infinity(),
            at: None,
        }
    }

    fn offer(&mut self, value: T, at: T) {
        if value > self.value || value.is_nan() {
            self.value = value;
            self.at = Some(at);
        }
    }
}

/// Primal constraint `d >= (Q(q)/q)(A + q B)` on the grid with equality at `k/n`,
/// plus `A, B >= 0` and the normalization `A n + B k = 1`.
pub fn check_primal_feasibility<T: Scalar>(
    cert: &PrimalCertificate<T>,
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
) -> CheckReport<T> {
    let tol = T::lit(PRIMAL_REL_TOL);
    let d = cert.d;
    let mut worst = Worst::new();
    let mut violated = false;
    for &q in grid.points() {
        let phi = phi_value(cert, inst.m(), inst.k(), q);
        let excess = (phi - d) / d;
        worst.offer(excess, q);
        if !(excess <= tol) {
            violated = true;
        }
    }
    let bp = inst.critical_quantile::<T>();
    let gap = (phi_value(cert, inst.m(), inst.k(), bp) - d).abs() / d;
    if !(gap <= tol) {
        violated = true;
        worst.offer(gap, bp);
    }
    let norm_gap = (cert.normalization(inst) - T::one()).abs();
    let signs_ok = cert.a >= T::zero() && cert.b >= T::zero();
    let norm_ok = norm_gap <= T::lit(IDENTITY_TOL);
    CheckReport {
        instance: *inst,
        check: "primal_feasibility".into(),
        max_residual: worst.value.max(gap),
        passed: !violated && signs_ok && norm_ok,
        witness: worst.at,
    }
}

/// Unit mass of alpha, the dual equality `v g(u) + eta'(u) = (n/k) Q(k/n) 1[u <= k/n]`,
/// `eta >= 0` and `eta(0) = eta(1) = 0`.
pub fn check_dual_feasibility<T: Scalar>(
    cert: &DualCertificate<T>,
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
) -> CheckReport<T> {
    let eq_tol = T::lit(DUAL_EQ_TOL);
    let floor = T::lit(ETA_FLOOR);
    let mut worst = Worst::new();
    let mut ok = (cert.alpha_mass() - T::one()).abs() <= T::lit(IDENTITY_TOL);
    for &u in grid.points() {
        let g = g_kernel_unchecked(cert.n, cert.k, u);
        let lhs = cert.v * g + cert.eta_derivative(u);
        let rhs = cert.dual_rhs(u);
        let scale = T::one().max(rhs.abs()).max((cert.v * g).abs());
        let resid = (lhs - rhs).abs() / scale;
        worst.offer(resid, u);
        if !(resid <= eq_tol) {
            ok = false;
        }
        let eta = cert.eta(u);
        if !(eta >= floor) {
            ok = false;
            worst.offer(-eta, u);
        }
    }
    for end in [T::zero(), T::one()] {
        let e = cert.eta(end).abs();
        if !(e <= T::lit(IDENTITY_TOL) * T::count(cert.k).max(T::one())) {
            ok = false;
            worst.offer(e, end);
        }
    }
    CheckReport {
        instance: *inst,
        check: "dual_feasibility".into(),
        max_residual: worst.value,
        passed: ok,
        witness: worst.at,
    }
}

/// The grid maximum of `phi` on `i / (points - 1)` is attained, up to
/// `1e-12` relative, at one of the two nodes bracketing `k/n`, and no node
/// outside that cell exceeds them.
pub fn check_phi_argmax<T: Scalar>(inst: &SelectionInstance, points: usize) -> Result<CheckReport<T>> {
    let curve = phi_curve::<T>(inst, points)?;
    let last = points - 1;
    let bp = inst.critical_quantile::<T>() * T::from_usize(last).expect("usize");
    let lo = bp.floor().to_usize().unwrap_or(0).min(last);
    let hi = bp.ceil().to_usize().unwrap_or(last).min(last);
    let top = curve.max_value();
    let cell = curve.points[lo].1.max(curve.points[hi].1);
    let shortfall = (top - cell) / top;
    let slack = T::one() + T::lit(4.0) * T::epsilon();
    let intruder = curve
        .points
        .iter()
        .enumerate()
        .find(|&(i, p)| i != lo && i != hi && p.1 > cell * slack)
        .map(|(_, p)| p.0);
    Ok(CheckReport {
        instance: *inst,
        check: "phi_argmax".into(),
        max_residual: shortfall,
        passed: shortfall <= T::lit(1e-12) && intruder.is_none(),
        witness: intruder.or(Some(curve.points[curve.argmax].0)),
    })
}

/// Weak duality for one primal point: `d' >= v`.
pub fn weak_duality_holds<T: Scalar>(primal: &PrimalCertificate<T>, dual: &DualCertificate<T>) -> bool {
    primal.d >= dual.v * (T::one() - T::lit(IDENTITY_TOL))
}

/// Summary of randomized weak-duality probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakDualityReport<T> {
    pub instance: SelectionInstance,
    pub trials: usize,
    /// Smallest `d' - v` seen over all probes.
    pub min_gap: T,
    /// Smallest Stieltjes sum `int f d eta` over the step-function probes.
    pub min_stieltjes: T,
    pub passed: bool,
}

/// Random feasible primal points versus the dual certificate.
///
/// Half the probes perturb the atom mass `A` (keeping `A n + B k = 1`), the
/// other half draw a random nonincreasing step function with an atom at 0.
/// Each `d'` is the grid supremum of the primal constraint, and each step
/// function also checks `int f d eta >= 0` by Stieltjes summation.
pub fn check_weak_duality<T: Scalar>(
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
    trials: usize,
    seed: u64,
) -> Result<WeakDualityReport<T>> {
    let dual = DualCertificate::build(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = T::count(inst.n());
    let mut min_gap = T::infinity();
    let mut min_stieltjes = T::infinity();
    let mut passed = true;
    for t in 0..trials {
        let d_prime = if t % 2 == 0 {
            let a = T::lit(rng.random::<f64>()) / n;
            let p = PrimalCertificate::repaired(inst, a, grid)?;
            p.d
        } else {
            let (d, stieltjes) = random_step_probe(inst, grid, &dual, &mut rng);
            min_stieltjes = min_stieltjes.min(stieltjes);
            if !(stieltjes >= T::lit(-1e-10)) {
                passed = false;
            }
            d
        };
        let probe = PrimalCertificate {
            a: T::zero(),
            b: T::zero(),
            d: d_prime,
        };
        if !weak_duality_holds(&probe, &dual) {
            passed = false;
        }
        min_gap = min_gap.min(d_prime - dual.v);
    }
    Ok(WeakDualityReport {
        instance: *inst,
        trials,
        min_gap,
        passed,
        min_stieltjes,
    })
}

/// Returns `(d', int f d eta)` for a random normalized nonincreasing step
/// function on the grid cells plus an atom at 0.
fn random_step_probe<T: Scalar>(
    inst: &SelectionInstance,
    grid: &GridSpec<T>,
    dual: &DualCertificate<T>,
    rng: &mut ChaCha8Rng,
) -> (T, T) {
    let pts = grid.points();
    let cells = pts.len() - 1;
    // nonincreasing values as suffix sums of nonnegative increments
    let mut incr: Vec<T> = (0..cells)
        .map(|_| {
            let x: f64 = rng.random();
            T::lit(if x < 0.8 { 0.0 } else { x })
        })
        .collect();
    incr[cells - 1] = incr[cells - 1] + T::lit(rng.random::<f64>());
    let mut values = vec![T::zero(); cells];
    let mut acc = T::zero();
    for i in (0..cells).rev() {
        acc = acc + incr[i];
        values[i] = acc;
    }
    let atom = T::lit(rng.random::<f64>());
    // normalization: atom * g(0) + sum f_i (G(u_{i+1}) - G(u_i)), G = Q_{n,k}
    let (n, k) = (inst.n(), inst.k());
    let mut norm = atom * T::count(n);
    for i in 0..cells {
        norm = norm + values[i] * (q_value_unchecked(n, k, pts[i + 1]) - q_value_unchecked(n, k, pts[i]));
    }
    let scale = norm.recip();
    let mut integral = atom * scale;
    let mut d = T::zero();
    for i in 0..cells {
        integral = integral + values[i] * scale * (pts[i + 1] - pts[i]);
        let q = pts[i + 1];
        d = d.max(q_value_unchecked(inst.m(), k, q) / q * integral);
    }
    // int f d eta over (0, 1]; the atom sits at 0 where eta(0) = 0 is continuous
    let mut stieltjes = T::zero();
    for i in 0..cells {
        stieltjes = stieltjes + values[i] * scale * (dual.eta(pts[i + 1]) - dual.eta(pts[i]));
    }
    (d, stieltjes)
}
