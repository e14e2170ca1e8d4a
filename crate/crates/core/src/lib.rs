//! Single-threshold policies for selecting `k` of `m` i.i.d. values against a
//! prophet who sees `n` values: exact competitive ratios, competition
//! complexity bounds, numerical verification of the worst-case LP
//! certificates, and a Monte Carlo oracle.
//!
//! The numerical core is generic over [`Scalar`] (any `num_traits::Float`);
//! the aliases below fix it to `f64`, with `*32` variants for `f32`.

// `!(x <= tol)` is deliberate throughout: NaN must fail a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binom;
pub mod certificate;
pub mod complexity;
pub mod distribution;
pub mod error;
pub mod lambert;
pub mod mc;
pub mod quadrature;
pub mod ratio;
pub mod scalar;
pub mod simplex;

pub use binom::{
    binom_pmf_log, expected_shortfall, g_kernel, poisson_min_expectation, poisson_shortfall, q_deriv,
    q_second_deriv, q_value, SelectionInstance,
};
pub use certificate::{
    build_certificates, check_dual_feasibility, check_low_competition_shape, check_phi_argmax,
    check_primal_feasibility, check_quasiconcavity, check_weak_duality, solve_discretized_lp,
    weak_duality_holds,
};
pub use complexity::{
    beta_bounds, beta_finite_n, closed_form_upper, poisson_estimate, psi, t_star, t_star_lambert,
};
pub use error::{Error, Result};
pub use mc::{
    empirical_ratio_scan, simulate_joint, simulate_prophet, simulate_threshold, McConfig, McEstimate,
    TieBreak,
};
pub use ratio::{alg_value, competitive_ratio, opt_value, phi_curve};
pub use scalar::Scalar;

pub type Quantile = binom::Quantile<f64>;
pub type BinomialLaw = binom::BinomialLaw<f64>;
pub type DistributionSpec = distribution::DistributionSpec<f64>;
pub type RatioResult = ratio::RatioResult<f64>;
pub type PhiCurve = ratio::PhiCurve<f64>;
pub type ComplexityQuery = complexity::ComplexityQuery<f64>;
pub type ComplexityReport = complexity::ComplexityReport<f64>;
pub type FiniteNComplexity = complexity::FiniteNComplexity<f64>;
pub type PrimalCertificate = certificate::PrimalCertificate<f64>;
pub type DualCertificate = certificate::DualCertificate<f64>;
pub type GridSpec = certificate::GridSpec<f64>;
pub type CheckReport = certificate::CheckReport<f64>;
pub type WeakDualityReport = certificate::WeakDualityReport<f64>;
pub type QuasiconcavityProfile = certificate::QuasiconcavityProfile<f64>;
pub type LpCrossCheck = certificate::LpCrossCheck<f64>;

pub type Quantile32 = binom::Quantile<f32>;
pub type DistributionSpec32 = distribution::DistributionSpec<f32>;
pub type RatioResult32 = ratio::RatioResult<f32>;
pub type ComplexityReport32 = complexity::ComplexityReport<f32>;
