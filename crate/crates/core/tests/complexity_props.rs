use proptest::prelude::*;

use prophetcomp::{beta_bounds, beta_finite_n, expected_shortfall, poisson_estimate, psi, ComplexityQuery};
use prophetcomp::{BinomialLaw, Quantile};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chernoff_dominance(n in 1u64..500, kf in 0.0f64..1.0, extra in 0u64..500, t in 0.01f64..5.0) {
        let k = 1 + ((n - 1) as f64 * kf) as u64;
        let m = k + extra;
        let q = k as f64 / n as f64;
        let law = BinomialLaw::new(m, q).unwrap();
        let tail = law.cdf(k - 1);
        let bound = (t * (k as f64 - 1.0) - k as f64 * (m as f64 / n as f64) * (1.0 - (-t).exp())).exp();
        prop_assert!(tail <= bound * (1.0 + 1e-12), "{tail} > {bound}");
    }

    #[test]
    fn shortfall_exceeds_empty_mass(n in 1u64..500, kf in 0.0f64..1.0, extra in 0u64..500) {
        let k = 1 + ((n - 1) as f64 * kf) as u64;
        let m = k + extra;
        let q = k as f64 / n as f64;
        let s = expected_shortfall(m, k, Quantile::new(q).unwrap()).unwrap();
        prop_assert!(s >= k as f64 * (1.0 - q).powf(m as f64) * (1.0 - 1e-12));
    }
}

#[test]
fn finite_n_approaches_poisson() {
    for eps in [0.5f64, 0.1, 0.01] {
        let target = poisson_estimate(1, eps).unwrap();
        let mut prev = f64::INFINITY;
        for n in [100u64, 1000, 10_000, 100_000] {
            let dev = (beta_finite_n(1, n, eps).unwrap().ratio - target).abs();
            assert!(dev <= prev, "eps={eps} n={n}: {dev} > {prev}");
            prev = dev;
        }
        assert!(prev < 1e-4);
    }
}

#[test]
fn sandwich() {
    for k in 2..=50u64 {
        for eps in [1e-1f64, 1e-2, 1e-4, 1e-6] {
            let r = beta_bounds(&ComplexityQuery::new(k, eps).unwrap()).unwrap();
            let upper = r.upper;
            assert!(r.lower <= r.poisson_estimate, "k={k} eps={eps}");
            assert!(r.poisson_estimate <= upper, "k={k} eps={eps}");
            assert!(upper <= r.closed_form_upper.unwrap() + 1e-9);
            let t = r.t_star.unwrap();
            assert!((r.psi_at_t_star.unwrap() - (1.0 - 1.0 / k as f64) * t.exp()).abs() < 1e-10);
        }
    }
}

#[test]
fn psi_is_convex_in_t() {
    for k in 2..=20u64 {
        for eps in [0.3f64, 1e-3, 1e-8] {
            let ts: Vec<f64> = (0..400)
                .map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 399.0))
                .collect();
            let ps: Vec<f64> = ts.iter().map(|&t| psi(k, t, eps).unwrap()).collect();
            for i in 1..ts.len() - 1 {
                // second divided difference on the nonuniform grid
                let l = (ps[i] - ps[i - 1]) / (ts[i] - ts[i - 1]);
                let r = (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i]);
                let scale = ps[i].abs().max(1.0) / (ts[i + 1] - ts[i - 1]);
                assert!(r - l >= -1e-9 * scale, "k={k} eps={eps} t={}", ts[i]);
            }
        }
    }
}

#[test]
fn k_one_collapses() {
    for eps in [0.5f64, 0.1, 0.01, 1e-4] {
        let r = beta_bounds(&ComplexityQuery::new(1, eps).unwrap()).unwrap();
        let ln = (1.0 / eps).ln();
        for v in [r.lower, r.upper, r.poisson_estimate] {
            assert!((v - ln).abs() < 1e-9);
        }
    }
}
