use prophetcomp::mc::{simulate_joint, McConfig, TieBreak};
use prophetcomp::Quantile;
use prophetcomp::{
    alg_value, competitive_ratio, opt_value, simulate_threshold, DistributionSpec, SelectionInstance,
};

fn catalog() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::uniform(0.0, 1.0).unwrap(),
        DistributionSpec::exponential(2.0).unwrap(),
        DistributionSpec::pareto(4.0, 1.0).unwrap(),
        DistributionSpec::quantile_table(vec![(0.0, 5.0), (0.2, 2.0), (1.0, 0.5)]).unwrap(),
    ]
}

#[test]
fn identical_under_any_thread_count() {
    let d = DistributionSpec::exponential(1.0).unwrap();
    let inst = SelectionInstance::new(9, 7, 3).unwrap();
    let qs = [0.1, 3.0 / 7.0, 0.8];
    let base = simulate_joint(&d, &inst, &qs, &McConfig::new(50_000, 77).with_threads(1)).unwrap();
    for t in [2, 4] {
        let other = simulate_joint(&d, &inst, &qs, &McConfig::new(50_000, 77).with_threads(t)).unwrap();
        assert_eq!(base, other);
    }
    let again = simulate_joint(&d, &inst, &qs, &McConfig::new(50_000, 77)).unwrap();
    assert_eq!(base, again);
}

#[test]
fn accept_all_policy_is_monotone_in_q() {
    // k = m: each extra acceptance adds a nonnegative value under shared draws
    let d = DistributionSpec::pareto(3.0, 1.0).unwrap();
    let inst = SelectionInstance::new(4, 6, 4).unwrap();
    let qs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let j = simulate_joint(&d, &inst, &qs, &McConfig::new(20_000, 3)).unwrap();
    for w in j.alg.windows(2) {
        assert!(w[1].mean >= w[0].mean);
    }
}

#[test]
fn guarantee_direction_and_closed_forms() {
    let cfg = McConfig::new(200_000, 11);
    for d in catalog() {
        for &(m, n, k) in &[(5u64, 5u64, 1u64), (8, 6, 2), (6, 10, 3)] {
            let inst = SelectionInstance::new(m, n, k).unwrap();
            let q = inst.critical_quantile::<f64>();
            let j = simulate_joint(&d, &inst, &[q], &cfg).unwrap();
            let gamma = competitive_ratio::<f64>(&inst).gamma;
            let r = j.ratio[0];
            assert!(r.ratio >= gamma - 4.0 * r.stderr, "{inst} {d:?}");
            let alg = alg_value(&d, m, k, Quantile::new(q).unwrap()).unwrap();
            let opt = opt_value(&d, n, k).unwrap();
            assert!(j.alg[0].z_score(alg).abs() <= 4.0, "{inst} {d:?}");
            assert!(j.opt.z_score(opt).abs() <= 4.0, "{inst} {d:?}");
        }
    }
}

#[test]
fn point_mass_at_threshold_follows_quantile_model() {
    // f = 1 on [0, 0.5) then 1 on [0.5, 1]: a single atom; q inside it
    let d = DistributionSpec::atom_worst_case(0.0, 1.0, 0.5).unwrap();
    let cfg = McConfig::new(200_000, 4).with_tie_break(TieBreak::UniformNoise);
    for q in [0.1, 0.35, 0.9] {
        let e = simulate_threshold(&d, 3, 1, q, &cfg).unwrap();
        let model = 1.0 - (1.0 - q).powi(3);
        assert!(e.z_score(model).abs() <= 4.0, "q={q}");
    }
}

#[test]
fn stderr_is_sample_sd_over_root_n() {
    let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
    let e = simulate_threshold(&d, 1, 1, 1.0, &McConfig::new(400_000, 8)).unwrap();
    let sd = (1.0f64 / 12.0).sqrt();
    assert!((e.stderr - sd / (400_000f64).sqrt()).abs() < 0.01 * e.stderr);
}
