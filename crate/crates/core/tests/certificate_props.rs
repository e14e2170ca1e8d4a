use proptest::prelude::*;

use prophetcomp::certificate::GridSpec;
use prophetcomp::{
    build_certificates, check_dual_feasibility, check_low_competition_shape, check_primal_feasibility,
    check_quasiconcavity, check_weak_duality, phi_curve, SelectionInstance,
};

fn instance(max_k: u64, max_n: u64, max_m: u64) -> impl Strategy<Value = SelectionInstance> {
    (1u64..=max_k, 0u64..max_n, 0u64..max_m).prop_filter_map("valid", move |(k, dn, dm)| {
        let n = (k + dn).min(max_n);
        SelectionInstance::new((k + dm).min(max_m), n, k).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn zero_duality_gap(inst in instance(20, 100, 400)) {
        let grid = GridSpec::new(2000, &inst).unwrap();
        let (p, d) = build_certificates::<f64>(&inst);
        prop_assert_eq!(p.d.to_bits(), d.v.to_bits());
        prop_assert!(p.a >= 0.0 && p.b >= 0.0);
        prop_assert!((p.normalization(&inst) - 1.0).abs() < 1e-12);
        let pr = check_primal_feasibility(&p, &inst, &grid);
        prop_assert!(pr.passed, "{:?}", pr);
        let dr = check_dual_feasibility(&d, &inst, &grid);
        prop_assert!(dr.passed, "{:?}", dr);
    }

    #[test]
    fn stieltjes_sums_are_nonnegative(inst in instance(10, 60, 200), seed in any::<u64>()) {
        let grid = GridSpec::new(400, &inst).unwrap();
        let r = check_weak_duality::<f64>(&inst, &grid, 40, seed).unwrap();
        prop_assert!(r.passed, "{:?}", r);
        prop_assert!(r.min_stieltjes >= -1e-10);
        prop_assert!(r.min_gap >= -1e-12);
    }

    #[test]
    fn tangent_identity_and_shape(inst in instance(20, 100, 400)) {
        let grid = GridSpec::new(1000, &inst).unwrap();
        if inst.m() >= inst.k() + 2 {
            let p = check_quasiconcavity::<f64>(&inst, &grid).unwrap();
            prop_assert!(p.identity_residual <= 1e-8);
            prop_assert!(p.report.passed, "{:?}", p.report);
        } else {
            prop_assert!(check_low_competition_shape::<f64>(&inst, &grid).unwrap().passed);
        }
    }

    #[test]
    fn phi_peaks_in_the_breakpoint_cell(inst in instance(20, 100, 400), edge in 0u8..3) {
        // edge 0 keeps m; 1 and 2 force the m = k and m = k + 1 families
        let inst = match edge {
            1 => SelectionInstance::new(inst.k(), inst.n(), inst.k()).unwrap(),
            2 => SelectionInstance::new(inst.k() + 1, inst.n(), inst.k()).unwrap(),
            _ => inst,
        };
        let points = 1001;
        let curve = phi_curve::<f64>(&inst, points).unwrap();
        let bp = inst.critical_quantile::<f64>() * (points - 1) as f64;
        let (lo, hi) = (bp.floor() as usize, (bp.ceil() as usize).min(points - 1));
        let near = curve.near_argmax(1e-12);
        prop_assert!(near.contains(&lo) || near.contains(&hi), "{}: argmax {} vs cell [{lo}, {hi}]", inst, curve.argmax);
        let cell = curve.points[lo].1.max(curve.points[hi].1);
        for (i, p) in curve.points.iter().enumerate() {
            if i != lo && i != hi {
                prop_assert!(p.1 <= cell * (1.0 + 4.0 * f64::EPSILON), "{}: phi({}) above the cell", inst, p.0);
            }
        }
    }
}
