use bdfd::integrators::{
    convergence_study, delay_consistent_history, error_norms, integrate, ConvergenceReport, Reference, ReferencePolicy,
    SchemeConfig, SchemeKind, Startup, StudyConfig,
};
use bdfd::numerics::norm_inf;
use bdfd::problems::{build_biot_problem, build_spectral_problem, BiotParameters, Profile, BIOT_AMPLITUDE, BIOT_RATE};
use proptest::prelude::*;

fn study(pairs: Vec<(usize, usize)>, schemes: Vec<SchemeKind>) -> Vec<ConvergenceReport> {
    let pr = build_spectral_problem(&[0.03, 0.07, 0.11], &[1.0, 2.0, 3.0], Profile::Exponential { rate: 0.5 }).unwrap();
    let cfg = StudyConfig {
        pairs,
        taus: (7..12).map(|j| 10.0 / 2f64.powi(j)).collect(),
        t_final: 10.0,
        schemes,
        reference: ReferencePolicy::Exact,
        startup: Startup::Exact,
    };
    convergence_study(&pr, &cfg).unwrap()
}

#[test]
fn spectral_orders_match_min_k_delta() {
    let reports = study(vec![(1, 1), (2, 2), (3, 3), (2, 1)], vec![SchemeKind::SemiExplicit]);
    for r in &reports {
        let expected = r.k.min(r.delta) as f64;
        for o in r.tail_orders_p(3) {
            assert!((o - expected).abs() <= 0.2, "{}: {:?}", r.label(), r.order_p);
        }
    }
}

#[test]
fn monolithic_orders_match_k() {
    for r in study(vec![(1, 1), (2, 2), (3, 3)], vec![SchemeKind::Monolithic]) {
        for o in r.tail_orders_p(3) {
            assert!((o - r.k as f64).abs() <= 0.2, "{}: {:?}", r.label(), r.order_p);
        }
    }
}

#[test]
fn biot_k3_run_stays_bounded() {
    let pr = build_biot_problem(32, &BiotParameters::reference(), BIOT_AMPLITUDE, BIOT_RATE).unwrap();
    let cfg = SchemeConfig::new(3, 3, 10.0 / 128.0, 10.0, Startup::Exact).unwrap();
    let traj = integrate(&pr, &cfg, SchemeKind::SemiExplicit).unwrap();
    let ex = pr.exact.as_ref().unwrap();
    let exact_sup = traj.times.iter().map(|t| norm_inf(&(ex.p)(*t))).fold(0.0, f64::max);
    let sup = traj.p.iter().map(|p| norm_inf(p)).fold(0.0, f64::max);
    assert!(sup <= 2.0 * exact_sup, "{sup} vs {exact_sup}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semi_and_reduced_agree(
        mu in prop::collection::vec(0.0f64..0.14, 1..4),
        k in 1usize..4,
        delta in 1usize..4,
        omega in 0.1f64..3.0,
    ) {
        let b: Vec<f64> = mu.iter().enumerate().map(|(i, _)| 0.5 + i as f64).collect();
        let pr = build_spectral_problem(&mu, &b, Profile::Cosine { omega }).unwrap();
        let tau = 0.05;
        let ex = pr.exact.as_ref().unwrap();
        let ps: Vec<Vec<f64>> = (0..k + delta).map(|j| (ex.p)(j as f64 * tau)).collect();
        let startup = delay_consistent_history(&pr, tau, delta, &ps).unwrap();
        let cfg = SchemeConfig::new(k, delta, tau, 1.0, Startup::Given(startup)).unwrap();
        let semi = integrate(&pr, &cfg, SchemeKind::SemiExplicit).unwrap();
        let red = integrate(&pr, &cfg, SchemeKind::Reduced).unwrap();
        for (a, b) in semi.p.iter().zip(&red.p) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn error_norms_vanish_only_on_reference(shift in -1.0f64..1.0) {
        let pr = build_spectral_problem(&[0.1, 0.05], &[1.0, 2.0], Profile::Constant).unwrap();
        let cfg = SchemeConfig::new(1, 1, 0.5, 1.0, Startup::Exact).unwrap();
        let mut traj = integrate(&pr, &cfg, SchemeKind::SemiExplicit).unwrap();
        let reference = traj.clone();
        let last = traj.len() - 1;
        traj.p[last][1] += shift;
        let (eu, ep) = error_norms(&traj, &pr, Reference::Trajectory(&reference)).unwrap();
        prop_assert_eq!(eu, 0.0);
        prop_assert!(ep >= 0.0);
        prop_assert_eq!(ep == 0.0, shift == 0.0);
    }
}
