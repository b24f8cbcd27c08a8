use proptest::prelude::*;
use vines_core::dynamics::{coil_from_design, InitialState, SystemParams};
use vines_core::stochastic::{
    compare_designs_with, mc_estimate, mc_estimate_with, sample_inputs, Aleatory, DesignPoint, StochasticError,
    UncertaintyModel, DESIGN_FLOOR,
};

type Stub = fn(&SystemParams, &InitialState, f64) -> Result<f64, String>;

fn velocity_stub(_: &SystemParams, init: &InitialState, _: f64) -> Result<f64, String> {
    Ok(100.0 * init.v1)
}

#[test]
fn standard_error_shrinks_with_root_n() {
    let d = DesignPoint::new(0.39, 0.68, 0.013);
    let u = UncertaintyModel::default();
    let half: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&n| {
            let e = mc_estimate(&d, &u, n, 11, 30.0).unwrap();
            (e.ci95.1 - e.ci95.0) / 2.0
        })
        .collect();
    for w in half.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "half-width ratio {ratio}");
    }
}

#[test]
fn uniform_velocity_statistics() {
    let u = UncertaintyModel::default();
    let e = mc_estimate_with(&(velocity_stub as Stub), &DesignPoint::new(0.5, 0.5, 0.5), &u, 20_000, 3, 1.0).unwrap();
    // 100 * U(0.1, 1): mean 55, SD 90 / sqrt(12).
    assert!((e.mean - 55.0).abs() < 3.0 * e.sigma / (e.n as f64).sqrt());
    assert!((e.sigma - 90.0 / 12f64.sqrt()).abs() < 0.5);
    assert!((e.ci95.1 - e.ci95.0 - 2.0 * 1.96 * e.sigma / (e.n as f64).sqrt()).abs() < 1e-9);
}

#[test]
fn designs_share_initial_velocities() {
    let u = UncertaintyModel::default();
    let designs = [DesignPoint::new(0.2, 0.3, 0.4), DesignPoint::new(0.9, 0.1, 0.05)];
    let c = compare_designs_with(&(velocity_stub as Stub), &designs, &u, 64, 5, 1.0).unwrap();
    assert_eq!(c.values[0], c.values[1]);
    for (v, x) in c.v1.iter().zip(&c.values[0]) {
        assert!((100.0 * v - x.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let u = UncertaintyModel::default();
    let d = DesignPoint::new(0.44, 0.94, 0.01);
    let run = |n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| mc_estimate(&d, &u, 96, 21, 30.0))
    };
    assert_eq!(run(1).unwrap(), run(3).unwrap());
}

#[test]
fn too_many_failures_reject_the_estimate() {
    let u = UncertaintyModel::default();
    let d = DesignPoint::new(0.5, 0.5, 0.5);
    let failing = |cut: f64| {
        move |_: &SystemParams, init: &InitialState, _: f64| {
            if init.v1 < cut { Err("diverged".to_string()) } else { Ok(1.0) }
        }
    };
    // Roughly 3% and 20% of U(0.1, 1) draws fall below these cuts.
    let ok = mc_estimate_with(&failing(0.127), &d, &u, 2000, 1, 1.0).unwrap();
    assert!(ok.failures > 0 && ok.n + ok.failures == 2000);
    let bad = mc_estimate_with(&failing(0.28), &d, &u, 2000, 1, 1.0);
    assert!(matches!(bad, Err(StochasticError::Rejected { .. })));
}

#[test]
fn point_aleatory_is_deterministic() {
    let u = UncertaintyModel::deterministic(0.55);
    let d = DesignPoint::new(0.6, 0.4, 0.05);
    let e = mc_estimate(&d, &u, 4, 9, 30.0).unwrap();
    assert!(e.sigma.abs() < 1e-12);
    assert!(matches!(u.aleatory, Aleatory::Point { value } if value == 0.55));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sampled_designs_stay_in_bounds(k in 0.001..=1.0f64, l in 0.001..=1.0f64, c in 0.001..=1.0f64, sd in 0.0..0.5f64, i in 0u64..1000, seed in any::<u64>()) {
        let u = UncertaintyModel { design_sd: [sd; 3], ..UncertaintyModel::default() };
        let (p, init) = sample_inputs(&DesignPoint::new(k, l, c), &u, i, seed).unwrap();
        prop_assert!((DESIGN_FLOOR..=1.0).contains(&p.kappa));
        prop_assert!((DESIGN_FLOOR..=1.0).contains(&p.l_c));
        let lo = coil_from_design(DESIGN_FLOOR, u.eps);
        let hi = coil_from_design(1.0, u.eps);
        prop_assert!(p.c_e >= lo - 1e-15 && p.c_e <= hi + 1e-15);
        prop_assert!((0.1..=1.0).contains(&init.v1));
    }
}
