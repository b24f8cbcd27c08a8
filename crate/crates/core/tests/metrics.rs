use proptest::prelude::*;
use vines_core::dynamics::{simulate, InitialState, SystemParams, Tolerances};
use vines_core::metrics::{
    amplitude_spectrum, cwt_morlet, efficiency, impacts_per_cycle, log_scales, relative_energy, build_ledger,
    EfficiencyMode, Window,
};

fn grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transforms_are_linear(a in prop::collection::vec(-1.0..1.0f64, 128), b in prop::collection::vec(-1.0..1.0f64, 128), k in -3.0..3.0f64) {
        let t = grid(128, 0.1);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        // The spectrum is a modulus, so check linearity on the underlying scaling property and on the wavelet of positive combinations.
        let sa = amplitude_spectrum(&t, &a, Window::None).unwrap();
        let ka: Vec<f64> = a.iter().map(|x| k * x).collect();
        let ska = amplitude_spectrum(&t, &ka, Window::Hann).unwrap();
        let sa_h = amplitude_spectrum(&t, &a, Window::Hann).unwrap();
        for (x, y) in ska.iter().zip(&sa_h) {
            prop_assert!((x.1 - k.abs() * y.1).abs() <= 1e-9 * (1.0 + y.1));
        }
        let ssum = amplitude_spectrum(&t, &sum, Window::None).unwrap();
        let sb = amplitude_spectrum(&t, &b, Window::None).unwrap();
        for i in 0..ssum.len() {
            prop_assert!(ssum[i].1 <= sa[i].1 + sb[i].1 + 1e-9);
        }
        let scales = log_scales(0.05, 2.0, 8).unwrap();
        let wa = cwt_morlet(&t, &a, &scales).unwrap();
        let wka = cwt_morlet(&t, &ka, &scales).unwrap();
        for (ra, rk) in wa.iter().zip(&wka) {
            for (x, y) in ra.iter().zip(rk) {
                prop_assert!((y - k.abs() * x).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}

#[test]
fn wavelet_doubles_with_signal() {
    let t = grid(500, 0.05);
    let x: Vec<f64> = t.iter().map(|t| (0.7 * t).sin() + 0.3 * (2.1 * t).cos()).collect();
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let s = log_scales(0.05, 1.0, 16).unwrap();
    let a = cwt_morlet(&t, &x, &s).unwrap();
    let b = cwt_morlet(&t, &x2, &s).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (u, v) in ra.iter().zip(rb) {
            assert!((v - 2.0 * u).abs() < 1e-12);
        }
    }
}

#[test]
fn damped_oscillator_spectral_peak() {
    let p = SystemParams::new(0.05, 0.2, 0.0, 0.5, 100.0).unwrap();
    let tr = simulate(&p, &InitialState::impulsive(0.5, 0.0), 200.0, &Tolerances::default()).unwrap();
    let states: Vec<_> = tr.grid_states().collect();
    let t: Vec<f64> = states.iter().map(|s| s.tau).collect();
    let x: Vec<f64> = states.iter().map(|s| s.x1).collect();
    let spec = amplitude_spectrum(&t, &x, Window::Hann).unwrap();
    let peak = spec.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let z: f64 = 0.05 * 0.2 / 2.0;
    let fd = (1.0 - z * z).sqrt() / std::f64::consts::TAU;
    let df = spec[1].0;
    assert!((peak - fd).abs() <= df, "{peak} vs {fd}");
}

#[test]
fn relative_energy_after_single_impact() {
    let p = SystemParams::new(0.05, 0.0, 0.0, 0.54, 0.25).unwrap();
    let tr = simulate(&p, &InitialState::impulsive(0.5, 0.0), 1.0, &Tolerances::tight()).unwrap();
    let l = build_ledger(&tr).unwrap();
    let t = tr.impacts[0].tau;
    assert!((relative_energy(&l, t).unwrap() - 0.974700).abs() < 1e-6);
    assert!((relative_energy(&l, 1.0).unwrap() - 0.974700).abs() < 1e-6);
}

#[test]
fn elastic_run_keeps_relative_energy() {
    let p = SystemParams::new(0.05, 0.2, 0.05, 1.0, 0.3).unwrap();
    let tr = simulate(&p, &InitialState::impulsive(0.7, 0.0), 30.0, &Tolerances::default()).unwrap();
    let l = build_ledger(&tr).unwrap();
    assert!(l.e_r.iter().all(|e| (e - 1.0).abs() < 1e-8));
}

#[test]
fn cycle_counts_cover_all_impacts() {
    for (kappa, l_c, v1) in [(0.54, 0.99, 0.5), (0.3, 0.2, 0.9), (0.8, 0.5, 1.0)] {
        let p = SystemParams::from_design(0.05, 0.2, 0.05, kappa, l_c).unwrap();
        let tr = simulate(&p, &InitialState::impulsive(v1, 0.0), 50.0, &Tolerances::default()).unwrap();
        let c = impacts_per_cycle(&tr);
        let (lo, hi) = (c[0].start, c.last().unwrap().end);
        let covered = tr.impacts.iter().filter(|e| !e.grazing && e.tau >= lo && e.tau < hi).count();
        assert_eq!(c.iter().map(|c| c.impacts).sum::<usize>(), covered);
    }
}

#[test]
fn time_averaged_er_below_hundred_when_dissipative() {
    let p = SystemParams::from_design(0.05, 0.2, 0.05, 0.5, 0.5).unwrap();
    let tr = simulate(&p, &InitialState::impulsive(0.8, 0.0), 30.0, &Tolerances::default()).unwrap();
    let avg = efficiency(&tr, EfficiencyMode::TimeAveragedEr, 30.0).unwrap().value;
    let diss = efficiency(&tr, EfficiencyMode::DissipationFraction, 30.0).unwrap().value;
    assert!(avg < 100.0 && avg > 0.0);
    assert!(diss > 0.0 && diss <= 100.0);
}
