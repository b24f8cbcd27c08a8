use serde::{Deserialize, Serialize};

use super::hybrid::{resolve_contact, Halt, Hybrid, Mode};
use super::{
    outward_accel, Sample, SampleKind, SimError, SimState, StickInterval, SystemParams,
    Tolerances, Trajectory, Wall,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x1: f64,
    pub v1: f64,
    pub x2: f64,
    pub v2: f64,
}

impl InitialState {
    /// LO released from `x1 = 0` with velocity `v1`, ball at rest at `x2`.
    pub fn impulsive(v1: f64, x2: f64) -> Self {
        InitialState { x1: 0.0, v1, x2, v2: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub tol: Tolerances,
    /// Output grid spacing; `None` records only impacts and the end state.
    pub sample_dt: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { tol: Tolerances::default(), sample_dt: Some(0.01) }
    }
}

/// Moves a ball that starts outside the cavity onto the nearest wall.
///
/// Returns the adjusted state and whether a projection happened.
pub fn project_initial_state(init: &InitialState, p: &SystemParams) -> (InitialState, bool) {
    let w = init.x1 - init.x2;
    if w.abs() <= p.l_c {
        return (*init, false);
    }
    let side = (init.x2 - init.x1).signum();
    (InitialState { x2: init.x1 + side * p.l_c, ..*init }, true)
}

/// Integrates on `[0, t_end]` with the default 0.01 output grid.
pub fn simulate(
    p: &SystemParams,
    init: &InitialState,
    t_end: f64,
    tol: &Tolerances,
) -> Result<Trajectory, SimError> {
    simulate_with(p, init, t_end, &SimOptions { tol: *tol, ..SimOptions::default() })
}

pub fn simulate_with(
    p: &SystemParams,
    init: &InitialState,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    p.validate()?;
    let tol = &opts.tol;
    tol.validate()?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(SimError::domain(format!("t_end must be > 0, got {t_end}")));
    }
    if let Some(dt) = opts.sample_dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::domain(format!("sample_dt must be > 0, got {dt}")));
        }
    }
    if ![init.x1, init.v1, init.x2, init.v2].iter().all(|v| v.is_finite()) {
        return Err(SimError::domain("initial state must be finite"));
    }
    let (init, projected) = project_initial_state(init, p);
    let s0 = SimState { tau: 0.0, x1: init.x1, v1: init.v1, x2: init.x2, v2: init.v2, ..SimState::default() };
    let on_wall = (s0.gap().abs() - p.l_c >= -tol.gap_tol).then(|| Wall::of_gap(s0.gap()));

    let mut samples = vec![Sample { kind: SampleKind::Grid, state: s0 }];
    let mut impacts = Vec::new();
    let mut sticks: Vec<StickInterval> = Vec::new();
    let mut hy = Hybrid::new(p, tol, s0, Mode::Free, on_wall, opts.sample_dt);

    let mut last_tau = f64::NEG_INFINITY;
    let mut rapid = 0usize;
    let mut stalled = 0usize;
    loop {
        match hy.advance(t_end, &mut |s| samples.push(s))? {
            Halt::Horizon => break,
            Halt::Contact(wall) => {
                let pre = hy.state();
                let ev = resolve_contact(&pre, wall, p, tol);
                rapid = if ev.tau - last_tau < tol.chatter_window { rapid + 1 } else { 0 };
                stalled = if ev.tau == last_tau { stalled + 1 } else { 0 };
                last_tau = ev.tau;
                if impacts.len() >= tol.max_impacts || stalled > tol.chatter_limit {
                    return Err(SimError::Zeno { tau: ev.tau, impacts: impacts.len() + 1, limit: tol.max_impacts });
                }
                samples.push(Sample { kind: SampleKind::PreImpact, state: pre });
                let mut post = SimState { v1: ev.v1_post, v2: ev.v2_post, e_imp: pre.e_imp + ev.energy_loss, ..pre };
                impacts.push(ev);

                // Chattering guard: pin the ball when it cannot leave the wall
                // by more than the gap tolerance before being pushed back.
                let leave = wall.sign() * post.rel_velocity();
                let push = outward_accel(&post, p, wall);
                let pinned = push > 0.0
                    && (leave.abs() < tol.graze_eps
                        || leave * leave < 2.0 * push * tol.gap_tol
                        || rapid > tol.chatter_limit);
                if pinned {
                    let v = (post.v1 + p.eps * post.v2) / (1.0 + p.eps);
                    let r = post.rel_velocity();
                    post.e_imp += p.eps * r * r / (1.0 + p.eps);
                    post.v1 = v;
                    post.v2 = v;
                    sticks.push(StickInterval { wall, start: post.tau, end: None });
                    rapid = 0;
                    hy.reset(post, Mode::Stuck(wall), Some(wall));
                } else {
                    hy.reset(post, Mode::Free, Some(wall));
                }
                samples.push(Sample { kind: SampleKind::PostImpact, state: post });
            }
            Halt::Release => {
                let st = hy.state();
                let stick = sticks.last_mut().expect("release without a stick interval");
                stick.end = Some(st.tau);
                let wall = stick.wall;
                hy.reset(st, Mode::Free, Some(wall));
            }
        }
    }
    let mut fin = hy.state();
    fin.tau = t_end;
    samples.push(Sample { kind: SampleKind::Final, state: fin });
    Ok(Trajectory { params: *p, samples, impacts, sticks, t_end, projected_initial: projected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    #[test]
    fn projection_onto_nearest_wall() {
        let p = SystemParams::new(0.05, 0.2, 0.013, 0.39, 0.68).unwrap();
        let (init, moved) = project_initial_state(&InitialState::impulsive(0.5, 0.97), &p);
        assert!(moved);
        assert!((init.x2 - 0.68).abs() < 1e-15);
        let (init, moved) = project_initial_state(&InitialState::impulsive(0.5, -0.97), &p);
        assert!(moved);
        assert!((init.x2 + 0.68).abs() < 1e-15);
        let (_, moved) = project_initial_state(&InitialState::impulsive(0.5, 0.5), &p);
        assert!(!moved);
    }

    #[test]
    fn decoupled_ball_drifts() {
        let p = SystemParams::new(0.05, 0.2, 0.0, 0.5, 1e6).unwrap();
        let init = InitialState { x1: 0.0, v1: 0.5, x2: 0.0, v2: 0.3 };
        let tr = simulate(&p, &init, 20.0, &Tolerances::default()).unwrap();
        assert!(tr.impacts.is_empty());
        let fin = tr.last();
        assert!((fin.x2 - 6.0).abs() < 1e-9);
        // Isolated damped LO: x1 = A e^{-zt} sin(wd t).
        let z: f64 = 0.5 * 0.05 * 0.2;
        let wd = (1.0 - z * z).sqrt();
        let x1 = 0.5 / wd * (-z * 20.0f64).exp() * (wd * 20.0).sin();
        assert!((fin.x1 - x1).abs() < 1e-8);
    }

    #[test]
    fn first_impact_matches_closed_form() {
        let p = SystemParams::new(0.05, 0.0, 0.0, 0.54, 0.25).unwrap();
        let tr = simulate(&p, &InitialState::impulsive(0.5, 0.0), 5.0, &Tolerances::default()).unwrap();
        assert!((tr.impacts[0].tau - FRAC_PI_6).abs() < 1e-9);
    }

    #[test]
    fn samples_are_ordered_and_contain_impacts() {
        let p = SystemParams::new(0.05, 0.2, 0.05, 0.54, 0.3).unwrap();
        let tr = simulate(&p, &InitialState::impulsive(0.5, 0.0), 30.0, &Tolerances::default()).unwrap();
        assert!(!tr.impacts.is_empty());
        for pair in tr.samples.windows(2) {
            assert!(pair[0].state.tau <= pair[1].state.tau);
            if pair[0].state.tau == pair[1].state.tau {
                assert_eq!(pair[0].kind, SampleKind::PreImpact);
                assert_eq!(pair[1].kind, SampleKind::PostImpact);
            }
        }
        for ev in &tr.impacts {
            assert!(tr.samples.iter().any(|s| s.state.tau == ev.tau && s.kind == SampleKind::PreImpact));
        }
        assert_eq!(tr.last().tau, 30.0);
    }

    #[test]
    fn gap_stays_inside_cavity() {
        let tol = Tolerances::default();
        for &(kappa, l_c, c_e) in &[(0.54, 0.99, 0.05), (0.2, 0.1, 0.0), (0.9, 0.4, 0.3)] {
            let p = SystemParams::new(0.05, 0.2, c_e, kappa, l_c).unwrap();
            let tr = simulate(&p, &InitialState::impulsive(0.8, 0.0), 60.0, &tol).unwrap();
            for s in &tr.samples {
                assert!(s.state.gap().abs() <= l_c + tol.gap_tol, "{:?}", s);
            }
        }
    }

    #[test]
    fn accumulators_non_decreasing() {
        let p = SystemParams::new(0.05, 0.2, 0.05, 0.54, 0.99).unwrap();
        let tr = simulate(&p, &InitialState::impulsive(0.5, 0.97), 60.0, &Tolerances::default()).unwrap();
        for pair in tr.samples.windows(2) {
            let (a, b) = (&pair[0].state, &pair[1].state);
            assert!(b.i_damp >= a.i_damp && b.i_coil >= a.i_coil && b.e_imp >= a.e_imp);
        }
    }

    #[test]
    fn deterministic_replay() {
        let p = SystemParams::new(0.05, 0.2, 0.05, 0.54, 0.99).unwrap();
        let init = InitialState::impulsive(0.5, 0.97);
        let a = simulate(&p, &init, 60.0, &Tolerances::default()).unwrap();
        let b = simulate(&p, &init, 60.0, &Tolerances::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plastic_like_impacts_end_in_sticking() {
        let p = SystemParams::new(0.05, 0.0, 0.0, 0.001, 0.05).unwrap();
        let tr = simulate(&p, &InitialState::impulsive(0.5, 0.0), 20.0, &Tolerances::default()).unwrap();
        assert!(!tr.sticks.is_empty());
        let e0 = 0.25;
        let fin = tr.last();
        assert!((fin.mechanical_energy(0.05) + fin.e_imp - e0).abs() < 1e-8);
    }

    #[test]
    fn bad_horizon() {
        let p = SystemParams::new(0.05, 0.2, 0.05, 0.54, 0.99).unwrap();
        assert!(simulate(&p, &InitialState::impulsive(0.5, 0.0), 0.0, &Tolerances::default()).is_err());
    }
}
