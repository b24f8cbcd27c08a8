//! Adaptive stepping with wall-contact and release localization.
//!
//! Each accepted step is scanned on a few dense-output points plus every
//! interior extremum of `w`, so `g = ±w - l_c` is monotone between scan
//! points and sign changes cannot hide inside an interval. Crossings are
//! refined with Brent's method on the continuous extension.

use super::dopri::{self, Dense, Vector};
use super::roots::brent;
use super::{
    free_rhs, impact_map, outward_accel, stuck_rhs, ImpactEvent, Sample, SampleKind, SimError,
    SimState, SystemParams, Tolerances, Wall,
};

const SUBDIV: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mode {
    Free,
    Stuck(Wall),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Halt {
    Horizon,
    /// The ball touches `Wall`; the current state is pre-contact with the gap snapped.
    Contact(Wall),
    /// The pinned ball separates from its wall.
    Release,
}

#[derive(Debug, Clone, Copy)]
struct ScanPoint {
    t: f64,
    w: f64,
    r: f64,
    /// Interior extremum of `w`; `r` holds the relative velocity just before it.
    extremum: bool,
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    dt: f64,
    next: u64,
}

pub(crate) struct Hybrid<'a> {
    p: &'a SystemParams,
    tol: &'a Tolerances,
    tau: f64,
    y: Vector,
    e_imp: f64,
    k1: Option<Vector>,
    h: f64,
    mode: Mode,
    on_wall: Option<Wall>,
    grid: Option<Grid>,
    scan: Vec<ScanPoint>,
}

impl<'a> Hybrid<'a> {
    pub fn new(
        p: &'a SystemParams,
        tol: &'a Tolerances,
        state: SimState,
        mode: Mode,
        on_wall: Option<Wall>,
        grid_dt: Option<f64>,
    ) -> Self {
        let grid = grid_dt.map(|dt| Grid { dt, next: (state.tau / dt).floor() as u64 + 1 });
        Hybrid {
            p,
            tol,
            tau: state.tau,
            y: state.vector(),
            e_imp: state.e_imp,
            k1: None,
            h: (0.01f64).min(tol.h_max),
            mode,
            on_wall,
            grid,
            scan: Vec::with_capacity(2 * SUBDIV + 2),
        }
    }

    pub fn state(&self) -> SimState {
        SimState::from_vector(self.tau, &self.y, self.e_imp)
    }

    /// Replaces the state after a discontinuity (impact, sticking, release).
    pub fn reset(&mut self, state: SimState, mode: Mode, on_wall: Option<Wall>) {
        self.tau = state.tau;
        self.y = state.vector();
        self.e_imp = state.e_imp;
        self.k1 = None;
        self.mode = mode;
        self.on_wall = on_wall;
    }

    fn deriv(&self, y: &Vector) -> Vector {
        match self.mode {
            Mode::Free => free_rhs(y, self.p),
            Mode::Stuck(_) => stuck_rhs(y, self.p),
        }
    }

    /// Integrates until `t_stop` or the next discontinuity, whichever is first.
    pub fn advance(
        &mut self,
        t_stop: f64,
        sink: &mut dyn FnMut(Sample),
    ) -> Result<Halt, SimError> {
        let tol = *self.tol;
        loop {
            if self.tau >= t_stop {
                return Ok(Halt::Horizon);
            }
            let mode = self.mode;
            let p = *self.p;
            let f = move |y: &Vector| match mode {
                Mode::Free => free_rhs(y, &p),
                Mode::Stuck(_) => stuck_rhs(y, &p),
            };
            let k1 = match self.k1 {
                Some(k) => k,
                None => self.deriv(&self.y),
            };
            let remaining = t_stop - self.tau;
            let mut h = self.h.min(tol.h_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let h_min = 16.0 * f64::EPSILON * self.tau.abs().max(1.0);
            let step = dopri::step(&f, self.tau, &self.y, &k1, h, tol.rtol, tol.atol);
            if step.err.is_nan() || step.err > 1.0 {
                let fac = if step.err.is_finite() { (0.9 * step.err.powf(-0.2)).max(0.2) } else { 0.2 };
                self.h = h * fac;
                if self.h < h_min {
                    return Err(SimError::StepUnderflow { tau: self.tau, state: self.state() });
                }
                continue;
            }
            let grow = if step.err > 0.0 { (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
            if !last {
                self.h = h * grow;
            } else {
                self.h = self.h.max(h * grow);
            }
            let t1 = if last { t_stop } else { self.tau + h };

            let event = match self.mode {
                Mode::Free => self.find_contact(&step.dense, &step.y1, t1),
                Mode::Stuck(wall) => self.find_release(&step.dense, &step.y1, t1, wall),
            };
            match event {
                None => {
                    self.emit_grid(&step.dense, t1, !last, sink);
                    self.y = step.y1;
                    self.k1 = Some(step.k7);
                    self.tau = t1;
                    if let Some(wall) = self.on_wall {
                        if wall.sign() * (self.y[0] - self.y[2]) - self.p.l_c < -tol.gap_tol {
                            self.on_wall = None;
                        }
                    }
                }
                Some((te, halt)) => {
                    self.emit_grid(&step.dense, te, false, sink);
                    if te > self.tau {
                        self.y = step.dense.eval(te);
                        self.tau = te;
                    }
                    self.k1 = None;
                    // Pin the gap exactly to the wall; x2 does not enter the energy.
                    match (halt, self.mode) {
                        (Halt::Contact(wall), _) => {
                            self.y[2] = self.y[0] - wall.sign() * self.p.l_c;
                        }
                        (Halt::Release, Mode::Stuck(wall)) => {
                            self.y[2] = self.y[0] - wall.sign() * self.p.l_c;
                            self.y[3] = self.y[1];
                        }
                        _ => {}
                    }
                    return Ok(halt);
                }
            }
        }
    }

    fn emit_grid(&mut self, dense: &Dense, t_cut: f64, inclusive: bool, sink: &mut dyn FnMut(Sample)) {
        let Some(grid) = self.grid.as_mut() else { return };
        loop {
            let t = grid.next as f64 * grid.dt;
            let inside = if inclusive { t <= t_cut } else { t < t_cut };
            if !inside {
                break;
            }
            if t > self.tau {
                let y = dense.eval(t);
                sink(Sample { kind: SampleKind::Grid, state: SimState::from_vector(t, &y, self.e_imp) });
            }
            grid.next += 1;
        }
    }

    fn find_contact(&mut self, dense: &Dense, y1: &Vector, t1: f64) -> Option<(f64, Halt)> {
        let t0 = self.tau;
        let h = t1 - t0;
        let rel = |y: &Vector| (y[0] - y[2], y[1] - y[3]);
        self.scan.clear();
        let mut prev: Option<ScanPoint> = None;
        for k in 0..=SUBDIV {
            let (t, y) = match k {
                0 => (t0, self.y),
                k if k == SUBDIV => (t1, *y1),
                k => {
                    let t = t0 + h * k as f64 / SUBDIV as f64;
                    (t, dense.eval(t))
                }
            };
            let (w, r) = rel(&y);
            if let Some(pp) = prev {
                if (pp.r > 0.0 && r < 0.0) || (pp.r < 0.0 && r > 0.0) {
                    let rf = |t: f64| {
                        let y = dense.eval(t);
                        y[1] - y[3]
                    };
                    let te = brent(rf, pp.t, t, pp.r, r, 1e-14, 0.0);
                    let ye = dense.eval(te);
                    self.scan.push(ScanPoint { t: te, w: ye[0] - ye[2], r: pp.r, extremum: true });
                }
            }
            let pt = ScanPoint { t, w, r, extremum: false };
            self.scan.push(pt);
            prev = Some(pt);
        }

        let mut best: Option<(f64, Halt)> = None;
        for wall in [Wall::Upper, Wall::Lower] {
            if let Some(tc) = self.first_contact(dense, wall) {
                if best.is_none_or(|(tb, _)| tc < tb) {
                    best = Some((tc, Halt::Contact(wall)));
                }
            }
        }
        best
    }

    fn first_contact(&self, dense: &Dense, wall: Wall) -> Option<f64> {
        let s = wall.sign();
        let l_c = self.p.l_c;
        let tol = self.tol;
        let g = |pt: &ScanPoint| s * pt.w - l_c;
        let pts = &self.scan;
        for j in 1..pts.len() {
            let gj = g(&pts[j]);
            if gj >= 0.0 {
                let gl = g(&pts[j - 1]);
                if gl < 0.0 {
                    let gf = |t: f64| {
                        let y = dense.eval(t);
                        s * (y[0] - y[2]) - l_c
                    };
                    let root = brent(
                        gf,
                        pts[j - 1].t,
                        pts[j].t,
                        gl,
                        gj,
                        1e-3 * tol.time_tol,
                        1e-3 * tol.gap_tol,
                    );
                    return Some(root);
                }
                // No interior point below the wall: the step starts on it.
                if self.on_wall == Some(wall) {
                    let st = self.state();
                    let approach = s * st.rel_velocity();
                    if approach <= tol.graze_eps && outward_accel(&st, self.p, wall) <= 0.0 {
                        return None;
                    }
                }
                return Some(pts[0].t);
            }
            let p = &pts[j];
            if p.extremum && s * p.r > 0.0 && gj >= -tol.gap_tol {
                return Some(p.t);
            }
        }
        None
    }

    fn find_release(&self, dense: &Dense, y1: &Vector, t1: f64, wall: Wall) -> Option<(f64, Halt)> {
        let s = wall.sign();
        let p = self.p;
        let q = |y: &Vector| s * (-p.eps * p.lambda * y[1] - y[0]);
        let t0 = self.tau;
        let h = t1 - t0;
        let mut t_prev = t0;
        let mut q_prev = q(&self.y);
        if q_prev <= 0.0 {
            return Some((t0, Halt::Release));
        }
        for k in 1..=SUBDIV {
            let (t, y) = if k == SUBDIV {
                (t1, *y1)
            } else {
                let t = t0 + h * k as f64 / SUBDIV as f64;
                (t, dense.eval(t))
            };
            let qk = q(&y);
            if qk <= 0.0 {
                let root = brent(|t| q(&dense.eval(t)), t_prev, t, q_prev, qk, 1e-3 * self.tol.time_tol, 0.0);
                return Some((root, Halt::Release));
            }
            t_prev = t;
            q_prev = qk;
        }
        None
    }
}

/// Resolves a wall contact into an impact record.
///
/// Approach speeds at or below `graze_eps` are flagged as grazing; a contact
/// that is already separating leaves the velocities untouched.
pub(crate) fn resolve_contact(
    pre: &SimState,
    wall: Wall,
    p: &SystemParams,
    tol: &Tolerances,
) -> ImpactEvent {
    let approach = wall.sign() * pre.rel_velocity();
    let grazing = approach <= tol.graze_eps;
    let (v1_post, v2_post, energy_loss) = if approach > 0.0 {
        let o = impact_map(pre.v1, pre.v2, p);
        (o.v1_post, o.v2_post, o.energy_loss)
    } else {
        (pre.v1, pre.v2, 0.0)
    };
    ImpactEvent {
        tau: pre.tau,
        wall,
        v1_pre: pre.v1,
        v2_pre: pre.v2,
        v1_post,
        v2_post,
        energy_loss,
        grazing,
    }
}

/// Advances the smooth flow from an interior state until the ball reaches a
/// wall or `dt_max` elapses.
///
/// On contact, returns the pre-impact state (gap pinned to the wall) and the
/// impact the restitution map would produce; the caller applies it.
pub fn step_to_event(
    s: &SimState,
    p: &SystemParams,
    dt_max: f64,
    tol: &Tolerances,
) -> Result<(SimState, Option<ImpactEvent>), SimError> {
    p.validate()?;
    tol.validate()?;
    if !(dt_max.is_finite() && dt_max > 0.0) {
        return Err(SimError::domain(format!("dt_max must be > 0, got {dt_max}")));
    }
    let g = s.gap().abs() - p.l_c;
    if g > tol.gap_tol {
        return Err(SimError::domain(format!(
            "state outside the cavity: |x1 - x2| = {} > l_c = {}",
            s.gap().abs(),
            p.l_c
        )));
    }
    let on_wall = (g >= -tol.gap_tol).then(|| Wall::of_gap(s.gap()));
    let mut hy = Hybrid::new(p, tol, *s, Mode::Free, on_wall, None);
    match hy.advance(s.tau + dt_max, &mut |_| {})? {
        Halt::Contact(wall) => {
            let pre = hy.state();
            Ok((pre, Some(resolve_contact(&pre, wall, p, tol))))
        }
        _ => Ok((hy.state(), None)),
    }
}
