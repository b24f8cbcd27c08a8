//! Hybrid-system model of a linear oscillator (LO) carrying a ball in a
//! cavity (the vibro-impact sink) with an electromagnetic coil.
//!
//! Between impacts the flow is linear:
//!
//! ```text
//! x1'' = -eps*lambda*x1' - x1 - c_e*(x1' - x2')
//! x2'' = c_e*(x1' - x2') / eps
//! ```
//!
//! At `|x1 - x2| = l_c` a momentum-conserving restitution map is applied.
//! Dissipation is tracked through the accumulators `i_damp = ∫v1²`,
//! `i_coil = ∫(v1 - v2)²` and `e_imp`, the summed drop of `v1² + eps*v2²`.

mod dopri;
mod hybrid;
mod params;
mod roots;
mod simulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hybrid::step_to_event;
pub use params::{
    coil_from_design, coil_to_design, nondimensionalize, DimensionalParams, ScaledParams, SystemParams,
};
pub use simulate::{project_initial_state, simulate, simulate_with, InitialState, SimOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("step size underflow at tau={tau}: state {state:?}")]
    StepUnderflow { tau: f64, state: SimState },
    #[error("impact accumulation: {impacts} impacts by tau={tau} (limit {limit})")]
    Zeno { tau: f64, impacts: usize, limit: usize },
}

impl SimError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }
}

/// Instantaneous state plus dissipation accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimState {
    pub tau: f64,
    pub x1: f64,
    pub v1: f64,
    pub x2: f64,
    pub v2: f64,
    pub i_damp: f64,
    pub i_coil: f64,
    pub e_imp: f64,
}

impl SimState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    /// Relative displacement `x1 - x2`.
    pub fn gap(&self) -> f64 {
        self.x1 - self.x2
    }

    /// Relative velocity `v1 - v2`.
    pub fn rel_velocity(&self) -> f64 {
        self.v1 - self.v2
    }

    /// `x1² + v1² + eps*v2²`.
    pub fn mechanical_energy(&self, eps: f64) -> f64 {
        self.x1 * self.x1 + self.v1 * self.v1 + eps * self.v2 * self.v2
    }

    pub(crate) fn vector(&self) -> dopri::Vector {
        [self.x1, self.v1, self.x2, self.v2, self.i_damp, self.i_coil]
    }

    pub(crate) fn from_vector(tau: f64, y: &dopri::Vector, e_imp: f64) -> Self {
        SimState { tau, x1: y[0], v1: y[1], x2: y[2], v2: y[3], i_damp: y[4], i_coil: y[5], e_imp }
    }
}

/// Cavity end: `+1` for `w = +l_c`, `-1` for `w = -l_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wall {
    Upper,
    Lower,
}

impl Wall {
    pub fn sign(self) -> f64 {
        match self {
            Wall::Upper => 1.0,
            Wall::Lower => -1.0,
        }
    }

    pub fn of_gap(w: f64) -> Wall {
        if w >= 0.0 {
            Wall::Upper
        } else {
            Wall::Lower
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub tau: f64,
    pub wall: Wall,
    pub v1_pre: f64,
    pub v2_pre: f64,
    pub v1_post: f64,
    pub v2_post: f64,
    /// Drop of `v1² + eps*v2²` caused by the impact.
    pub energy_loss: f64,
    /// Contact with relative approach speed below `graze_eps`; the chattering
    /// guard decides between sticking and release.
    pub grazing: bool,
}

/// Interval during which the ball rides on a wall with the LO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickInterval {
    pub wall: Wall,
    pub start: f64,
    /// `None` when the trajectory ends while still stuck.
    pub end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    Grid,
    PreImpact,
    PostImpact,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub kind: SampleKind,
    pub state: SimState,
}

/// Sampled history of one run. Samples are non-decreasing in `tau`; an
/// impact contributes a pre/post pair at the same instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SystemParams,
    pub samples: Vec<Sample>,
    pub impacts: Vec<ImpactEvent>,
    pub sticks: Vec<StickInterval>,
    pub t_end: f64,
    /// The ball started outside the cavity and was moved onto the nearest wall.
    pub projected_initial: bool,
}

impl Trajectory {
    pub fn initial(&self) -> &SimState {
        &self.samples[0].state
    }

    pub fn last(&self) -> &SimState {
        &self.samples[self.samples.len() - 1].state
    }

    /// Uniform-grid samples only (plus the initial state), for spectral work.
    pub fn grid_states(&self) -> impl Iterator<Item = &SimState> + '_ {
        self.samples.iter().filter(|s| s.kind == SampleKind::Grid).map(|s| &s.state)
    }

    /// State at `tau` by linear interpolation between neighbouring samples.
    ///
    /// Impact instants resolve to the post-impact state.
    pub fn state_at(&self, tau: f64) -> Result<SimState, SimError> {
        let first = self.samples[0].state.tau;
        if !(tau >= first && tau <= self.t_end) {
            return Err(SimError::domain(format!(
                "tau={tau} outside trajectory horizon [{first}, {}]",
                self.t_end
            )));
        }
        let idx = self.samples.partition_point(|s| s.state.tau <= tau);
        let hi = idx.min(self.samples.len() - 1);
        let lo = idx.saturating_sub(1);
        let a = &self.samples[lo].state;
        let b = &self.samples[hi].state;
        if a.tau == tau || hi == lo || b.tau == a.tau {
            return Ok(*a);
        }
        let s = (tau - a.tau) / (b.tau - a.tau);
        let lerp = |u: f64, v: f64| u + s * (v - u);
        Ok(SimState {
            tau,
            x1: lerp(a.x1, b.x1),
            v1: lerp(a.v1, b.v1),
            x2: lerp(a.x2, b.x2),
            v2: lerp(a.v2, b.v2),
            i_damp: lerp(a.i_damp, b.i_damp),
            i_coil: lerp(a.i_coil, b.i_coil),
            e_imp: a.e_imp,
        })
    }
}

/// Integration and event tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Allowed wall penetration / event residual in `w`.
    pub gap_tol: f64,
    /// Event time resolution.
    pub time_tol: f64,
    /// Relative speed below which a contact counts as grazing.
    pub graze_eps: f64,
    pub h_max: f64,
    pub max_impacts: usize,
    /// Impacts closer together than this count toward the chattering limit.
    pub chatter_window: f64,
    pub chatter_limit: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            gap_tol: 1e-10,
            time_tol: 1e-10,
            graze_eps: 1e-9,
            h_max: 0.05,
            max_impacts: 1_000_000,
            chatter_window: 1e-9,
            chatter_limit: 100,
        }
    }
}

impl Tolerances {
    /// Tighter integration for conservation and oracle checks.
    pub fn tight() -> Self {
        Tolerances { rtol: 1e-13, atol: 1e-15, ..Self::default() }
    }

    /// Looser integration used inside Monte Carlo loops.
    pub fn fast() -> Self {
        Tolerances { rtol: 1e-8, atol: 1e-10, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let pos = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("gap_tol", self.gap_tol),
            ("time_tol", self.time_tol),
            ("graze_eps", self.graze_eps),
            ("h_max", self.h_max),
            ("chatter_window", self.chatter_window),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::domain(format!("tolerance {name} must be > 0, got {v}")));
            }
        }
        if self.max_impacts == 0 {
            return Err(SimError::domain("max_impacts must be >= 1"));
        }
        Ok(())
    }
}

/// Time derivative of the free-flight state.
///
/// Returns `(x1', v1', x2', v2', i_damp', i_coil')`.
pub fn rhs(s: &SimState, p: &SystemParams) -> [f64; 6] {
    free_rhs(&s.vector(), p)
}

#[inline]
pub(crate) fn free_rhs(y: &dopri::Vector, p: &SystemParams) -> dopri::Vector {
    let [x1, v1, _x2, v2, _, _] = *y;
    let r = v1 - v2;
    let coil = p.c_e * r;
    [v1, -p.eps * p.lambda * v1 - x1 - coil, v2, coil / p.eps, v1 * v1, r * r]
}

/// Flow with the ball pinned to a wall: both bodies share one velocity.
#[inline]
pub(crate) fn stuck_rhs(y: &dopri::Vector, p: &SystemParams) -> dopri::Vector {
    let [x1, v1, _x2, v2, _, _] = *y;
    let a = (-p.eps * p.lambda * v1 - x1) / (1.0 + p.eps);
    [v1, a, v2, a, v1 * v1, 0.0]
}

/// Relative acceleration the LO would impose on the pinned ball, measured
/// toward the wall. Positive means the wall must push to keep contact.
pub(crate) fn outward_accel(s: &SimState, p: &SystemParams, wall: Wall) -> f64 {
    let r = s.rel_velocity();
    let a1 = -p.eps * p.lambda * s.v1 - s.x1 - p.c_e * r;
    let a2 = p.c_e * r / p.eps;
    wall.sign() * (a1 - a2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactOutcome {
    pub v1_post: f64,
    pub v2_post: f64,
    pub energy_loss: f64,
}

/// Momentum-conserving restitution map.
///
/// With `P = v1 + eps*v2` and `r = v1 - v2`, the post-impact velocities are
/// `((P - eps*kappa*r)/(1+eps), (P + kappa*r)/(1+eps))`; the drop of
/// `v1² + eps*v2²` is `eps*(1-kappa²)*r²/(1+eps)`.
pub fn impact_map(v1_pre: f64, v2_pre: f64, p: &SystemParams) -> ImpactOutcome {
    let eps = p.eps;
    let mom = v1_pre + eps * v2_pre;
    let r = v1_pre - v2_pre;
    let denom = 1.0 + eps;
    ImpactOutcome {
        v1_post: (mom - eps * p.kappa * r) / denom,
        v2_post: (mom + p.kappa * r) / denom,
        energy_loss: eps * (1.0 - p.kappa * p.kappa) * r * r / denom,
    }
}

/// Centre-of-mass and relative coordinates `(X, X', w, w')` with
/// `X = x1 + eps*x2`, `w = x1 - x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComCoordinates {
    pub x: f64,
    pub x_dot: f64,
    pub w: f64,
    pub w_dot: f64,
}

impl ComCoordinates {
    /// Inverse transform back to `(x1, v1, x2, v2)`.
    pub fn to_bodies(&self, eps: f64) -> (f64, f64, f64, f64) {
        let d = 1.0 + eps;
        (
            (self.x + eps * self.w) / d,
            (self.x_dot + eps * self.w_dot) / d,
            (self.x - self.w) / d,
            (self.x_dot - self.w_dot) / d,
        )
    }
}

pub fn to_com_coordinates(s: &SimState, eps: f64) -> ComCoordinates {
    ComCoordinates {
        x: s.x1 + eps * s.x2,
        x_dot: s.v1 + eps * s.v2,
        w: s.x1 - s.x2,
        w_dot: s.v1 - s.v2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(eps: f64, lambda: f64, c_e: f64, kappa: f64) -> SystemParams {
        SystemParams::new(eps, lambda, c_e, kappa, 1.0).unwrap()
    }

    #[test]
    fn rhs_equilibrium() {
        let d = rhs(&SimState::at_rest(), &params(0.05, 0.2, 0.05, 0.5));
        assert_eq!(d, [0.0; 6]);
    }

    #[test]
    fn rhs_free_flight() {
        let s = SimState { v2: 1.0, ..SimState::at_rest() };
        let d = rhs(&s, &params(0.05, 0.0, 0.0, 0.5));
        assert_eq!(d[1], 0.0);
        assert_eq!(d[3], 0.0);
        assert_eq!(d[2], 1.0);
    }

    #[test]
    fn rhs_hand_evaluated() {
        let s = SimState { x1: 0.3, v1: 0.2, v2: -0.1, ..SimState::at_rest() };
        let d = rhs(&s, &params(0.05, 0.2, 0.05, 0.5));
        assert!((d[1] + 0.317).abs() < 1e-15);
        assert!((d[3] - 0.3).abs() < 1e-15);
        assert!((d[4] - 0.04).abs() < 1e-15);
        assert!((d[5] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn elastic_equal_mass_exchange() {
        let o = impact_map(1.0, 0.0, &params(1.0, 0.0, 0.0, 1.0));
        assert_eq!((o.v1_post, o.v2_post, o.energy_loss), (0.0, 1.0, 0.0));
    }

    #[test]
    fn zero_relative_velocity_is_identity() {
        let o = impact_map(0.7, 0.7, &params(0.05, 0.0, 0.0, 0.3));
        assert_eq!((o.v1_post, o.v2_post, o.energy_loss), (0.7, 0.7, 0.0));
    }

    #[test]
    fn impact_against_linear_solve() {
        let p = params(0.05, 0.0, 0.0, 0.54);
        let o = impact_map(0.5, 0.0, &p);
        // Independent 2x2 solve: [1 eps; 1 -1] [v1+ v2+]^T = [P; -kappa r].
        let (a, b, c, d) = (1.0, 0.05, 1.0, -1.0);
        let (rhs1, rhs2) = (0.5, -0.54 * 0.5);
        let det = a * d - b * c;
        let v1 = (rhs1 * d - b * rhs2) / det;
        let v2 = (a * rhs2 - c * rhs1) / det;
        assert!((o.v1_post - v1).abs() < 1e-15);
        assert!((o.v2_post - v2).abs() < 1e-15);
        assert!((o.v1_post - 0.463_333_333_333_333_3).abs() < 1e-15);
        assert!((o.v2_post - 0.733_333_333_333_333_3).abs() < 1e-15);
        let drop = 0.25 - (v1 * v1 + 0.05 * v2 * v2);
        assert!((o.energy_loss - drop).abs() < 1e-15);
        assert!((o.energy_loss - 0.008_433_333_333_333_3).abs() < 1e-15);
    }

    #[test]
    fn com_coordinates() {
        let c = to_com_coordinates(&SimState::at_rest(), 0.05);
        assert_eq!((c.x, c.w), (0.0, 0.0));
        let s = SimState { x1: 1.0, x2: -1.0, ..SimState::at_rest() };
        let c = to_com_coordinates(&s, 0.05);
        assert!((c.x - 0.95).abs() < 1e-15);
        assert_eq!(c.w, 2.0);
    }

    proptest! {
        #[test]
        fn com_round_trip(x1 in -5.0..5.0f64, v1 in -5.0..5.0f64, x2 in -5.0..5.0f64,
                          v2 in -5.0..5.0f64, eps in 0.001..2.0f64) {
            let s = SimState { x1, v1, x2, v2, ..SimState::at_rest() };
            let (a, b, c, d) = to_com_coordinates(&s, eps).to_bodies(eps);
            prop_assert!((a - x1).abs() < 1e-14 * (1.0 + x1.abs() + x2.abs()) * 4.0);
            prop_assert!((b - v1).abs() < 1e-14 * (1.0 + v1.abs() + v2.abs()) * 4.0);
            prop_assert!((c - x2).abs() < 1e-14 * (1.0 + x1.abs() + x2.abs()) * 4.0);
            prop_assert!((d - v2).abs() < 1e-14 * (1.0 + v1.abs() + v2.abs()) * 4.0);
        }

        #[test]
        fn impact_loss_nonnegative(v1 in -3.0..3.0f64, v2 in -3.0..3.0f64,
                                   eps in 0.001..1.0f64, kappa in 0.001..1.0f64) {
            let p = params(eps, 0.0, 0.0, kappa);
            let o = impact_map(v1, v2, &p);
            prop_assert!(o.energy_loss >= 0.0);
            let drop = v1 * v1 + eps * v2 * v2 - (o.v1_post * o.v1_post + eps * o.v2_post * o.v2_post);
            prop_assert!((drop - o.energy_loss).abs() < 1e-12);
        }
    }
}
