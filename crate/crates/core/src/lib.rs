//! Simulation, energy accounting and stochastic design optimization for a
//! linear oscillator fitted with a vibro-impact nonlinear energy sink and an
//! electromagnetic harvesting coil.

pub mod dynamics;
pub mod metrics;
pub mod optimizer;
pub mod scenarios;
pub mod stochastic;
