//! Run configuration, report bundles and the command implementations behind the CLI.

mod commands;
mod config;
mod report;
pub mod validation;

use thiserror::Error;

pub use commands::{
    cmd_compare, cmd_compare_with, cmd_optimize, cmd_optimize_with, cmd_simulate, cmd_sweep, cmd_sweep_with,
    cmd_validate,
};
pub use config::{
    Axis, CompareConfig, DesignVar, EfficiencyConfig, GaSection, InitialConfig, ModelConfig, NamedDesign,
    OptimizeConfig, OptimizeMode, RunConfig, SimulateConfig, SweepConfig, ValidateConfig,
};
pub use report::{ecdf, fmt_f64, histogram, Bundle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("optimization error: {0}")]
    Optimization(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            ScenarioError::Simulation(_) => 3,
            ScenarioError::Optimization(_) => 4,
            ScenarioError::Validation(_) => 5,
            ScenarioError::Io(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Config(_) => "config",
            ScenarioError::Simulation(_) => "simulation",
            ScenarioError::Optimization(_) => "optimization",
            ScenarioError::Validation(_) => "validation",
            ScenarioError::Io(_) => "io",
        }
    }
}
