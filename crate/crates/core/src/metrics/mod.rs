//! Energy accounting, efficiency measures and response diagnostics.

mod cycles;
mod efficiency;
mod ledger;
mod spectrum;
mod wavelet;

use thiserror::Error;

pub use cycles::{bin_impacts, impacts_per_cycle, upward_crossings, CycleCount, MIN_CYCLE};
pub use efficiency::{efficiency, harvested_energy, EfficiencyMode, EfficiencyReport};
pub use ledger::{build_ledger, relative_energy, EnergyLedger};
pub use spectrum::{amplitude_spectrum, Window};
pub use wavelet::{cwt_morlet, default_scales, frequency_of_scale, log_scales, scale_of_frequency, MORLET_OMEGA0};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> MetricsError {
    MetricsError::Domain(msg.into())
}

/// Returns the spacing of a uniform grid, or an error if the grid is not uniform.
pub fn uniform_step(tau: &[f64]) -> Result<f64, MetricsError> {
    if tau.len() < 2 {
        return Err(domain("need at least two samples"));
    }
    let dt = (tau[tau.len() - 1] - tau[0]) / (tau.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(domain("grid must be strictly increasing"));
    }
    for (i, t) in tau.iter().enumerate() {
        let expect = tau[0] + i as f64 * dt;
        if (t - expect).abs() > 1e-6 * dt {
            return Err(domain(format!("non-uniform grid at index {i}: {t} vs {expect}")));
        }
    }
    Ok(dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_detection() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        assert!((uniform_step(&t).unwrap() - 0.01).abs() < 1e-15);
        let mut bad = t.clone();
        bad[50] += 0.003;
        assert!(uniform_step(&bad).is_err());
        assert!(uniform_step(&[0.0]).is_err());
    }
}
