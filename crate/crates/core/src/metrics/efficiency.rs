use serde::{Deserialize, Serialize};

use super::ledger::{channels, initial_energy};
use super::{domain, MetricsError};
use crate::dynamics::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyMode {
    /// Impact plus coil losses at the horizon, as a percentage of the initial energy.
    #[default]
    DissipationFraction,
    /// Time average of the relative energy over `[0, horizon]`, in percent.
    TimeAveragedEr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub mode: EfficiencyMode,
    pub value: f64,
    pub horizon: f64,
    /// Percentage dissipated by impacts at the horizon.
    pub impact_share: f64,
    /// Percentage dissipated in the coil at the horizon.
    pub coil_share: f64,
}

pub fn efficiency(tr: &Trajectory, mode: EfficiencyMode, horizon: f64) -> Result<EfficiencyReport, MetricsError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(domain(format!("horizon must be > 0, got {horizon}")));
    }
    if horizon > tr.t_end {
        return Err(domain(format!("horizon {horizon} exceeds trajectory end {}", tr.t_end)));
    }
    let e0 = initial_energy(tr)?;
    let end = tr.state_at(horizon).map_err(|e| domain(e.to_string()))?;
    let c = channels(&end, &tr.params, e0);
    let impact_share = 100.0 * c.e_imp;
    let coil_share = 100.0 * c.e_coil;
    let value = match mode {
        EfficiencyMode::DissipationFraction => impact_share + coil_share,
        EfficiencyMode::TimeAveragedEr => {
            let e_r = |s| {
                let c = channels(s, &tr.params, e0);
                c.e_mech + c.e_damp + c.e_coil
            };
            let mut area = 0.0;
            let mut prev = (tr.initial().tau, e_r(tr.initial()));
            for smp in &tr.samples[1..] {
                if smp.state.tau >= horizon {
                    break;
                }
                let cur = (smp.state.tau, e_r(&smp.state));
                area += 0.5 * (cur.0 - prev.0) * (cur.1 + prev.1);
                prev = cur;
            }
            let last = e_r(&end);
            area += 0.5 * (horizon - prev.0) * (last + prev.1);
            100.0 * area / horizon
        }
    };
    Ok(EfficiencyReport { mode, value, horizon, impact_share, coil_share })
}

/// Share of the initial energy delivered to the load resistor by `t_end`.
pub fn harvested_energy(tr: &Trajectory, r_load: f64, r_coil: f64) -> Result<f64, MetricsError> {
    if !(r_load >= 0.0 && r_coil >= 0.0 && r_load.is_finite() && r_coil.is_finite()) {
        return Err(domain(format!("resistances must be >= 0, got R_load={r_load} R_coil={r_coil}")));
    }
    if r_load + r_coil <= 0.0 {
        return Err(domain("R_load + R_coil must be > 0"));
    }
    let e0 = initial_energy(tr)?;
    let c = channels(tr.last(), &tr.params, e0);
    Ok(c.e_coil * r_load / (r_load + r_coil))
}
