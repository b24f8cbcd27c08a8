use serde::{Deserialize, Serialize};

use super::{domain, MetricsError};
use crate::dynamics::{SimState, SystemParams, Trajectory};

/// Energy channels normalized by the initial energy
/// `E0 = x1_0² + v1_0² + eps*v2_0²`, on the trajectory's sample grid.
///
/// The un-halved quadratic form decays as `d/dτ E = -2 eps lambda v1² - 2 c_e (v1-v2)²`,
/// so the damper and coil channels carry a factor two on the raw integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub e0: f64,
    pub tau: Vec<f64>,
    pub e_mech: Vec<f64>,
    pub e_damp: Vec<f64>,
    pub e_coil: Vec<f64>,
    pub e_imp: Vec<f64>,
    /// Relative energy: mechanical energy plus the damper and coil losses.
    pub e_r: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Channels {
    pub e_mech: f64,
    pub e_damp: f64,
    pub e_coil: f64,
    pub e_imp: f64,
}

pub(crate) fn channels(s: &SimState, p: &SystemParams, e0: f64) -> Channels {
    Channels {
        e_mech: s.mechanical_energy(p.eps) / e0,
        e_damp: 2.0 * p.eps * p.lambda * s.i_damp / e0,
        e_coil: 2.0 * p.c_e * s.i_coil / e0,
        e_imp: s.e_imp / e0,
    }
}

pub(crate) fn initial_energy(tr: &Trajectory) -> Result<f64, MetricsError> {
    let e0 = tr.initial().mechanical_energy(tr.params.eps);
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(domain(format!("initial energy must be > 0, got {e0}")));
    }
    Ok(e0)
}

pub fn build_ledger(tr: &Trajectory) -> Result<EnergyLedger, MetricsError> {
    let e0 = initial_energy(tr)?;
    let n = tr.samples.len();
    let mut l = EnergyLedger {
        e0,
        tau: Vec::with_capacity(n),
        e_mech: Vec::with_capacity(n),
        e_damp: Vec::with_capacity(n),
        e_coil: Vec::with_capacity(n),
        e_imp: Vec::with_capacity(n),
        e_r: Vec::with_capacity(n),
    };
    for s in &tr.samples {
        let c = channels(&s.state, &tr.params, e0);
        l.tau.push(s.state.tau);
        l.e_mech.push(c.e_mech);
        l.e_damp.push(c.e_damp);
        l.e_coil.push(c.e_coil);
        l.e_imp.push(c.e_imp);
        l.e_r.push(c.e_mech + c.e_damp + c.e_coil);
    }
    Ok(l)
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// `e_mech + e_damp + e_coil + e_imp` at sample `i`; one for an exact run.
    pub fn closure(&self, i: usize) -> f64 {
        self.e_mech[i] + self.e_damp[i] + self.e_coil[i] + self.e_imp[i]
    }
}

/// Relative energy at `tau`, linearly interpolated on the ledger grid.
/// At an impact instant the post-impact value is returned.
pub fn relative_energy(ledger: &EnergyLedger, tau: f64) -> Result<f64, MetricsError> {
    let (first, last) = match (ledger.tau.first(), ledger.tau.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(domain("empty ledger")),
    };
    if !(tau >= first && tau <= last) {
        return Err(domain(format!("tau={tau} outside ledger horizon [{first}, {last}]")));
    }
    let idx = ledger.tau.partition_point(|&t| t <= tau);
    let hi = idx.min(ledger.len() - 1);
    let lo = idx.saturating_sub(1);
    let (ta, tb) = (ledger.tau[lo], ledger.tau[hi]);
    if ta == tau || tb == ta {
        return Ok(ledger.e_r[lo]);
    }
    let s = (tau - ta) / (tb - ta);
    Ok(ledger.e_r[lo] + s * (ledger.e_r[hi] - ledger.e_r[lo]))
}
