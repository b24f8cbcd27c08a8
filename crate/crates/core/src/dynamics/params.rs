use serde::{Deserialize, Serialize};

use super::SimError;

/// Physical parameters of the oscillator, ball and harvesting circuit (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Primary mass (kg).
    pub big_m: f64,
    /// Ball mass (kg).
    pub m: f64,
    /// LO damping (N·s/m).
    pub c: f64,
    /// LO stiffness (N/m).
    pub k: f64,
    /// Transduction factor (V·s/m).
    pub k_t: f64,
    pub r_load: f64,
    pub r_coil: f64,
}

/// Result of [`nondimensionalize`]: the smooth-flow parameters and the time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    pub eps: f64,
    pub lambda: f64,
    pub c_e: f64,
    /// Natural frequency of the bare LO (rad/s); τ = ω·t.
    pub omega: f64,
}

impl ScaledParams {
    /// Completes the dimensionless set with the impact parameters.
    pub fn with_impact(self, kappa: f64, l_c: f64) -> Result<SystemParams, SimError> {
        SystemParams::new(self.eps, self.lambda, self.c_e, kappa, l_c)
    }

    pub fn to_tau(&self, t: f64) -> f64 {
        t * self.omega
    }
}

/// Dimensionless model parameters.
///
/// The LO damping enters the equations as `eps * lambda * v1`; the coil
/// acts on the relative velocity `v1 - v2` with coefficient `c_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub eps: f64,
    pub lambda: f64,
    pub c_e: f64,
    pub kappa: f64,
    /// Half-gap: impacts occur at `|x1 - x2| = l_c`.
    pub l_c: f64,
}

impl SystemParams {
    pub fn new(eps: f64, lambda: f64, c_e: f64, kappa: f64, l_c: f64) -> Result<Self, SimError> {
        let p = SystemParams { eps, lambda, c_e, kappa, l_c };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from a coil value quoted in relative coordinates
    /// (see [`coil_from_design`]).
    pub fn from_design(eps: f64, lambda: f64, c_e_design: f64, kappa: f64, l_c: f64) -> Result<Self, SimError> {
        Self::new(eps, lambda, coil_from_design(c_e_design, eps), kappa, l_c)
    }

    /// The coil coefficient expressed in relative coordinates.
    pub fn design_coil(&self) -> f64 {
        coil_to_design(self.c_e, self.eps)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.eps) && self.eps > 0.0) {
            return Err(SimError::domain(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(ok(self.lambda) && self.lambda >= 0.0) {
            return Err(SimError::domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(ok(self.c_e) && self.c_e >= 0.0) {
            return Err(SimError::domain(format!("c_e must be >= 0, got {}", self.c_e)));
        }
        if !(ok(self.kappa) && self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(SimError::domain(format!("kappa must lie in (0, 1], got {}", self.kappa)));
        }
        if !(ok(self.l_c) && self.l_c > 0.0) {
            return Err(SimError::domain(format!("l_c must be > 0, got {}", self.l_c)));
        }
        Ok(())
    }
}

/// Converts the coil parameter of the relative-coordinate equations,
/// `w'' + ... + c_e w' = f_c`, into the LO-frame coefficient of the flow:
/// `C_e = eps * c_e / (1 + eps)^(3/2)`.
///
/// Design variables, sweeps and presets quote the relative-coordinate value.
pub fn coil_from_design(c_e: f64, eps: f64) -> f64 {
    eps * c_e / (1.0 + eps).powf(1.5)
}

pub fn coil_to_design(c_e_frame: f64, eps: f64) -> f64 {
    c_e_frame * (1.0 + eps).powf(1.5) / eps
}

/// Maps physical parameters onto the dimensionless model.
///
/// ε = m/M, ω = √(k/M), λ = c/(M ω ε), c_e = k_t²/((R_load + R_coil) M ω).
pub fn nondimensionalize(p: &DimensionalParams) -> Result<ScaledParams, SimError> {
    let pos = |name: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(SimError::domain(format!("{name} must be finite and > 0, got {v}")))
        }
    };
    pos("M", p.big_m)?;
    pos("m", p.m)?;
    pos("k", p.k)?;
    if !(p.c.is_finite() && p.c >= 0.0) {
        return Err(SimError::domain(format!("c must be >= 0, got {}", p.c)));
    }
    if !(p.k_t.is_finite() && p.k_t >= 0.0) {
        return Err(SimError::domain(format!("k_t must be >= 0, got {}", p.k_t)));
    }
    let r_total = p.r_load + p.r_coil;
    if !(p.r_load >= 0.0 && p.r_coil >= 0.0 && r_total > 0.0 && r_total.is_finite()) {
        return Err(SimError::domain(format!(
            "resistances must be >= 0 with positive sum, got R_load={} R_coil={}",
            p.r_load, p.r_coil
        )));
    }
    let eps = p.m / p.big_m;
    let omega = (p.k / p.big_m).sqrt();
    let lambda = p.c / (p.big_m * omega * eps);
    let c_e = p.k_t * p.k_t / (r_total * p.big_m * omega);
    Ok(ScaledParams { eps, lambda, c_e, omega })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caption() -> DimensionalParams {
        DimensionalParams { big_m: 1.0, m: 0.05, c: 0.01, k: 1.0, k_t: 1.0, r_load: 15.0, r_coil: 5.0 }
    }

    #[test]
    fn caption_values() {
        let s = nondimensionalize(&caption()).unwrap();
        assert!((s.eps - 0.05).abs() < 1e-15);
        assert!((s.omega - 1.0).abs() < 1e-15);
        assert!((s.lambda - 0.2).abs() < 1e-14);
        assert!((s.c_e - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_damping_and_no_coil() {
        let mut p = caption();
        p.c = 0.0;
        p.k_t = 0.0;
        let s = nondimensionalize(&p).unwrap();
        assert_eq!(s.lambda, 0.0);
        assert_eq!(s.c_e, 0.0);
    }

    #[test]
    fn time_scaling() {
        let mut p = caption();
        p.k = 4.0;
        let s = nondimensionalize(&p).unwrap();
        assert!((s.omega - 2.0).abs() < 1e-15);
        assert!((s.to_tau(1.5) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_masses() {
        for f in [
            |p: &mut DimensionalParams| p.big_m = 0.0,
            |p: &mut DimensionalParams| p.m = -1.0,
            |p: &mut DimensionalParams| p.k = f64::NAN,
            |p: &mut DimensionalParams| p.r_load = -30.0,
        ] {
            let mut p = caption();
            f(&mut p);
            assert!(nondimensionalize(&p).is_err());
        }
    }

    #[test]
    fn design_coil_round_trip() {
        let c = coil_from_design(0.05, 0.05);
        assert!((c - 0.0025 / 1.05f64.powf(1.5)).abs() < 1e-16);
        assert!((coil_to_design(c, 0.05) - 0.05).abs() < 1e-15);
        let p = SystemParams::from_design(0.05, 0.2, 0.013, 0.39, 0.68).unwrap();
        assert!((p.design_coil() - 0.013).abs() < 1e-15);
    }

    #[test]
    fn system_params_invariants() {
        assert!(SystemParams::new(0.05, 0.2, 0.05, 0.54, 0.99).is_ok());
        assert!(SystemParams::new(0.05, 0.2, 0.05, 0.0, 0.99).is_err());
        assert!(SystemParams::new(0.05, 0.2, 0.05, 1.2, 0.99).is_err());
        assert!(SystemParams::new(0.0, 0.2, 0.05, 0.5, 0.99).is_err());
        assert!(SystemParams::new(0.05, -0.1, 0.05, 0.5, 0.99).is_err());
        assert!(SystemParams::new(0.05, 0.2, 0.05, 0.5, 0.0).is_err());
    }
}
