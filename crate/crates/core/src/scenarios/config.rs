use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::dynamics::{InitialState, SystemParams, Tolerances};
use crate::metrics::EfficiencyMode;
use crate::optimizer::{Bounds, DesignSpace, GaConfig};
use crate::stochastic::{Aleatory, DesignPoint, UncertaintyModel};

fn cfg_err(msg: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Config(msg.to_string())
}

/// Model parameters. `c_e` is quoted in relative coordinates, like every
/// design-level coil value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub eps: f64,
    pub lambda: f64,
    pub c_e: f64,
    pub kappa: f64,
    pub l_c: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { eps: 0.05, lambda: 0.2, c_e: 0.05, kappa: 0.54, l_c: 0.99 }
    }
}

impl ModelConfig {
    pub fn params(&self) -> Result<SystemParams, ScenarioError> {
        SystemParams::from_design(self.eps, self.lambda, self.c_e, self.kappa, self.l_c).map_err(cfg_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub x1: f64,
    pub v1: f64,
    pub x2: f64,
    pub v2: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { x1: 0.0, v1: 0.5, x2: 0.97, v2: 0.0 }
    }
}

impl From<InitialConfig> for InitialState {
    fn from(c: InitialConfig) -> Self {
        InitialState { x1: c.x1, v1: c.v1, x2: c.x2, v2: c.v2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub horizon: f64,
    pub sample_dt: f64,
    pub tolerances: Tolerances,
    pub wavelet: bool,
    /// Keep every n-th grid column of the wavelet matrix.
    pub wavelet_stride: usize,
    pub spectrum: bool,
    /// Optional load and coil resistances for the harvested-energy split.
    pub r_load: Option<f64>,
    pub r_coil: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            horizon: 60.0,
            sample_dt: 0.01,
            tolerances: Tolerances::default(),
            wavelet: true,
            wavelet_stride: 10,
            spectrum: true,
            r_load: None,
            r_coil: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfficiencyConfig {
    pub mode: EfficiencyMode,
    /// Horizon τ_H used by every efficiency evaluation.
    pub horizon: f64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig { mode: EfficiencyMode::DissipationFraction, horizon: 30.0 }
    }
}

/// GA settings; the seed and horizon come from the top level and `[efficiency]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSection {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub eta_c: f64,
    pub mutation_rate: Option<f64>,
    pub mutation_sd: f64,
    pub elites: usize,
    pub mc_samples: usize,
}

impl Default for GaSection {
    fn default() -> Self {
        let g = GaConfig::default();
        GaSection {
            population: g.population,
            generations: g.generations,
            tournament: g.tournament,
            crossover_rate: g.crossover_rate,
            eta_c: g.eta_c,
            mutation_rate: g.mutation_rate,
            mutation_sd: g.mutation_sd,
            elites: g.elites,
            mc_samples: g.mc_samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    #[default]
    Stochastic,
    Deterministic,
    Nsga2,
}

impl std::str::FromStr for OptimizeMode {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(OptimizeMode::Stochastic),
            "deterministic" => Ok(OptimizeMode::Deterministic),
            "nsga2" => Ok(OptimizeMode::Nsga2),
            _ => Err(cfg_err(format!("unknown mode {s:?}; expected stochastic, deterministic or nsga2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub mode: OptimizeMode,
    /// Initial velocity of the deterministic mode.
    pub v1: f64,
    /// Samples of the final re-evaluation under `[uncertainty]`.
    pub final_samples: usize,
    pub free: [bool; 3],
    pub fixed: DesignPoint,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            mode: OptimizeMode::Stochastic,
            v1: 0.55,
            final_samples: 1000,
            free: [true; 3],
            fixed: DesignPoint::new(0.39, 0.68, 0.013),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignVar {
    Kappa,
    LC,
    CE,
}

impl DesignVar {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["kappa", "l_c", "c_e"][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub var: DesignVar,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|k| if k + 1 == self.n { self.hi } else { self.lo + step * k as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub x: Axis,
    pub y: Axis,
    /// Values of the variable not on an axis.
    pub fixed: DesignPoint,
    /// Fixed initial velocity; without it each cell is a Monte Carlo mean.
    pub v1: Option<f64>,
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            x: Axis { var: DesignVar::Kappa, lo: 0.1, hi: 1.0, n: 10 },
            y: Axis { var: DesignVar::CE, lo: 0.05, hi: 1.0, n: 5 },
            fixed: DesignPoint::new(0.6, 1.0, 0.05),
            v1: None,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDesign {
    pub label: String,
    pub mu_kappa: f64,
    pub mu_lc: f64,
    pub mu_ce: f64,
}

impl NamedDesign {
    pub fn new(label: &str, d: DesignPoint) -> Self {
        NamedDesign { label: label.into(), mu_kappa: d.mu_kappa, mu_lc: d.mu_lc, mu_ce: d.mu_ce }
    }

    pub fn design(&self) -> DesignPoint {
        DesignPoint::new(self.mu_kappa, self.mu_lc, self.mu_ce)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub designs: Vec<NamedDesign>,
    pub samples: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        let d = |label: &str, k, l, c| NamedDesign::new(label, DesignPoint::new(k, l, c));
        CompareConfig {
            designs: vec![
                d("stochastic", 0.39, 0.68, 0.013),
                d("deterministic_v0.1", 0.54, 0.27, 0.06),
                d("deterministic_v0.55", 0.43, 0.98, 0.013),
                d("deterministic_v1", 0.25, 1.0, 0.011),
            ],
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Include the GA-based checks (several minutes).
    pub full: bool,
}

/// Complete run description; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub simulate: SimulateConfig,
    pub efficiency: EfficiencyConfig,
    pub uncertainty: UncertaintyModel,
    pub bounds: Bounds,
    pub ga: GaSection,
    pub optimize: OptimizeConfig,
    pub sweep: SweepConfig,
    pub compare: CompareConfig,
    pub validate: ValidateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(cfg_err)
    }

    /// Reads a TOML config, or the `config` entry of a run manifest (`.json`).
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("reading {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(cfg_err)?;
            let cfg = v.get("config").ok_or_else(|| cfg_err("manifest has no `config` entry"))?;
            return serde_json::from_value(cfg.clone()).map_err(cfg_err);
        }
        Self::from_toml(&text)
    }

    pub fn ga_config(&self) -> GaConfig {
        let g = &self.ga;
        GaConfig {
            population: g.population,
            generations: g.generations,
            tournament: g.tournament,
            crossover_rate: g.crossover_rate,
            eta_c: g.eta_c,
            mutation_rate: g.mutation_rate,
            mutation_sd: g.mutation_sd,
            elites: g.elites,
            root_seed: self.seed,
            mc_samples: g.mc_samples,
            horizon: self.efficiency.horizon,
        }
    }

    pub fn design_space(&self) -> DesignSpace {
        DesignSpace { bounds: self.bounds, free: self.optimize.free, fixed: self.optimize.fixed }
    }

    /// The uncertainty model with the model block's eps and lambda.
    pub fn uncertainty(&self) -> UncertaintyModel {
        UncertaintyModel { eps: self.model.eps, lambda: self.model.lambda, ..self.uncertainty }
    }

    /// Checks every block against the invariants of the module it feeds.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.model.params()?;
        let init = self.initial;
        if ![init.x1, init.v1, init.x2, init.v2].iter().all(|v| v.is_finite()) {
            return Err(cfg_err("initial state must be finite"));
        }
        let s = &self.simulate;
        if !(s.horizon.is_finite() && s.horizon > 0.0) {
            return Err(cfg_err(format!("simulate.horizon must be > 0, got {}", s.horizon)));
        }
        if !(s.sample_dt.is_finite() && s.sample_dt > 0.0 && s.sample_dt < s.horizon) {
            return Err(cfg_err(format!("simulate.sample_dt must lie in (0, horizon), got {}", s.sample_dt)));
        }
        if s.wavelet_stride == 0 {
            return Err(cfg_err("simulate.wavelet_stride must be >= 1"));
        }
        if s.r_load.is_some() != s.r_coil.is_some() {
            return Err(cfg_err("simulate.r_load and simulate.r_coil must be given together"));
        }
        s.tolerances.validate().map_err(cfg_err)?;
        let h = self.efficiency.horizon;
        if !(h.is_finite() && h > 0.0) {
            return Err(cfg_err(format!("efficiency.horizon must be > 0, got {h}")));
        }
        self.uncertainty().validate().map_err(cfg_err)?;
        self.ga_config().validate().map_err(cfg_err)?;
        self.design_space().validate().map_err(cfg_err)?;
        let o = &self.optimize;
        if !(o.v1.is_finite()) || o.final_samples < 2 {
            return Err(cfg_err("optimize.v1 must be finite and optimize.final_samples >= 2"));
        }
        let w = &self.sweep;
        for a in [&w.x, &w.y] {
            if a.n < 2 || !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(cfg_err(format!("sweep axis {:?} needs n >= 2 and lo < hi", a.var)));
            }
            DesignPoint::new(a.lo, a.lo, a.lo).validate().map_err(cfg_err)?;
            DesignPoint::new(a.hi, a.hi, a.hi).validate().map_err(cfg_err)?;
        }
        if w.x.var == w.y.var {
            return Err(cfg_err("sweep axes must use different variables"));
        }
        w.fixed.validate().map_err(cfg_err)?;
        if w.samples < 2 || w.v1.is_some_and(|v| !v.is_finite()) {
            return Err(cfg_err("sweep.samples must be >= 2 and sweep.v1 finite"));
        }
        let c = &self.compare;
        if c.designs.len() < 2 {
            return Err(cfg_err("compare needs at least two designs"));
        }
        for (i, d) in c.designs.iter().enumerate() {
            d.design().validate().map_err(cfg_err)?;
            if c.designs[..i].iter().any(|e| e.label == d.label) || d.label.is_empty() {
                return Err(cfg_err(format!("compare labels must be unique and non-empty: {:?}", d.label)));
            }
        }
        if c.samples < 2 {
            return Err(cfg_err("compare.samples must be >= 2"));
        }
        Ok(())
    }

    /// Tercile boundaries of the initial-velocity distribution used for clustering.
    pub fn clusters(&self) -> Vec<(String, f64, f64)> {
        match self.uncertainty.aleatory {
            Aleatory::Uniform { lo, hi } => {
                let d = (hi - lo) / 3.0;
                vec![
                    ("low".into(), lo, lo + d),
                    ("mid".into(), lo + d, lo + 2.0 * d),
                    ("high".into(), lo + 2.0 * d, hi),
                ]
            }
            Aleatory::Point { value } => vec![("point".into(), value, value)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.uncertainty.aleatory, Aleatory::Uniform { lo: 0.1, hi: 1.0 });
        assert_eq!((c.initial.x1, c.initial.x2), (0.0, 0.97));
        assert_eq!(c.efficiency.horizon, 30.0);
        assert_eq!(c.compare.samples, 1000);
    }

    #[test]
    fn partial_toml_and_unknown_keys() {
        let c = RunConfig::from_toml("seed = 7\n[model]\nkappa = 0.3\n[ga]\ngenerations = 3\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.kappa, 0.3);
        assert_eq!(c.model.l_c, 0.99);
        assert_eq!(c.ga_config().generations, 3);
        assert_eq!(c.ga_config().root_seed, 7);
        assert!(RunConfig::from_toml("[model]\nkapa = 0.3\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "[model]\nkappa = 1.5\n",
            "[simulate]\nhorizon = -1.0\n",
            "[ga]\npopulation = 7\n",
            "[sweep.x]\nvar = \"kappa\"\nlo = 0.1\nhi = 1.0\nn = 1\n",
            "[uncertainty.aleatory]\nkind = \"uniform\"\nlo = 1.0\nhi = 0.1\n",
            "[compare]\ndesigns = [{ label = \"a\", mu_kappa = 0.5, mu_lc = 0.5, mu_ce = 0.5 }]\n",
        ] {
            let c = RunConfig::from_toml(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }

    #[test]
    fn compare_designs_parse() {
        let text = "[compare]\nsamples = 10\ndesigns = [\n  { label = \"a\", mu_kappa = 0.5, mu_lc = 0.5, mu_ce = 0.5 },\n  { label = \"b\", mu_kappa = 0.4, mu_lc = 0.5, mu_ce = 0.5 },\n]\n";
        let c = RunConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.compare.designs[1].mu_kappa, 0.4);
    }

    #[test]
    fn axis_values_hit_ends() {
        let a = Axis { var: DesignVar::LC, lo: 0.1, hi: 0.7, n: 4 };
        let v = a.values();
        assert_eq!(v.len(), 4);
        assert_eq!((v[0], v[3]), (0.1, 0.7));
        assert!((v[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn tercile_clusters() {
        let c = RunConfig::default().clusters();
        assert_eq!(c.len(), 3);
        assert!((c[0].2 - 0.4).abs() < 1e-15 && (c[1].2 - 0.7).abs() < 1e-15);
    }
}
