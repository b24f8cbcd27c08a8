//! Monte Carlo evaluation of designs under uncertain parameters and initial velocity.

mod rng;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{simulate_with, InitialState, SimOptions, SystemParams, Tolerances};
use crate::metrics::{efficiency, EfficiencyMode};

pub use rng::{mix64, substream, Variable};

/// Lower clamp for sampled design variables; the upper clamp is one.
pub const DESIGN_FLOOR: f64 = 0.001;

/// Largest tolerated share of failed samples in one estimate.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimate rejected: {failures} of {n} samples failed (first: {first})")]
    Rejected { failures: usize, n: usize, first: String },
}

fn domain(msg: impl Into<String>) -> StochasticError {
    StochasticError::Domain(msg.into())
}

/// Mean design values: restitution, cavity half-gap and coil (relative-coordinate scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub mu_kappa: f64,
    pub mu_lc: f64,
    pub mu_ce: f64,
}

impl DesignPoint {
    pub fn new(mu_kappa: f64, mu_lc: f64, mu_ce: f64) -> Self {
        DesignPoint { mu_kappa, mu_lc, mu_ce }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.mu_kappa, self.mu_lc, self.mu_ce]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        DesignPoint { mu_kappa: a[0], mu_lc: a[1], mu_ce: a[2] }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        for (name, v) in [("mu_kappa", self.mu_kappa), ("mu_lc", self.mu_lc), ("mu_ce", self.mu_ce)] {
            if !(v.is_finite() && (DESIGN_FLOOR..=1.0).contains(&v)) {
                return Err(domain(format!("{name} must lie in [{DESIGN_FLOOR}, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Aleatory {
    Uniform { lo: f64, hi: f64 },
    Point { value: f64 },
}

impl Aleatory {
    fn validate(&self) -> Result<(), StochasticError> {
        match *self {
            Aleatory::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            Aleatory::Point { value } if value.is_finite() => Ok(()),
            a => Err(domain(format!("invalid aleatory distribution {a:?}"))),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Aleatory::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Aleatory::Point { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyModel {
    /// Normal SD of (kappa, L_c, c_e) around the design means.
    pub design_sd: [f64; 3],
    /// Distribution of the initial LO velocity.
    pub aleatory: Aleatory,
    pub eps: f64,
    pub lambda: f64,
    pub x1_0: f64,
    pub x2_0: f64,
}

impl Default for UncertaintyModel {
    fn default() -> Self {
        UncertaintyModel {
            design_sd: [2.97e-3; 3],
            aleatory: Aleatory::Uniform { lo: 0.1, hi: 1.0 },
            eps: 0.05,
            lambda: 0.2,
            x1_0: 0.0,
            x2_0: 0.97,
        }
    }
}

impl UncertaintyModel {
    /// No design scatter and a fixed initial velocity.
    pub fn deterministic(v1: f64) -> Self {
        UncertaintyModel { design_sd: [0.0; 3], aleatory: Aleatory::Point { value: v1 }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        if self.design_sd.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(domain(format!("design_sd must be >= 0, got {:?}", self.design_sd)));
        }
        self.aleatory.validate()?;
        if !(self.eps.is_finite() && self.eps > 0.0 && self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(domain(format!("need eps > 0 and lambda >= 0, got {} and {}", self.eps, self.lambda)));
        }
        if !(self.x1_0.is_finite() && self.x2_0.is_finite()) {
            return Err(domain("initial positions must be finite"));
        }
        Ok(())
    }
}

/// Draws sample `index` for design `d`. The initial velocity depends only on
/// `(root_seed, index)`, so every design sees the same aleatory draws.
pub fn sample_inputs(
    d: &DesignPoint,
    u: &UncertaintyModel,
    index: u64,
    root_seed: u64,
) -> Result<(SystemParams, InitialState), StochasticError> {
    let vars = [Variable::Kappa, Variable::CavityLength, Variable::Coil];
    let mut x = d.to_array();
    for k in 0..3 {
        if u.design_sd[k] > 0.0 {
            let z: f64 = StandardNormal.sample(&mut substream(root_seed, index, vars[k]));
            x[k] = (x[k] + u.design_sd[k] * z).clamp(DESIGN_FLOOR, 1.0);
        }
    }
    let v1 = u.aleatory.draw(&mut substream(root_seed, index, Variable::InitialVelocity));
    let p = SystemParams::from_design(u.eps, u.lambda, x[2], x[0], x[1]).map_err(|e| domain(e.to_string()))?;
    Ok((p, InitialState { x1: u.x1_0, v1, x2: u.x2_0, v2: 0.0 }))
}

/// Maps one sampled configuration to an efficiency percentage.
pub trait SampleEvaluator: Sync {
    fn evaluate(&self, p: &SystemParams, init: &InitialState, horizon: f64) -> Result<f64, String>;
}

/// Full simulation followed by an efficiency measure at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simulator {
    pub tol: Tolerances,
    pub mode: EfficiencyMode,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator { tol: Tolerances::fast(), mode: EfficiencyMode::DissipationFraction }
    }
}

impl SampleEvaluator for Simulator {
    fn evaluate(&self, p: &SystemParams, init: &InitialState, horizon: f64) -> Result<f64, String> {
        let opts = SimOptions { tol: self.tol, sample_dt: None };
        let tr = simulate_with(p, init, horizon, &opts).map_err(|e| e.to_string())?;
        efficiency(&tr, self.mode, horizon).map(|r| r.value).map_err(|e| e.to_string())
    }
}

impl<F> SampleEvaluator for F
where
    F: Fn(&SystemParams, &InitialState, f64) -> Result<f64, String> + Sync,
{
    fn evaluate(&self, p: &SystemParams, init: &InitialState, horizon: f64) -> Result<f64, String> {
        self(p, init, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub sigma: f64,
    pub ci95: (f64, f64),
    /// Successful samples entering the statistics.
    pub n: usize,
    pub seed: u64,
    pub failures: usize,
}

/// Compensated (Neumaier) sum; order-fixed so results are reproducible.
pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Sample mean, (n-1)-denominator SD and normal 95% interval.
pub fn estimate_from_samples(values: &[f64], seed: u64, failures: usize) -> Result<McEstimate, StochasticError> {
    let n = values.len();
    if n < 2 {
        return Err(domain(format!("need at least 2 samples, got {n}")));
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    let sigma = var.sqrt();
    let half = 1.96 * sigma / (n as f64).sqrt();
    Ok(McEstimate { mean, sigma, ci95: (mean - half, mean + half), n, seed, failures })
}

/// Per-sample efficiencies (or failure messages) for indices `0..n`.
pub fn mc_samples_with<E: SampleEvaluator + ?Sized>(
    eval: &E,
    d: &DesignPoint,
    u: &UncertaintyModel,
    n: usize,
    root_seed: u64,
    horizon: f64,
) -> Result<Vec<Result<f64, String>>, StochasticError> {
    d.validate()?;
    u.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(domain(format!("horizon must be > 0, got {horizon}")));
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (p, init) = sample_inputs(d, u, i, root_seed).map_err(|e| e.to_string())?;
            eval.evaluate(&p, &init, horizon)
        })
        .collect())
}

fn summarize(results: &[Result<f64, String>], seed: u64) -> Result<McEstimate, StochasticError> {
    let ok: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures = results.len() - ok.len();
    if failures as f64 > MAX_FAILURE_RATE * results.len() as f64 {
        let first = results.iter().find_map(|r| r.as_ref().err().cloned()).unwrap_or_default();
        return Err(StochasticError::Rejected { failures, n: results.len(), first });
    }
    estimate_from_samples(&ok, seed, failures)
}

pub fn mc_estimate_with<E: SampleEvaluator + ?Sized>(
    eval: &E,
    d: &DesignPoint,
    u: &UncertaintyModel,
    n: usize,
    root_seed: u64,
    horizon: f64,
) -> Result<McEstimate, StochasticError> {
    if n < 2 {
        return Err(domain(format!("need n >= 2, got {n}")));
    }
    summarize(&mc_samples_with(eval, d, u, n, root_seed, horizon)?, root_seed)
}

/// Monte Carlo estimate of the dissipation-fraction efficiency.
pub fn mc_estimate(
    d: &DesignPoint,
    u: &UncertaintyModel,
    n: usize,
    root_seed: u64,
    horizon: f64,
) -> Result<McEstimate, StochasticError> {
    mc_estimate_with(&Simulator::default(), d, u, n, root_seed, horizon)
}

/// Several designs evaluated on the same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub designs: Vec<DesignPoint>,
    pub estimates: Vec<McEstimate>,
    /// Initial velocity of each sample, shared by every design.
    pub v1: Vec<f64>,
    /// `values[d][i]`: efficiency of design `d` on sample `i`, `None` if it failed.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn compare_designs_with<E: SampleEvaluator + ?Sized>(
    eval: &E,
    designs: &[DesignPoint],
    u: &UncertaintyModel,
    n: usize,
    root_seed: u64,
    horizon: f64,
) -> Result<Comparison, StochasticError> {
    if designs.is_empty() {
        return Err(domain("need at least one design"));
    }
    if n < 2 {
        return Err(domain(format!("need n >= 2, got {n}")));
    }
    u.validate()?;
    let v1 = (0..n as u64)
        .map(|i| u.aleatory.draw(&mut substream(root_seed, i, Variable::InitialVelocity)))
        .collect();
    let mut estimates = Vec::with_capacity(designs.len());
    let mut values = Vec::with_capacity(designs.len());
    for d in designs {
        let r = mc_samples_with(eval, d, u, n, root_seed, horizon)?;
        estimates.push(summarize(&r, root_seed)?);
        values.push(r.into_iter().map(Result::ok).collect());
    }
    Ok(Comparison { designs: designs.to_vec(), estimates, v1, values })
}

pub fn compare_designs(
    designs: &[DesignPoint],
    u: &UncertaintyModel,
    n: usize,
    root_seed: u64,
    horizon: f64,
) -> Result<Comparison, StochasticError> {
    compare_designs_with(&Simulator::default(), designs, u, n, root_seed, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(v: f64) -> impl Fn(&SystemParams, &InitialState, f64) -> Result<f64, String> + Sync {
        move |_: &SystemParams, _: &InitialState, _: f64| Ok(v)
    }

    #[test]
    fn zero_sd_gives_means() {
        let d = DesignPoint::new(0.39, 0.68, 0.013);
        let u = UncertaintyModel { design_sd: [0.0; 3], ..Default::default() };
        let (p, init) = sample_inputs(&d, &u, 5, 11).unwrap();
        assert_eq!(p.kappa, 0.39);
        assert_eq!(p.l_c, 0.68);
        assert!((p.design_coil() - 0.013).abs() < 1e-15);
        assert_eq!((init.x1, init.x2, init.v2), (0.0, 0.97, 0.0));
    }

    #[test]
    fn common_random_numbers() {
        let u = UncertaintyModel::default();
        let a = sample_inputs(&DesignPoint::new(0.39, 0.68, 0.013), &u, 17, 3).unwrap();
        let b = sample_inputs(&DesignPoint::new(0.9, 0.1, 0.5), &u, 17, 3).unwrap();
        assert_eq!(a.1.v1, b.1.v1);
        let c = sample_inputs(&DesignPoint::new(0.39, 0.68, 0.013), &u, 18, 3).unwrap();
        assert_ne!(a.1.v1, c.1.v1);
    }

    #[test]
    fn uniform_mean() {
        let u = UncertaintyModel::default();
        let d = DesignPoint::new(0.5, 0.5, 0.5);
        let n = 100_000u64;
        let s: f64 = (0..n).map(|i| sample_inputs(&d, &u, i, 1).unwrap().1.v1).sum();
        assert!((s / n as f64 - 0.55).abs() < 0.01);
    }

    #[test]
    fn clamping_at_bounds() {
        let u = UncertaintyModel { design_sd: [0.5; 3], ..Default::default() };
        let d = DesignPoint::new(0.001, 1.0, 0.5);
        for i in 0..2000 {
            let (p, _) = sample_inputs(&d, &u, i, 9).unwrap();
            assert!(p.kappa >= DESIGN_FLOOR && p.kappa <= 1.0);
            assert!(p.l_c >= DESIGN_FLOOR && p.l_c <= 1.0);
            let c = p.design_coil();
            assert!((DESIGN_FLOOR * (1.0 - 1e-12)..=1.0 + 1e-12).contains(&c));
        }
    }

    #[test]
    fn constant_objective() {
        let e = mc_estimate_with(&stub(50.0), &DesignPoint::new(0.5, 0.5, 0.5), &UncertaintyModel::default(), 64, 0, 30.0)
            .unwrap();
        assert_eq!((e.mean, e.sigma, e.n, e.failures), (50.0, 0.0, 64, 0));
    }

    #[test]
    fn injected_samples() {
        let e = estimate_from_samples(&[0.2, 0.4, 0.6, 0.8], 0, 0).unwrap();
        assert!((e.mean - 0.5).abs() < 1e-15);
        assert!((e.sigma - 0.2581989).abs() < 1e-7);
        assert!(estimate_from_samples(&[1.0], 0, 0).is_err());
    }

    #[test]
    fn interval_formula() {
        let half = 1.96 * 15.59 / 1000f64.sqrt();
        assert!(((69.74 - half) * 100.0).round() / 100.0 == 68.77);
        assert!(((69.74 + half) * 100.0).round() / 100.0 == 70.71);
        let e = estimate_from_samples(&[1.0, 2.0, 4.0, 8.0], 0, 0).unwrap();
        let h = 1.96 * e.sigma / 2.0;
        assert!((e.ci95.0 - (e.mean - h)).abs() < 1e-15 && (e.ci95.1 - (e.mean + h)).abs() < 1e-15);
    }

    #[test]
    fn failure_accounting() {
        let flaky = |_: &SystemParams, init: &InitialState, _: f64| {
            if init.v1 < 0.13 { Err("boom".to_string()) } else { Ok(init.v1) }
        };
        let d = DesignPoint::new(0.5, 0.5, 0.5);
        let u = UncertaintyModel::default();
        let e = mc_estimate_with(&flaky, &d, &u, 1000, 4, 30.0).unwrap();
        assert!(e.failures > 0 && e.failures + e.n == 1000);
        let bad = |_: &SystemParams, init: &InitialState, _: f64| {
            if init.v1 < 0.3 { Err("boom".to_string()) } else { Ok(1.0) }
        };
        assert!(matches!(mc_estimate_with(&bad, &d, &u, 1000, 4, 30.0), Err(StochasticError::Rejected { .. })));
    }

    #[test]
    fn comparison_shares_draws() {
        let ev = |_: &SystemParams, init: &InitialState, _: f64| Ok(init.v1 * 100.0);
        let d = DesignPoint::new(0.39, 0.68, 0.013);
        let c = compare_designs_with(&ev, &[d, d], &UncertaintyModel::default(), 50, 2, 30.0).unwrap();
        assert_eq!(c.estimates[0], c.estimates[1]);
        for i in 0..50 {
            assert_eq!(c.values[0][i], Some(c.v1[i] * 100.0));
        }
    }

    #[test]
    fn simulated_estimate_is_reproducible() {
        let d = DesignPoint::new(0.39, 0.68, 0.013);
        let u = UncertaintyModel::default();
        let a = mc_estimate(&d, &u, 16, 5, 30.0).unwrap();
        let b = mc_estimate(&d, &u, 16, 5, 30.0).unwrap();
        assert_eq!(a, b);
        assert!(a.mean > 0.0 && a.mean < 100.0);
    }

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(xs), 2.0);
    }
}
