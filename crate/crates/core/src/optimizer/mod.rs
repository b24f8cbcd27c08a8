//! Real-coded genetic algorithms over the three design means.
//!
//! Every individual of a generation is scored with the same seed, so noisy
//! objectives compare designs on common random numbers. Carried-over elites
//! are scored again with the next generation's seed.

mod ga;
mod nsga2;
mod objective;

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stochastic::{mix64, DesignPoint};

pub use ga::ga_optimize;
pub use nsga2::{crowding_distance, dominates, non_dominated_sort, nsga2_optimize};
pub use objective::{evaluate_fitness, FnObjective, McObjective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn config(msg: impl Into<String>) -> OptimError {
    OptimError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { lo: [0.001; 3], hi: [1.0; 3] }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), OptimError> {
        for k in 0..3 {
            if !(self.lo[k].is_finite() && self.hi[k].is_finite() && self.lo[k] < self.hi[k]) {
                return Err(config(format!("bounds[{k}] must satisfy lo < hi, got [{}, {}]", self.lo[k], self.hi[k])));
            }
        }
        Ok(())
    }

    pub fn contains(&self, d: &DesignPoint) -> bool {
        let x = d.to_array();
        (0..3).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }
}

/// Which design variables the search may move; the rest stay at `fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpace {
    pub bounds: Bounds,
    pub free: [bool; 3],
    pub fixed: DesignPoint,
}

impl Default for DesignSpace {
    fn default() -> Self {
        DesignSpace { bounds: Bounds::default(), free: [true; 3], fixed: DesignPoint::new(0.5, 0.5, 0.5) }
    }
}

impl DesignSpace {
    pub fn all_free(bounds: Bounds) -> Self {
        DesignSpace { bounds, ..Default::default() }
    }

    /// Only the cavity half-gap moves.
    pub fn cavity_only(bounds: Bounds, fixed: DesignPoint) -> Self {
        DesignSpace { bounds, free: [false, true, false], fixed }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        self.bounds.validate()?;
        if !self.free.iter().any(|&f| f) {
            return Err(config("at least one design variable must be free"));
        }
        let x = self.fixed.to_array();
        for k in (0..3).filter(|&k| !self.free[k]) {
            if !(x[k] >= self.bounds.lo[k] && x[k] <= self.bounds.hi[k]) {
                return Err(config(format!("fixed design {:?} outside bounds", self.fixed)));
            }
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        (0..3).filter(|&k| self.free[k]).collect()
    }

    fn design(&self, genes: &[f64]) -> DesignPoint {
        let mut x = self.fixed.to_array();
        for (g, k) in genes.iter().zip(self.dims()) {
            x[k] = *g;
        }
        DesignPoint::from_array(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Per-gene mutation probability; `None` means one over the number of free variables.
    pub mutation_rate: Option<f64>,
    /// Mutation SD as a fraction of each variable's range.
    pub mutation_sd: f64,
    pub elites: usize,
    pub root_seed: u64,
    pub mc_samples: usize,
    pub horizon: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 32,
            generations: 40,
            tournament: 2,
            crossover_rate: 0.9,
            eta_c: 15.0,
            mutation_rate: None,
            mutation_sd: 0.05,
            elites: 2,
            root_seed: 0,
            mc_samples: 200,
            horizon: 30.0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(config(format!("population must be even and >= 4, got {}", self.population)));
        }
        if self.generations < 1 {
            return Err(config("generations must be >= 1"));
        }
        if self.tournament < 1 || self.tournament > self.population {
            return Err(config(format!("tournament size {} out of range", self.tournament)));
        }
        let rate = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !rate(self.crossover_rate) || !self.mutation_rate.is_none_or(rate) {
            return Err(config("crossover and mutation rates must lie in [0, 1]"));
        }
        if !(self.eta_c.is_finite() && self.eta_c >= 0.0) {
            return Err(config(format!("eta_c must be >= 0, got {}", self.eta_c)));
        }
        if !(self.mutation_sd.is_finite() && self.mutation_sd >= 0.0) {
            return Err(config(format!("mutation_sd must be >= 0, got {}", self.mutation_sd)));
        }
        if self.elites >= self.population {
            return Err(config("elites must be fewer than the population"));
        }
        if self.mc_samples < 2 {
            return Err(config("mc_samples must be >= 2"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(config(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub(crate) fn generation_seed(&self, gen: usize) -> u64 {
        mix64(self.root_seed, gen as u64)
    }
}

/// Scored design. Failed evaluations carry `mean = -inf`, `sigma = +inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    pub sigma: f64,
    /// Simulations spent; zero for analytic objectives.
    pub simulations: u64,
}

impl Evaluation {
    pub fn failed() -> Self {
        Evaluation { mean: f64::NEG_INFINITY, sigma: f64::INFINITY, simulations: 0 }
    }

    fn fitness(&self) -> f64 {
        if self.mean.is_nan() { f64::NEG_INFINITY } else { self.mean }
    }
}

/// Something the GA can score. `seed` is shared by a whole generation.
pub trait Objective: Sync {
    fn evaluate(&self, d: &DesignPoint, seed: u64) -> Result<Evaluation, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub design: DesignPoint,
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_ever: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Best-ever individual (single objective) or the max-mean end of the front.
    pub best: Scored,
    /// Non-dominated set; empty in single-objective mode.
    pub front: Vec<Scored>,
    pub history: Vec<GenerationStats>,
    pub evaluations: u64,
    pub cache_hits: u64,
    pub simulations: u64,
    /// Messages from failed evaluations.
    pub log: Vec<String>,
}

type CacheKey = ([i64; 3], u64);

/// Memoizing, order-independent batch evaluator.
struct Evaluator<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cache: HashMap<CacheKey, Evaluation>,
    evaluations: u64,
    hits: u64,
    simulations: u64,
    log: Vec<String>,
}

fn quantize(d: &DesignPoint) -> [i64; 3] {
    d.to_array().map(|v| (v * 1e6).round() as i64)
}

impl<'a, O: Objective + ?Sized> Evaluator<'a, O> {
    fn new(objective: &'a O) -> Self {
        Evaluator { objective, cache: HashMap::new(), evaluations: 0, hits: 0, simulations: 0, log: Vec::new() }
    }

    fn score(&mut self, designs: &[DesignPoint], seed: u64) -> Vec<Evaluation> {
        let keys: Vec<CacheKey> = designs.iter().map(|d| (quantize(d), seed)).collect();
        let mut todo: Vec<usize> = Vec::new();
        let mut seen: HashMap<CacheKey, ()> = HashMap::new();
        for (i, k) in keys.iter().enumerate() {
            if self.cache.contains_key(k) || seen.insert(*k, ()).is_some() {
                self.hits += 1;
            } else {
                todo.push(i);
            }
        }
        let fresh: Vec<Result<Evaluation, String>> =
            todo.par_iter().map(|&i| self.objective.evaluate(&designs[i], seed)).collect();
        for (&i, r) in todo.iter().zip(fresh) {
            self.evaluations += 1;
            let ev = r.unwrap_or_else(|msg| {
                self.log.push(format!("design {:?}: {msg}", designs[i]));
                Evaluation::failed()
            });
            self.simulations += ev.simulations;
            self.cache.insert(keys[i], ev);
        }
        keys.iter().map(|k| self.cache[k]).collect()
    }

    fn finish(self, best: Scored, front: Vec<Scored>, history: Vec<GenerationStats>) -> OptimizationResult {
        OptimizationResult {
            best,
            front,
            history,
            evaluations: self.evaluations,
            cache_hits: self.hits,
            simulations: self.simulations,
            log: self.log,
        }
    }
}

/// Variation operators on the free genes.
struct Variation<'a> {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cfg: &'a GaConfig,
    mutation_rate: f64,
}

impl<'a> Variation<'a> {
    fn new(space: &DesignSpace, cfg: &'a GaConfig) -> Self {
        let dims = space.dims();
        let lo: Vec<f64> = dims.iter().map(|&k| space.bounds.lo[k]).collect();
        let hi: Vec<f64> = dims.iter().map(|&k| space.bounds.hi[k]).collect();
        let mutation_rate = cfg.mutation_rate.unwrap_or(1.0 / dims.len() as f64);
        Variation { lo, hi, cfg, mutation_rate }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
    }

    /// Simulated binary crossover followed by Gaussian mutation; children are clamped.
    fn offspring(&self, a: &[f64], b: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let (mut c1, mut c2) = (a.to_vec(), b.to_vec());
        if rng.random::<f64>() < self.cfg.crossover_rate {
            for k in 0..a.len() {
                if rng.random::<f64>() < 0.5 {
                    let u: f64 = rng.random();
                    let e = 1.0 / (self.cfg.eta_c + 1.0);
                    let beta = if u <= 0.5 { (2.0 * u).powf(e) } else { (1.0 / (2.0 * (1.0 - u))).powf(e) };
                    c1[k] = 0.5 * ((1.0 + beta) * a[k] + (1.0 - beta) * b[k]);
                    c2[k] = 0.5 * ((1.0 - beta) * a[k] + (1.0 + beta) * b[k]);
                }
            }
        }
        for c in [&mut c1, &mut c2] {
            for ((g, &lo), &hi) in c.iter_mut().zip(&self.lo).zip(&self.hi) {
                if rng.random::<f64>() < self.mutation_rate {
                    let z: f64 = StandardNormal.sample(rng);
                    *g += self.cfg.mutation_sd * (hi - lo) * z;
                }
                *g = g.clamp(lo, hi);
            }
        }
        (c1, c2)
    }
}

fn validate_all(space: &DesignSpace, cfg: &GaConfig) -> Result<(), OptimError> {
    cfg.validate()?;
    space.validate()
}
