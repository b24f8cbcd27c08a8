use super::{Evaluation, Objective};
use crate::stochastic::{
    mc_estimate_with, DesignPoint, McEstimate, SampleEvaluator, Simulator, StochasticError, UncertaintyModel,
};

/// Wraps a closure returning `(mean, sigma)`; the seed is ignored.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&DesignPoint) -> (f64, f64) + Sync,
{
    fn evaluate(&self, d: &DesignPoint, _seed: u64) -> Result<Evaluation, String> {
        let (mean, sigma) = (self.0)(d);
        Ok(Evaluation { mean, sigma, simulations: 0 })
    }
}

/// Monte Carlo efficiency of a design.
pub struct McObjective<E: SampleEvaluator = Simulator> {
    pub evaluator: E,
    pub uncertainty: UncertaintyModel,
    pub samples: usize,
    pub horizon: f64,
}

impl McObjective<Simulator> {
    pub fn new(uncertainty: UncertaintyModel, samples: usize, horizon: f64) -> Self {
        McObjective { evaluator: Simulator::default(), uncertainty, samples, horizon }
    }
}

impl<E: SampleEvaluator> Objective for McObjective<E> {
    fn evaluate(&self, d: &DesignPoint, seed: u64) -> Result<Evaluation, String> {
        let e = evaluate_fitness(&self.evaluator, d, &self.uncertainty, self.samples, seed, self.horizon)
            .map_err(|e| e.to_string())?;
        Ok(Evaluation { mean: e.mean, sigma: e.sigma, simulations: self.samples as u64 })
    }
}

/// Monte Carlo statistics of `d` for one generation seed.
pub fn evaluate_fitness<E: SampleEvaluator + ?Sized>(
    evaluator: &E,
    d: &DesignPoint,
    u: &UncertaintyModel,
    samples: usize,
    seed: u64,
    horizon: f64,
) -> Result<McEstimate, StochasticError> {
    mc_estimate_with(evaluator, d, u, samples, seed, horizon)
}
