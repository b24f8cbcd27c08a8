use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    validate_all, DesignSpace, Evaluator, GaConfig, GenerationStats, Objective, OptimError, OptimizationResult,
    Scored, Variation,
};
use crate::stochastic::mix64;

fn tournament(fit: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[best] {
            best = c;
        }
    }
    best
}

/// Maximizes the objective's mean with tournament selection, SBX, Gaussian
/// mutation and elitism. Returns the best individual ever scored.
pub fn ga_optimize<O: Objective + ?Sized>(
    objective: &O,
    space: &DesignSpace,
    cfg: &GaConfig,
) -> Result<OptimizationResult, OptimError> {
    validate_all(space, cfg)?;
    let var = Variation::new(space, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.root_seed, u64::MAX));
    let mut eval = Evaluator::new(objective);
    let mut pop: Vec<Vec<f64>> = (0..cfg.population).map(|_| var.random(&mut rng)).collect();
    let mut history = Vec::with_capacity(cfg.generations);
    let mut best: Option<Scored> = None;

    for gen in 0..cfg.generations {
        let designs: Vec<_> = pop.iter().map(|g| space.design(g)).collect();
        let scores = eval.score(&designs, cfg.generation_seed(gen));
        let fit: Vec<f64> = scores.iter().map(|s| s.fitness()).collect();

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
        let top = order[0];
        if best.is_none_or(|b| fit[top] > b.mean) {
            best = Some(Scored { design: designs[top], mean: scores[top].mean, sigma: scores[top].sigma });
        }
        let finite: Vec<f64> = fit.iter().copied().filter(|f| f.is_finite()).collect();
        history.push(GenerationStats {
            generation: gen,
            best: fit[top],
            mean: if finite.is_empty() { f64::NEG_INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 },
            best_ever: best.map_or(f64::NEG_INFINITY, |b| b.mean),
        });
        if gen + 1 == cfg.generations {
            break;
        }

        let mut next: Vec<Vec<f64>> = order[..cfg.elites].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < cfg.population {
            let a = tournament(&fit, cfg.tournament, &mut rng);
            let b = tournament(&fit, cfg.tournament, &mut rng);
            let (c1, c2) = var.offspring(&pop[a], &pop[b], &mut rng);
            next.push(c1);
            if next.len() < cfg.population {
                next.push(c2);
            }
        }
        pop = next;
    }
    let best = best.expect("at least one generation");
    Ok(eval.finish(best, Vec::new(), history))
}
