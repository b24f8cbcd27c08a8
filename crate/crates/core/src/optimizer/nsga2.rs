use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    validate_all, DesignSpace, Evaluation, Evaluator, GaConfig, GenerationStats, Objective, OptimError,
    OptimizationResult, Scored, Variation,
};
use crate::stochastic::mix64;

/// `a` dominates `b` under (maximize mean, minimize sigma).
pub fn dominates(a: &Scored, b: &Scored) -> bool {
    a.mean >= b.mean && a.sigma <= b.sigma && (a.mean > b.mean || a.sigma < b.sigma)
}

/// Fronts of indices, best first.
pub fn non_dominated_sort(pts: &[Scored]) -> Vec<Vec<usize>> {
    let n = pts.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&pts[i], &pts[j]) {
                dominates_list[i].push(j);
            } else if i != j && dominates(&pts[j], &pts[i]) {
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order).
pub fn crowding_distance(pts: &[Scored], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let objectives: [fn(&Scored) -> f64; 2] = [|s| s.mean, |s| s.sigma];
    for obj in objectives {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| obj(&pts[front[a]]).total_cmp(&obj(&pts[front[b]])).then(a.cmp(&b)));
        let lo = obj(&pts[front[idx[0]]]);
        let hi = obj(&pts[front[idx[m - 1]]]);
        dist[idx[0]] = f64::INFINITY;
        dist[idx[m - 1]] = f64::INFINITY;
        let span = hi - lo;
        if !(span.is_finite() && span > 0.0) {
            continue;
        }
        for w in 1..m - 1 {
            let gap = obj(&pts[front[idx[w + 1]]]) - obj(&pts[front[idx[w - 1]]]);
            dist[idx[w]] += gap / span;
        }
    }
    dist
}

fn scored(designs: &[crate::stochastic::DesignPoint], ev: &[Evaluation]) -> Vec<Scored> {
    designs
        .iter()
        .zip(ev)
        .map(|(d, e)| {
            let ok = e.mean.is_finite() && e.sigma.is_finite();
            Scored {
                design: *d,
                mean: if ok { e.mean } else { f64::NEG_INFINITY },
                sigma: if ok { e.sigma } else { f64::INFINITY },
            }
        })
        .collect()
}

/// Rank and crowding of every point.
fn rank_and_crowd(pts: &[Scored]) -> (Vec<usize>, Vec<f64>, Vec<Vec<usize>>) {
    let fronts = non_dominated_sort(pts);
    let mut rank = vec![0; pts.len()];
    let mut crowd = vec![0.0; pts.len()];
    for (r, f) in fronts.iter().enumerate() {
        for (i, d) in f.iter().zip(crowding_distance(pts, f)) {
            rank[*i] = r;
            crowd[*i] = d;
        }
    }
    (rank, crowd, fronts)
}

fn better(i: usize, j: usize, rank: &[usize], crowd: &[f64]) -> bool {
    rank[i] < rank[j] || (rank[i] == rank[j] && crowd[i] > crowd[j])
}

/// Bi-objective search: maximize mean, minimize sigma. Each generation the
/// parents are rescored with the offspring's seed before survival.
pub fn nsga2_optimize<O: Objective + ?Sized>(
    objective: &O,
    space: &DesignSpace,
    cfg: &GaConfig,
) -> Result<OptimizationResult, OptimError> {
    validate_all(space, cfg)?;
    let var = Variation::new(space, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.root_seed, u64::MAX - 1));
    let mut eval = Evaluator::new(objective);
    let n = cfg.population;
    let mut pop: Vec<Vec<f64>> = (0..n).map(|_| var.random(&mut rng)).collect();
    let designs: Vec<_> = pop.iter().map(|g| space.design(g)).collect();
    let mut pts = scored(&designs, &eval.score(&designs, cfg.generation_seed(0)));
    let mut history = Vec::with_capacity(cfg.generations);
    let mut best_ever = f64::NEG_INFINITY;

    for gen in 0..cfg.generations {
        let (rank, crowd, _) = rank_and_crowd(&pts);
        let top = pts.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
        best_ever = best_ever.max(top);
        let finite: Vec<f64> = pts.iter().map(|p| p.mean).filter(|m| m.is_finite()).collect();
        history.push(GenerationStats {
            generation: gen,
            best: top,
            mean: if finite.is_empty() { f64::NEG_INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 },
            best_ever,
        });
        if gen + 1 == cfg.generations {
            break;
        }

        let pick = |rng: &mut ChaCha8Rng| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if better(b, a, &rank, &crowd) { b } else { a }
        };
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            let (c1, c2) = var.offspring(&pop[a], &pop[b], &mut rng);
            children.push(c1);
            children.push(c2);
        }
        children.truncate(n);

        let merged: Vec<Vec<f64>> = pop.iter().cloned().chain(children).collect();
        let designs: Vec<_> = merged.iter().map(|g| space.design(g)).collect();
        let all = scored(&designs, &eval.score(&designs, cfg.generation_seed(gen + 1)));
        let (_, crowd_all, fronts) = rank_and_crowd(&all);
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for f in fronts {
            if keep.len() + f.len() <= n {
                keep.extend(f);
            } else {
                let mut f = f;
                f.sort_by(|&a, &b| crowd_all[b].total_cmp(&crowd_all[a]).then(a.cmp(&b)));
                keep.extend(&f[..n - keep.len()]);
                break;
            }
        }
        pop = keep.iter().map(|&i| merged[i].clone()).collect();
        pts = keep.iter().map(|&i| all[i]).collect();
    }

    let fronts = non_dominated_sort(&pts);
    let mut front: Vec<Scored> = Vec::new();
    for &i in &fronts[0] {
        if !front.iter().any(|f| f.mean == pts[i].mean && f.sigma == pts[i].sigma) {
            front.push(pts[i]);
        }
    }
    front.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let best = *front.last().expect("non-empty front");
    Ok(eval.finish(best, front, history))
}
