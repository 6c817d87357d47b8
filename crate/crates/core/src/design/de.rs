//! Differential evolution (rand/1/bin) over the real-relaxed allocation box.
//!
//! Candidates are rounded to integers before scoring with
//! `cost + W * max(0, P - PoS)`. Trial vectors for a generation are drawn
//! sequentially from a seeded ChaCha stream and scored in parallel, so results
//! depend only on the seed.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_level, AllocationResult, Criterion, DesignProblem, OptimizerKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    /// Population size; `10 * S` when unset.
    pub population: Option<usize>,
    pub differential_weight: f64,
    pub crossover: f64,
    pub generations: usize,
    /// Penalty weight; `10 * cost(U)` when unset.
    pub penalty_weight: Option<f64>,
    pub seed: u64,
    pub criterion: Criterion,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: None,
            differential_weight: 0.8,
            crossover: 0.9,
            generations: 300,
            penalty_weight: None,
            seed: 20_240_601,
            criterion: Criterion::CappedNormal,
        }
    }
}

struct Scorer<'a> {
    problem: &'a DesignProblem,
    p: f64,
    weight: f64,
    criterion: Criterion,
}

impl Scorer<'_> {
    fn round(&self, x: &[f64]) -> Vec<u32> {
        x.iter()
            .zip(self.problem.bounds.low.iter().zip(&self.problem.bounds.high))
            .map(|(&v, (&l, &h))| (v.round().max(0.0) as u32).clamp(l, h))
            .collect()
    }

    /// `(score, cost, feasible)`.
    fn score(&self, alloc: &[u32]) -> (f64, f64, bool) {
        let cost = self.problem.cost(alloc);
        let pos = self.problem.pos(alloc, self.criterion);
        let short = (self.p - pos).max(0.0);
        (cost + self.weight * short, cost, short == 0.0)
    }
}

pub fn optimize_de(problem: &DesignProblem, p: f64, cfg: &DeConfig) -> Result<AllocationResult> {
    validate_level(p)?;
    let s = problem.countries();
    let np = cfg.population.unwrap_or(10 * s).max(4);
    let scorer = Scorer {
        problem,
        p,
        weight: cfg
            .penalty_weight
            .unwrap_or_else(|| 10.0 * problem.cost(&problem.bounds.high)),
        criterion: cfg.criterion,
    };
    let lo: Vec<f64> = problem.bounds.low.iter().map(|&v| v as f64).collect();
    let hi: Vec<f64> = problem.bounds.high.iter().map(|&v| v as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut cache: HashMap<Vec<u32>, (f64, f64, bool)> = HashMap::new();
    // Best feasible candidate seen: (cost, allocation), first found wins ties.
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut evaluate = |xs: &[Vec<f64>], cache: &mut HashMap<Vec<u32>, (f64, f64, bool)>| -> Vec<f64> {
        let rounded: Vec<Vec<u32>> = xs.iter().map(|x| scorer.round(x)).collect();
        let fresh: Vec<&Vec<u32>> = {
            let mut seen = std::collections::HashSet::new();
            rounded
                .iter()
                .filter(|a| !cache.contains_key(*a) && seen.insert((*a).clone()))
                .collect()
        };
        let scored: Vec<(f64, f64, bool)> = fresh.par_iter().map(|a| scorer.score(a)).collect();
        for (a, sc) in fresh.into_iter().zip(scored) {
            cache.insert(a.clone(), sc);
        }
        rounded
            .iter()
            .map(|a| {
                let (score, cost, ok) = cache[a];
                if ok && best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                    best = Some((cost, a.clone()));
                }
                score
            })
            .collect()
    };

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..s).map(|j| rng.random_range(lo[j]..=hi[j])).collect())
        .collect();
    let mut fit = evaluate(&pop, &mut cache);

    for _ in 0..cfg.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = |avoid: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !avoid.contains(&r) {
                        return r;
                    }
                };
                let r1 = pick(&[i]);
                let r2 = pick(&[i, r1]);
                let r3 = pick(&[i, r1, r2]);
                let jrand = rng.random_range(0..s);
                (0..s)
                    .map(|j| {
                        if j == jrand || rng.random::<f64>() < cfg.crossover {
                            let v = pop[r1][j] + cfg.differential_weight * (pop[r2][j] - pop[r3][j]);
                            v.clamp(lo[j], hi[j])
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let tfit = evaluate(&trials, &mut cache);
        for (i, (t, f)) in trials.into_iter().zip(tfit).enumerate() {
            if f <= fit[i] {
                pop[i] = t;
                fit[i] = f;
            }
        }
    }

    let Some((_, allocation)) = best else {
        return Err(Error::NoFeasibleMember(p));
    };
    Ok(problem.result(
        allocation,
        cfg.criterion,
        OptimizerKind::DifferentialEvolution,
        cfg.generations,
    ))
}
