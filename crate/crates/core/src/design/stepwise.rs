//! Iterated linear relaxation of the normal success constraint.
//!
//! With `x = N - H` and `G^2(N) = sum N_s (m R + sigma^2 V)`, iteration `k+1`
//! solves `min sum w_s x_s` s.t. `sum x_s m R >= n + z_P sqrt(G^2(x^(k) + H)) - E(H)`,
//! `0 <= x <= U - H`, starting from `x^(0) = 0`. The variance term is frozen at
//! the previous iterate, so each step is a covering LP.

use serde::{Deserialize, Serialize};

use super::simplex::solve_covering;
use super::{validate_level, AllocationResult, Criterion, DesignProblem, OptimizerKind};
use crate::error::{Error, Result};

pub const MAX_LP_ITERATIONS: usize = 15;
/// Successive relaxed costs closer than this stop the iteration.
pub const COST_TOLERANCE: f64 = 0.5;
/// Rounding enumerates all floor/ceil combinations up to this many fractional
/// coordinates and rounds greedily beyond it.
const MAX_ROUNDING_ENUMERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpIterate {
    /// Relaxed allocation `x + H`.
    pub allocation: Vec<f64>,
    /// Linear cost of the relaxed allocation.
    pub cost: f64,
    /// Right-hand side of the covering constraint in this step.
    pub rhs: f64,
}

/// Minimum-cost allocation meeting `P(global count >= n) >= p` under the normal
/// approximation, by stepwise linear programming plus floor/ceil rounding.
pub fn optimize_stepwise_lp(problem: &DesignProblem, p: f64) -> Result<AllocationResult> {
    let z = validate_level(p)?;
    let s = problem.countries();
    let kin = &problem.kinetics;
    let low: Vec<f64> = problem.bounds.low.iter().map(|&h| h as f64).collect();
    let weight: Vec<f64> = kin.iter().map(|k| k.patients_per_site()).collect();
    let g2_per_site: Vec<f64> = kin.iter().map(|k| k.rate_mean * k.r + k.rate_var * k.v).collect();
    let unit_cost: Vec<f64> = (0..s)
        .map(|i| problem.costs.site[i] + problem.costs.patient[i] * weight[i])
        .collect();
    let room: Vec<f64> = (0..s)
        .map(|i| (problem.bounds.high[i] - problem.bounds.low[i]) as f64)
        .collect();
    let e_low: f64 = low.iter().zip(&weight).map(|(h, w)| h * w).sum();
    let n = problem.target_n as f64;

    let mut x = vec![0.0; s];
    let mut trace: Vec<LpIterate> = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_LP_ITERATIONS {
        let g2: f64 = (0..s).map(|i| (x[i] + low[i]) * g2_per_site[i]).sum();
        let rhs = n + z * g2.sqrt() - e_low;
        let sol = solve_covering(&unit_cost, &weight, &room, rhs).map_err(|e| match e {
            Error::Infeasible(_) => Error::Infeasible(format!(
                "no allocation within the upper bounds reaches P = {p} (LP step {})",
                trace.len() + 1
            )),
            other => other,
        })?;
        x = sol.x;
        let allocation: Vec<f64> = x.iter().zip(&low).map(|(a, b)| a + b).collect();
        let cost: f64 = allocation.iter().zip(&unit_cost).map(|(a, c)| a * c).sum();
        let done = z == 0.0
            || trace
                .last()
                .is_some_and(|prev| (prev.cost - cost).abs() < COST_TOLERANCE);
        trace.push(LpIterate { allocation, cost, rhs });
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: trace.len(),
        });
    }

    let relaxed = &trace.last().expect("at least one LP step").allocation;
    let allocation = round_allocation(problem, relaxed, z)?;
    let mut result = problem.result(allocation, Criterion::Normal, OptimizerKind::StepwiseLp, trace.len());
    result.lp_trace = trace;
    Ok(result)
}

/// Normal feasibility `E - n >= z G` with frozen exposures.
fn meets(problem: &DesignProblem, alloc: &[u32], z: f64) -> bool {
    let (e, g2) = alloc
        .iter()
        .zip(&problem.kinetics)
        .fold((0.0, 0.0), |(e, g), (&ns, k)| {
            let m = k.moments(ns);
            (e + m.mean, g + m.mean + m.var)
        });
    e - problem.target_n as f64 >= z * g2.sqrt()
}

fn round_allocation(problem: &DesignProblem, relaxed: &[f64], z: f64) -> Result<Vec<u32>> {
    let floor: Vec<u32> = relaxed
        .iter()
        .zip(&problem.bounds.high)
        .map(|(&v, &h)| ((v + 1e-9).floor() as u32).min(h))
        .collect();
    let frac: Vec<usize> = (0..relaxed.len())
        .filter(|&i| relaxed[i] - floor[i] as f64 > 1e-9)
        .collect();

    if frac.len() <= MAX_ROUNDING_ENUMERATION {
        let mut best: Option<(f64, Vec<u32>)> = None;
        for mask in 0u64..(1u64 << frac.len()) {
            let mut cand = floor.clone();
            for (bit, &i) in frac.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    cand[i] += 1;
                }
            }
            if !meets(problem, &cand, z) {
                continue;
            }
            let c = problem.cost(&cand);
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, cand));
            }
        }
        if let Some((_, a)) = best {
            return Ok(a);
        }
    }

    // Greedy repair: round up, then keep adding the cheapest site per
    // expected patient until the constraint holds.
    let mut cand: Vec<u32> = relaxed
        .iter()
        .zip(&problem.bounds.high)
        .map(|(&v, &h)| ((v - 1e-9).ceil() as u32).min(h))
        .collect();
    while !meets(problem, &cand, z) {
        let next = (0..cand.len())
            .filter(|&i| cand[i] < problem.bounds.high[i] && problem.kinetics[i].patients_per_site() > 0.0)
            .min_by(|&a, &b| {
                let ra = (problem.costs.site[a] / problem.kinetics[a].patients_per_site()) + problem.costs.patient[a];
                let rb = (problem.costs.site[b] / problem.kinetics[b].patients_per_site()) + problem.costs.patient[b];
                ra.total_cmp(&rb)
            });
        match next {
            Some(i) => cand[i] += 1,
            None => {
                return Err(Error::Infeasible(
                    "rounded allocation cannot meet the success constraint".into(),
                ))
            }
        }
    }
    Ok(cand)
}
