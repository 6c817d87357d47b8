//! Exhaustive search over the allocation box.
//!
//! Candidates are visited in odometer order (last country fastest). The
//! incumbent starts at the full allocation `U` and is replaced only by a
//! strictly cheaper feasible candidate; among equal-cost candidates the
//! earliest in odometer order wins. Chunks are scanned in parallel and reduced
//! with the same ordering, so the answer does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_level, AllocationResult, Criterion, DesignProblem, OptimizerKind};
use crate::error::{Error, Result};

pub const DEFAULT_DIM_CEILING: f64 = 1e8;
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    /// Success criterion; defaults to the problem's own.
    pub criterion: Option<Criterion>,
    pub dim_ceiling: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            criterion: None,
            dim_ceiling: DEFAULT_DIM_CEILING,
        }
    }
}

fn decode(mut idx: u64, low: &[u32], radix: &[u64], out: &mut [u32]) {
    for i in (0..radix.len()).rev() {
        out[i] = low[i] + (idx % radix[i]) as u32;
        idx /= radix[i];
    }
}

pub fn optimize_direct(problem: &DesignProblem, p: f64, opts: DirectOptions) -> Result<AllocationResult> {
    validate_level(p)?;
    let criterion = opts.criterion.unwrap_or_else(|| problem.default_criterion());
    let dim = problem.bounds.dimension();
    if dim > opts.dim_ceiling {
        return Err(Error::DimensionCeiling {
            dim,
            ceiling: opts.dim_ceiling,
        });
    }
    let upper = problem.bounds.high.clone();
    if problem.pos(&upper, criterion) < p {
        return Err(Error::Infeasible(format!(
            "the largest allocation does not reach P = {p}"
        )));
    }
    let upper_cost = problem.cost(&upper);
    let low = &problem.bounds.low;
    let radix: Vec<u64> = low
        .iter()
        .zip(&problem.bounds.high)
        .map(|(l, h)| (h - l + 1) as u64)
        .collect();
    let total = dim as u64;
    let chunks = total.div_ceil(CHUNK);

    let best = (0..chunks)
        .into_par_iter()
        .filter_map(|c| {
            let mut cand = vec![0; radix.len()];
            let mut best: Option<(f64, u64)> = None;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                decode(idx, low, &radix, &mut cand);
                let cost = problem.cost(&cand);
                if cost >= upper_cost || best.is_some_and(|(bc, _)| cost >= bc) {
                    continue;
                }
                if problem.pos(&cand, criterion) >= p {
                    best = Some((cost, idx));
                }
            }
            best
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });

    let allocation = match best {
        Some((_, idx)) => {
            let mut a = vec![0; radix.len()];
            decode(idx, low, &radix, &mut a);
            a
        }
        None => upper,
    };
    Ok(problem.result(allocation, criterion, OptimizerKind::Direct, total as usize))
}
