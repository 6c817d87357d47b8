//! Dense two-phase primal simplex with bounded variables.
//!
//! Solves `min c.x` subject to row constraints `a_i.x {<=, >=, =} b_i` and
//! `0 <= x_j <= u_j` (`u_j` may be infinite). Nonbasic variables sit at either
//! bound. Entering variables follow Bland's rule (lowest eligible index), which
//! guarantees termination and breaks ties toward the lowest country index.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    x: Vec<f64>,
    upper: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                d.iter_mut().zip(row).for_each(|(dj, a)| *dj -= cb * a);
            }
        }
        d
    }

    fn run(&mut self, cost: &[f64], max_pivots: usize) -> Result<()> {
        let n = self.x.len();
        loop {
            if self.pivots > max_pivots {
                return Err(Error::NotConverged {
                    iterations: self.pivots,
                });
            }
            let d = self.reduced_costs(cost);
            let mut is_basic = vec![false; n];
            self.basis.iter().for_each(|&b| is_basic[b] = true);
            let entering = (0..n).find(|&j| {
                if is_basic[j] || self.upper[j] <= EPS {
                    return false;
                }
                let at_upper = self.upper[j].is_finite() && self.x[j] >= self.upper[j] - EPS;
                if at_upper {
                    d[j] > EPS
                } else {
                    d[j] < -EPS
                }
            });
            let Some(j) = entering else { return Ok(()) };
            let dir = if d[j] < 0.0 { 1.0 } else { -1.0 };

            // Ratio test: the entering variable moves by `theta` in direction `dir`.
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let alpha = dir * row[j];
                let b = self.basis[i];
                let limit = if alpha > EPS {
                    (self.x[b] / alpha).max(0.0)
                } else if alpha < -EPS && self.upper[b].is_finite() {
                    ((self.upper[b] - self.x[b]) / -alpha).max(0.0)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((r, _)) => limit < theta - EPS || (limit <= theta + EPS && b < self.basis[r]),
                };
                if better {
                    theta = limit;
                    leave = Some((i, if alpha > 0.0 { 0.0 } else { self.upper[b] }));
                }
            }
            if !theta.is_finite() {
                return Err(Error::Infeasible("linear program is unbounded".into()));
            }
            for (row, &b) in self.rows.iter().zip(&self.basis) {
                self.x[b] -= dir * theta * row[j];
            }
            self.x[j] += dir * theta;
            self.pivots += 1;
            if let Some((r, bound)) = leave {
                let out = self.basis[r];
                self.pivot(r, j);
                self.x[out] = bound;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        self.rows[r].iter_mut().for_each(|a| *a /= p);
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[j];
                if f != 0.0 {
                    row.iter_mut().zip(&prow).for_each(|(a, pa)| *a -= f * pa);
                }
            }
        }
        self.basis[r] = j;
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<LpSolution> {
        let nx = self.cost.len();
        let m = self.constraints.len();
        if self.upper.len() != nx || self.constraints.iter().any(|c| c.coeffs.len() != nx) {
            return Err(Error::InvalidPlan("linear program dimensions disagree".into()));
        }
        if self.upper.iter().any(|u| u.is_nan() || *u < 0.0) {
            return Err(Error::InvalidPlan("upper bounds must be >= 0".into()));
        }
        // Columns: structural | one slack per inequality | one artificial per row.
        let slack_rows: Vec<usize> = (0..m)
            .filter(|&i| self.constraints[i].relation != Relation::Eq)
            .collect();
        let ns = slack_rows.len();
        let n = nx + ns + m;
        let mut rows = vec![vec![0.0; n]; m];
        let mut rhs = vec![0.0; m];
        for (i, c) in self.constraints.iter().enumerate() {
            rows[i][..nx].copy_from_slice(&c.coeffs);
            if let Some(k) = slack_rows.iter().position(|&r| r == i) {
                rows[i][nx + k] = if c.relation == Relation::Le { 1.0 } else { -1.0 };
            }
            rhs[i] = c.rhs;
            if rhs[i] < 0.0 {
                rows[i].iter_mut().for_each(|a| *a = -*a);
                rhs[i] = -rhs[i];
            }
            rows[i][nx + ns + i] = 1.0;
        }
        let mut upper = self.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, ns + m));
        let mut x = vec![0.0; n];
        x[nx + ns..].copy_from_slice(&rhs);
        let mut tab = Tableau {
            rows,
            basis: (nx + ns..n).collect(),
            x,
            upper,
            pivots: 0,
        };
        let max_pivots = 50 * (n + m) + 1000;

        let mut phase1 = vec![0.0; n];
        phase1[nx + ns..].iter_mut().for_each(|c| *c = 1.0);
        tab.run(&phase1, max_pivots)?;
        let infeas: f64 = tab.x[nx + ns..].iter().sum();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(*b));
        if infeas > 1e-7 * scale {
            return Err(Error::Infeasible(format!(
                "linear program has no feasible point (residual {infeas:.3e})"
            )));
        }
        // Artificials are pinned at zero for phase 2.
        for k in nx + ns..n {
            tab.upper[k] = 0.0;
            tab.x[k] = 0.0;
        }
        let mut phase2 = self.cost.clone();
        phase2.resize(n, 0.0);
        tab.run(&phase2, max_pivots)?;

        let x: Vec<f64> = tab.x[..nx]
            .iter()
            .zip(&self.upper)
            .map(|(&v, &u)| v.clamp(0.0, u))
            .collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: tab.pivots,
        })
    }
}

/// `min c.x` s.t. `w.x >= rhs`, `0 <= x <= u`: the single-row LP used by the
/// stepwise optimizer.
pub fn solve_covering(cost: &[f64], weight: &[f64], upper: &[f64], rhs: f64) -> Result<LpSolution> {
    LinearProgram {
        cost: cost.to_vec(),
        upper: upper.to_vec(),
        constraints: vec![Constraint {
            coeffs: weight.to_vec(),
            relation: Relation::Ge,
            rhs,
        }],
    }
    .solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fractional covering knapsack solved greedily by cost per unit weight.
    fn greedy_covering(cost: &[f64], weight: &[f64], upper: &[f64], rhs: f64) -> Option<f64> {
        let mut idx: Vec<usize> = (0..cost.len()).filter(|&i| weight[i] > 0.0).collect();
        idx.sort_by(|&a, &b| (cost[a] / weight[a]).total_cmp(&(cost[b] / weight[b])));
        let mut need = rhs;
        let mut obj = 0.0;
        for i in idx {
            if need <= 0.0 {
                break;
            }
            let take = (need / weight[i]).min(upper[i]);
            obj += take * cost[i];
            need -= take * weight[i];
        }
        (need <= 1e-9).then_some(obj)
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let lp = LinearProgram {
            cost: vec![-3.0, -5.0],
            upper: vec![f64::INFINITY; 2],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 0.0],
                    relation: Relation::Le,
                    rhs: 4.0,
                },
                Constraint {
                    coeffs: vec![0.0, 2.0],
                    relation: Relation::Le,
                    rhs: 12.0,
                },
                Constraint {
                    coeffs: vec![3.0, 2.0],
                    relation: Relation::Le,
                    rhs: 18.0,
                },
            ],
        };
        let s = lp.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // min x + 2y s.t. x + y = 5, x <= 3 -> (3, 2), 7.
        let lp = LinearProgram {
            cost: vec![1.0, 2.0],
            upper: vec![3.0, f64::INFINITY],
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Eq,
                rhs: 5.0,
            }],
        };
        let s = lp.solve().unwrap();
        assert!((s.objective - 7.0).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert!(matches!(
            solve_covering(&[1.0], &[1.0], &[2.0], 3.0),
            Err(Error::Infeasible(_))
        ));
        let lp = LinearProgram {
            cost: vec![-1.0],
            upper: vec![f64::INFINITY],
            constraints: vec![Constraint {
                coeffs: vec![1.0],
                relation: Relation::Ge,
                rhs: 1.0,
            }],
        };
        assert!(lp.solve().is_err());
    }

    #[test]
    fn nonpositive_rhs_gives_zero() {
        let s = solve_covering(&[1.0, 2.0], &[1.0, 1.0], &[3.0, 3.0], -4.0).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
    }

    #[test]
    fn ties_fill_lowest_index_first() {
        let s = solve_covering(&[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0], &[5.0, 5.0, 5.0], 3.0).unwrap();
        assert_eq!(s.x, vec![3.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn covering_matches_greedy(
            rows in proptest::collection::vec((1.0f64..100.0, 0.1f64..10.0, 0.0f64..8.0), 1..12),
            frac in 0.0f64..1.2,
        ) {
            let cost: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let weight: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let upper: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let cap: f64 = weight.iter().zip(&upper).map(|(w, u)| w * u).sum();
            let rhs = frac * cap;
            match (greedy_covering(&cost, &weight, &upper, rhs), solve_covering(&cost, &weight, &upper, rhs)) {
                (Some(g), Ok(s)) => {
                    prop_assert!((g - s.objective).abs() <= 1e-7 * (1.0 + g.abs()), "{} vs {}", g, s.objective);
                    let lhs: f64 = s.x.iter().zip(&weight).map(|(x, w)| x * w).sum();
                    prop_assert!(lhs >= rhs - 1e-6 * (1.0 + rhs));
                }
                (None, Err(_)) => {}
                (g, s) => prop_assert!(frac > 0.999 && frac < 1.001, "greedy {:?} simplex {:?}", g, s),
            }
        }
    }
}
