//! Cost-minimal site allocation under a probability-of-success constraint.
//!
//! For an allocation `N` (sites per country) with activation days on a uniform
//! grid over `[a(s), b(s)]`, each country contributes an expected count
//! `N_s m(s) R(s)` and a rate variance `N_s sigma^2(s) V(s)`, where `R(s)` and
//! `V(s)` are the mean and mean-square exposure of one site at the planned
//! date. Both are frozen at their continuous-uniform values, which keeps the
//! expected count and the cost linear in `N`.

mod de;
mod direct;
pub mod simplex;
mod stepwise;

pub use de::{optimize_de, DeConfig};
pub use direct::{optimize_direct, DirectOptions, DEFAULT_DIM_CEILING};
pub use stepwise::{optimize_stepwise_lp, LpIterate, MAX_LP_ITERATIONS};

use serde::{Deserialize, Serialize};

use crate::capped::{capped_from_law, capped_law_mean_var};
use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::forecast::{self, convolve, normal_pos, PosMethod};
use crate::model::{activation_grid, law_to_dist, CountLaw, CountryPlan, RateMoments, StudyPlan, DEFAULT_TAIL_EPS};
use crate::pgdist::RatePrior;
use crate::special::norm_ppf;

/// Per-country costs: per site, per enrolled patient, and a fixed charge for
/// including the country at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub site: Vec<f64>,
    pub patient: Vec<f64>,
    pub country: Vec<f64>,
}

impl CostModel {
    pub fn new(site: Vec<f64>, patient: Vec<f64>, country: Vec<f64>) -> Result<Self> {
        if site.len() != patient.len() || site.len() != country.len() {
            return Err(Error::InvalidPlan("cost vectors differ in length".into()));
        }
        if site
            .iter()
            .chain(&patient)
            .chain(&country)
            .any(|c| !c.is_finite() || *c < 0.0)
        {
            return Err(Error::InvalidPlan("costs must be finite and >= 0".into()));
        }
        Ok(Self { site, patient, country })
    }

    pub fn len(&self) -> usize {
        self.site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationBounds {
    pub low: Vec<u32>,
    pub high: Vec<u32>,
}

impl AllocationBounds {
    pub fn new(low: Vec<u32>, high: Vec<u32>) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::InvalidPlan("bound vectors differ in length".into()));
        }
        if let Some(i) = (0..low.len()).find(|&i| low[i] > high[i]) {
            return Err(Error::InvalidPlan(format!(
                "country {i}: low bound {} exceeds high bound {}",
                low[i], high[i]
            )));
        }
        Ok(Self { low, high })
    }

    /// Number of allocations in the box, `prod (U_s - H_s + 1)`.
    pub fn dimension(&self) -> f64 {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| (h - l + 1) as f64)
            .product()
    }

    pub fn contains(&self, alloc: &[u32]) -> bool {
        alloc.len() == self.low.len()
            && alloc
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(n, (l, h))| l <= n && n <= h)
    }
}

/// Rate and exposure summary of one country at the planned date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountryKinetics {
    /// Mean site rate, patients per day.
    pub rate_mean: f64,
    /// Variance of a site's rate.
    pub rate_var: f64,
    /// Activation window in days.
    pub window: (u32, u32),
    /// Mean exposure of one site at the planned date.
    pub r: f64,
    /// Mean squared exposure of one site at the planned date.
    pub v: f64,
}

impl CountryKinetics {
    /// Exposure means frozen at a continuous uniform activation over the window:
    /// `R = T - (a + b) / 2`, `V = ((T - a)^3 - (T - b)^3) / (3 (b - a))`.
    pub fn new(rate_mean: f64, rate_var: f64, window: (u32, u32), t_plan: u32) -> Result<Self> {
        let (a, b) = window;
        if a > b || b > t_plan {
            return Err(Error::InvalidPlan(format!(
                "activation window [{a}, {b}] must be ordered and end by day {t_plan}"
            )));
        }
        if !(rate_mean.is_finite() && rate_mean >= 0.0 && rate_var.is_finite() && rate_var >= 0.0) {
            return Err(Error::InvalidPlan(
                "rate mean and variance must be finite and >= 0".into(),
            ));
        }
        let (t, af, bf) = (t_plan as f64, a as f64, b as f64);
        let r = t - (af + bf) / 2.0;
        let v = if a == b {
            (t - af).powi(2)
        } else {
            ((t - af).powi(3) - (t - bf).powi(3)) / (3.0 * (bf - af))
        };
        Ok(Self {
            rate_mean,
            rate_var,
            window,
            r,
            v,
        })
    }

    pub fn from_prior(prior: &RatePrior, window: (u32, u32), t_plan: u32) -> Result<Self> {
        Self::new(prior.mean(), prior.variance(), window, t_plan)
    }

    /// Expected patients per site by the planned date, `m R`.
    pub fn patients_per_site(&self) -> f64 {
        self.rate_mean * self.r
    }

    /// Rate moments of `n` sites under the frozen exposure means.
    pub fn moments(&self, n: u32) -> RateMoments {
        let nf = n as f64;
        RateMoments {
            mean: nf * self.rate_mean * self.r,
            var: nf * self.rate_var * self.v,
        }
    }

    /// Rate moments of `n` sites activated on the grid `activation_grid(a, b, n)`.
    pub fn grid_moments(&self, n: u32, t_plan: u32) -> RateMoments {
        activation_grid(self.window.0, self.window.1, n as usize)
            .into_iter()
            .map(|u| {
                let x = t_plan.saturating_sub(u) as f64;
                RateMoments {
                    mean: self.rate_mean * x,
                    var: self.rate_var * x * x,
                }
            })
            .sum()
    }
}

/// How an allocation's probability of success is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Global count as one moment-matched Poisson-gamma law; caps ignored.
    Pg,
    /// Normal law with variance `E + S2`; caps ignored.
    Normal,
    /// Normal law with summed capped country means and variances.
    CappedNormal,
    /// Convolution of the (capped) country laws.
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    StepwiseLp,
    Direct,
    DifferentialEvolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub sites: f64,
    pub patients: f64,
    pub countries: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub allocation: Vec<u32>,
    pub total_cost: f64,
    pub cost: CostBreakdown,
    /// Success probability under `criterion`.
    pub pos_achieved: f64,
    pub criterion: Criterion,
    /// Convolution PoS with exposures recomputed on the actual activation
    /// grid of the returned allocation (informational).
    pub pos_on_grid: f64,
    pub method: OptimizerKind,
    /// LP solves, candidates examined, or generations.
    pub iterations: usize,
    /// Stepwise-LP relaxed iterates; empty for other methods.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lp_trace: Vec<LpIterate>,
}

/// Everything the optimizers need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub kinetics: Vec<CountryKinetics>,
    pub costs: CostModel,
    pub bounds: AllocationBounds,
    pub caps: Vec<Option<u32>>,
    pub target_n: u64,
    pub t_plan: u32,
}

impl DesignProblem {
    pub fn new(
        kinetics: Vec<CountryKinetics>,
        costs: CostModel,
        bounds: AllocationBounds,
        caps: Vec<Option<u32>>,
        target_n: u64,
        t_plan: u32,
    ) -> Result<Self> {
        let s = kinetics.len();
        if costs.len() != s || bounds.low.len() != s || caps.len() != s {
            return Err(Error::InvalidPlan(format!(
                "kinetics, costs, bounds and caps must all have {s} entries"
            )));
        }
        if target_n == 0 {
            return Err(Error::InvalidPlan("target_n must be >= 1".into()));
        }
        Ok(Self {
            kinetics,
            costs,
            bounds,
            caps,
            target_n,
            t_plan,
        })
    }

    pub fn countries(&self) -> usize {
        self.kinetics.len()
    }

    pub fn has_caps(&self) -> bool {
        self.caps.iter().any(Option::is_some)
    }

    pub fn without_caps(&self) -> Self {
        Self {
            caps: vec![None; self.countries()],
            ..self.clone()
        }
    }

    pub fn cost(&self, alloc: &[u32]) -> f64 {
        total_cost(alloc, &self.kinetics, &self.costs)
    }

    pub fn pos(&self, alloc: &[u32], criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Pg => pos_unrestricted(alloc, &self.kinetics, self.target_n, PosApprox::Pg),
            Criterion::Normal => pos_unrestricted(alloc, &self.kinetics, self.target_n, PosApprox::Normal),
            Criterion::CappedNormal => pos_capped_normal(alloc, &self.kinetics, &self.caps, self.target_n),
            Criterion::Convolution => pos_convolution(alloc, &self.kinetics, &self.caps, self.target_n),
        }
    }

    /// Default criterion for direct search and reporting.
    pub fn default_criterion(&self) -> Criterion {
        if self.has_caps() {
            Criterion::CappedNormal
        } else {
            Criterion::Pg
        }
    }

    /// Study plan with activation days on the uniform grid for `alloc`.
    pub fn study_plan(&self, alloc: &[u32], priors: &[RatePrior]) -> Result<StudyPlan> {
        let countries = alloc
            .iter()
            .enumerate()
            .map(|(s, &n)| {
                let k = &self.kinetics[s];
                let days = activation_grid(k.window.0, k.window.1, n as usize);
                CountryPlan::uniform(format!("country{}", s + 1), priors[s], &days, self.caps[s])
            })
            .collect();
        StudyPlan::new(countries, self.target_n, self.t_plan)
    }

    /// Convolution PoS with activation days on the actual grid instead of the
    /// frozen exposure means.
    pub fn pos_on_grid(&self, alloc: &[u32]) -> f64 {
        let laws: Vec<(CountLaw, Option<u32>)> = alloc
            .iter()
            .zip(&self.kinetics)
            .zip(&self.caps)
            .map(|((&n, k), cap)| (CountLaw::from_moments(k.grid_moments(n, self.t_plan)), *cap))
            .collect();
        convolution_pos_from_laws(&laws, self.target_n)
    }

    fn result(
        &self,
        allocation: Vec<u32>,
        criterion: Criterion,
        method: OptimizerKind,
        iterations: usize,
    ) -> AllocationResult {
        let cost = cost_breakdown(&allocation, &self.kinetics, &self.costs);
        AllocationResult {
            pos_achieved: self.pos(&allocation, criterion),
            pos_on_grid: self.pos_on_grid(&allocation),
            total_cost: cost.total,
            cost,
            allocation,
            criterion,
            method,
            iterations,
            lp_trace: Vec::new(),
        }
    }
}

pub fn cost_breakdown(alloc: &[u32], kin: &[CountryKinetics], costs: &CostModel) -> CostBreakdown {
    let mut b = CostBreakdown::default();
    for (s, &n) in alloc.iter().enumerate() {
        let nf = n as f64;
        b.sites += costs.site[s] * nf;
        b.patients += costs.patient[s] * kin[s].patients_per_site() * nf;
        if n > 0 {
            b.countries += costs.country[s];
        }
    }
    b.total = b.sites + b.patients + b.countries;
    b
}

/// `sum C_s N_s + sum c_s m(s) R(s) N_s + sum Q_s 1{N_s > 0}`.
pub fn total_cost(alloc: &[u32], kin: &[CountryKinetics], costs: &CostModel) -> f64 {
    cost_breakdown(alloc, kin, costs).total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosApprox {
    Pg,
    Normal,
}

fn global_moments(alloc: &[u32], kin: &[CountryKinetics]) -> RateMoments {
    alloc.iter().zip(kin).map(|(&n, k)| k.moments(n)).sum()
}

/// Unrestricted success probability of an allocation.
pub fn pos_unrestricted(alloc: &[u32], kin: &[CountryKinetics], n: u64, approx: PosApprox) -> f64 {
    let m = global_moments(alloc, kin);
    match approx {
        PosApprox::Pg => 1.0 - CountLaw::from_moments(m).cdf(n as i64 - 1),
        PosApprox::Normal => normal_pos(m.mean, m.mean + m.var, n),
    }
}

/// Normal-approximation success probability with capped country moments.
pub fn pos_capped_normal(alloc: &[u32], kin: &[CountryKinetics], caps: &[Option<u32>], n: u64) -> f64 {
    let (mean, var) = alloc
        .iter()
        .zip(kin)
        .zip(caps)
        .map(|((&ns, k), cap)| {
            let m = k.moments(ns);
            match cap {
                Some(l) => capped_law_mean_var(&CountLaw::from_moments(m), *l),
                None => (m.mean, m.mean + m.var),
            }
        })
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    normal_pos(mean, var, n)
}

/// Success probability from the convolution of the country laws.
pub fn pos_convolution(alloc: &[u32], kin: &[CountryKinetics], caps: &[Option<u32>], n: u64) -> f64 {
    let laws: Vec<(CountLaw, Option<u32>)> = alloc
        .iter()
        .zip(kin)
        .zip(caps)
        .map(|((&ns, k), cap)| (CountLaw::from_moments(k.moments(ns)), *cap))
        .collect();
    convolution_pos_from_laws(&laws, n)
}

fn convolution_pos_from_laws(laws: &[(CountLaw, Option<u32>)], n: u64) -> f64 {
    let mut acc = DiscreteDist::point_mass(0);
    for (law, cap) in laws {
        if *law == CountLaw::Zero {
            continue;
        }
        let mut d = match cap {
            Some(l) => DiscreteDist::from_pmf(capped_from_law(law, *l).into_pmf()),
            None => law_to_dist(law, DEFAULT_TAIL_EPS),
        };
        d.trim_zeros();
        acc = convolve(&acc, &d);
        acc.trim_zeros();
    }
    acc.sf_from(n)
}

/// Whether the largest allocation reaches `p` under `criterion`.
pub fn check_feasibility(problem: &DesignProblem, p: f64, criterion: Criterion) -> bool {
    problem.pos(&problem.bounds.high, criterion) >= p
}

pub(crate) fn validate_level(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("success probability must lie in (0,1), got {p}")));
    }
    Ok(norm_ppf(p))
}

/// Re-evaluates a result with the convolution route, as an independent check.
pub fn recheck_convolution(problem: &DesignProblem, result: &AllocationResult) -> f64 {
    problem.pos(&result.allocation, Criterion::Convolution)
}

/// Re-evaluates a plan-level PoS through the forecasting pipeline.
pub fn recheck_plan(plan: &StudyPlan) -> f64 {
    forecast::pos(plan, plan.t_plan, PosMethod::Convolution)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Rows: low, high, monthly rate, patient cost.
    pub const TABLE1: [(u32, u32, f64, f64); 16] = [
        (0, 7, 0.42, 15600.0),
        (0, 4, 0.43, 14250.0),
        (2, 5, 0.22, 13550.0),
        (0, 4, 0.55, 14200.0),
        (0, 6, 0.30, 13800.0),
        (1, 7, 0.57, 14300.0),
        (1, 5, 0.21, 13400.0),
        (1, 7, 0.25, 14250.0),
        (2, 5, 0.16, 12300.0),
        (0, 7, 0.19, 13800.0),
        (2, 7, 0.18, 14600.0),
        (2, 7, 0.62, 16380.0),
        (0, 4, 0.45, 13400.0),
        (0, 5, 0.23, 11200.0),
        (0, 5, 0.30, 14000.0),
        (2, 7, 0.39, 14100.0),
    ];

    pub fn table1() -> DesignProblem {
        let t_plan = 720;
        let kin = TABLE1
            .iter()
            .map(|r| {
                let prior = RatePrior::from_mean_cv(r.2 / crate::DAYS_PER_MONTH, 1.2).unwrap();
                CountryKinetics::from_prior(&prior, (30, 210), t_plan).unwrap()
            })
            .collect();
        let costs = CostModel::new(vec![5000.0; 16], TABLE1.iter().map(|r| r.3).collect(), vec![0.0; 16]).unwrap();
        let bounds = AllocationBounds::new(
            TABLE1.iter().map(|r| r.0).collect(),
            TABLE1.iter().map(|r| r.1).collect(),
        )
        .unwrap();
        DesignProblem::new(kin, costs, bounds, vec![None; 16], 250, t_plan).unwrap()
    }

    /// Small problem: `(low, high, rate per day, patient cost, country cost)`.
    pub fn small(rows: &[(u32, u32, f64, f64, f64)], caps: Vec<Option<u32>>, n: u64) -> DesignProblem {
        let t_plan = 360;
        let kin = rows
            .iter()
            .map(|r| {
                let prior = RatePrior::from_mean_cv(r.2, 1.0).unwrap();
                CountryKinetics::from_prior(&prior, (20, 140), t_plan).unwrap()
            })
            .collect();
        let costs = CostModel::new(
            vec![4000.0; rows.len()],
            rows.iter().map(|r| r.3).collect(),
            rows.iter().map(|r| r.4).collect(),
        )
        .unwrap();
        let bounds =
            AllocationBounds::new(rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()).unwrap();
        DesignProblem::new(kin, costs, bounds, caps, n, t_plan).unwrap()
    }
}
