//! Global enrollment forecasts.
//!
//! Two routes give the distribution of the global count at a day: the exact
//! convolution of the per-country laws (the "distributional" route), and a
//! normal law with the summed country means and variances.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::capped::{capped_country_dist, capped_law_mean_var, time_to_cap_cdf};
use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::model::{
    country_count_dist, country_count_law, country_rate_moments, CountryPlan, StudyPlan, DEFAULT_TAIL_EPS,
};
use crate::special::{norm_cdf, norm_ppf};

/// Below this length (of the shorter operand) convolution is done directly.
pub const DIRECT_CONVOLUTION_THRESHOLD: usize = 64;

/// Days searched before a target is declared unreachable.
pub const MAX_SEARCH_DAY: u32 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PosMethod {
    #[default]
    Convolution,
    Normal,
}

fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn fft_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Law of the sum of two independent counts.
pub fn convolve(a: &DiscreteDist, b: &DiscreteDist) -> DiscreteDist {
    let (pa, pb) = (a.pmf(), b.pmf());
    let raw = if pa.len().min(pb.len()) <= DIRECT_CONVOLUTION_THRESHOLD {
        direct_convolution(pa, pb)
    } else {
        fft_convolution(pa, pb)
    };
    let mut d = DiscreteDist::from_pmf(raw);
    d.clip_and_normalize();
    d
}

/// Law of one country's (capped or unrestricted) count at day `t`.
pub fn country_dist(country: &CountryPlan, t: u32) -> DiscreteDist {
    match country.cap {
        Some(_) => DiscreteDist::from_pmf(capped_country_dist(country, t).expect("cap is present").into_pmf()),
        None => country_count_dist(country, t, DEFAULT_TAIL_EPS),
    }
}

/// Law of the global count at day `t` by convolution of the country laws.
pub fn global_dist(plan: &StudyPlan, t: u32) -> DiscreteDist {
    let mut acc = DiscreteDist::point_mass(0);
    for c in &plan.countries {
        let mut d = country_dist(c, t);
        d.trim_zeros();
        if d.len() == 1 {
            continue;
        }
        acc = convolve(&acc, &d);
        acc.trim_zeros();
    }
    acc
}

/// Mean and variance of one country's count at day `t`.
pub fn country_mean_var(country: &CountryPlan, t: u32) -> (f64, f64) {
    match country.cap {
        Some(cap) => capped_law_mean_var(&country_count_law(country, t), cap),
        None => {
            let m = country_rate_moments(country, t);
            (m.mean, m.mean + m.var)
        }
    }
}

/// Summed country means and variances at day `t`.
pub fn global_mean_var(plan: &StudyPlan, t: u32) -> (f64, f64) {
    plan.countries
        .iter()
        .map(|c| country_mean_var(c, t))
        .fold((0.0, 0.0), |(m, v), (a, b)| (m + a, v + b))
}

/// `Phi((E - n) / G)`; a zero-variance count is treated as a point mass at `E`.
pub fn normal_pos(mean: f64, var: f64, target: u64) -> f64 {
    let n = target as f64;
    if var <= 0.0 {
        return if mean >= n { 1.0 } else { 0.0 };
    }
    norm_cdf((mean - n) / var.sqrt())
}

/// Probability that `plan.target_n` patients are enrolled by day `t`.
pub fn pos(plan: &StudyPlan, t: u32, method: PosMethod) -> f64 {
    match method {
        PosMethod::Convolution => global_dist(plan, t).sf_from(plan.target_n),
        PosMethod::Normal => {
            let (m, v) = global_mean_var(plan, t);
            normal_pos(m, v, plan.target_n)
        }
    }
}

/// Largest count the plan can ever reach, `None` when unbounded.
pub fn enrollment_ceiling(plan: &StudyPlan) -> Option<u64> {
    let mut total = 0u64;
    for c in &plan.countries {
        match c.cap {
            Some(cap) => total += u64::from(cap),
            None if !c.sites.is_empty() => return None,
            None => {}
        }
    }
    Some(total)
}

/// Smallest day `t` with `f(t) >= q` for nondecreasing `f`, or `None` if the
/// level is not reached by `limit`.
pub fn first_day_reaching(f: impl Fn(u32) -> f64, q: f64, limit: u32) -> Option<u32> {
    if f(0) >= q {
        return Some(0);
    }
    let mut lo = 0u32;
    let mut hi = 1u32;
    while f(hi) < q {
        if hi >= limit {
            return None;
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(limit);
    }
    // invariant: f(lo) < q <= f(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn check_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("probability level must lie in (0,1), got {q}")));
    }
    Ok(())
}

/// Smallest day by which the target is reached with probability at least `q`.
pub fn completion_time_quantile(plan: &StudyPlan, q: f64, method: PosMethod) -> Result<u32> {
    check_level(q)?;
    if let Some(ceiling) = enrollment_ceiling(plan) {
        if ceiling < plan.target_n {
            return Err(Error::Unreachable {
                target: plan.target_n,
                reason: format!("caps admit at most {ceiling} patients"),
            });
        }
    }
    first_day_reaching(|t| pos(plan, t, method), q, MAX_SEARCH_DAY).ok_or_else(|| Error::Unreachable {
        target: plan.target_n,
        reason: format!("probability {q} not reached within {MAX_SEARCH_DAY} days"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub method: PosMethod,
    pub q_level: f64,
    pub days: Vec<u32>,
    pub mean: Vec<f64>,
    pub median: Vec<u64>,
    pub lo: Vec<u64>,
    pub hi: Vec<u64>,
    pub pos_by_day: Vec<f64>,
}

impl ForecastSeries {
    /// Last forecast day, the completion-time 0.95 quantile.
    pub fn horizon(&self) -> u32 {
        self.days.last().copied().unwrap_or(0)
    }
}

struct DaySummary {
    mean: f64,
    median: u64,
    lo: u64,
    hi: u64,
    pos: f64,
}

fn normal_quantile(mean: f64, var: f64, p: f64) -> u64 {
    let x = mean + norm_ppf(p) * var.max(0.0).sqrt();
    x.ceil().max(0.0) as u64
}

fn summarize_day(plan: &StudyPlan, t: u32, q_level: f64, method: PosMethod) -> DaySummary {
    let (mean, var) = global_mean_var(plan, t);
    let (p_lo, p_hi) = ((1.0 - q_level) / 2.0, 1.0 - (1.0 - q_level) / 2.0);
    match method {
        PosMethod::Convolution => {
            let d = global_dist(plan, t);
            DaySummary {
                mean,
                median: d.quantile(0.5) as u64,
                lo: d.quantile(p_lo) as u64,
                hi: d.quantile(p_hi) as u64,
                pos: d.sf_from(plan.target_n),
            }
        }
        PosMethod::Normal => DaySummary {
            mean,
            median: normal_quantile(mean, var, 0.5),
            lo: normal_quantile(mean, var, p_lo),
            hi: normal_quantile(mean, var, p_hi),
            pos: normal_pos(mean, var, plan.target_n),
        },
    }
}

/// Per-day mean, median, central `q_level` band and completion probability
/// over days `1..=T_0.95`.
pub fn forecast_series(plan: &StudyPlan, q_level: f64, method: PosMethod) -> Result<ForecastSeries> {
    if !(0.5..1.0).contains(&q_level) {
        return Err(Error::Domain(format!("q_level must lie in [0.5, 1), got {q_level}")));
    }
    let horizon = completion_time_quantile(plan, 0.95, method)?.max(1);
    let days: Vec<u32> = (1..=horizon).collect();
    let rows: Vec<DaySummary> = days
        .par_iter()
        .map(|&t| summarize_day(plan, t, q_level, method))
        .collect();
    let mut s = ForecastSeries {
        method,
        q_level,
        days,
        mean: Vec::with_capacity(rows.len()),
        median: Vec::with_capacity(rows.len()),
        lo: Vec::with_capacity(rows.len()),
        hi: Vec::with_capacity(rows.len()),
        pos_by_day: Vec::with_capacity(rows.len()),
    };
    for r in rows {
        s.mean.push(r.mean);
        s.median.push(r.median);
        s.lo.push(r.lo);
        s.hi.push(r.hi);
        s.pos_by_day.push(r.pos);
    }
    Ok(s)
}

/// Completion-time summary: mean and central interval in days, PoS at `T_plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionSummary {
    pub method: PosMethod,
    pub mean_days: f64,
    pub interval_level: f64,
    pub interval_days: (u32, u32),
    pub pos_at_t_plan: f64,
    pub t_plan: u32,
    pub target_n: u64,
}

/// Mean completion day `sum_t P(tau > t)` accumulated until the survival
/// drops below `1e-7`, plus the central `level` interval of the completion day.
pub fn completion_summary(plan: &StudyPlan, level: f64, method: PosMethod) -> Result<CompletionSummary> {
    check_level(level)?;
    let lo = completion_time_quantile(plan, (1.0 - level) / 2.0, method)?;
    let hi = completion_time_quantile(plan, 1.0 - (1.0 - level) / 2.0, method)?;
    let mut mean = 0.0;
    let mut t = 0u32;
    let chunk = 64u32;
    'outer: loop {
        let surv: Vec<f64> = (t..t + chunk)
            .into_par_iter()
            .map(|d| 1.0 - pos(plan, d, method))
            .collect();
        for s in surv {
            if s < 1e-7 {
                break 'outer;
            }
            mean += s;
        }
        t += chunk;
        if t > hi.saturating_mul(8).max(hi + 1000) {
            break;
        }
    }
    Ok(CompletionSummary {
        method,
        mean_days: mean,
        interval_level: level,
        interval_days: (lo, hi),
        pos_at_t_plan: pos(plan, plan.t_plan, method),
        t_plan: plan.t_plan,
        target_n: plan.target_n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryCapImpact {
    pub country: String,
    pub cap: u32,
    /// Probability the cap is reached by `T_plan`.
    pub p_cap_by_t_plan: f64,
    /// `q`-quantile of the day the cap is reached.
    pub cap_time_quantile: Option<u32>,
    pub increase_cap_recommended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapImpactReport {
    pub method: PosMethod,
    pub q: f64,
    pub t_plan: u32,
    pub pos_at_t_plan: f64,
    /// `q`-quantile of the global completion day.
    pub completion_time_quantile: Option<u32>,
    pub countries: Vec<CountryCapImpact>,
}

impl CapImpactReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CountryCapImpact> {
        self.countries.iter().filter(|c| c.increase_cap_recommended)
    }
}

/// Compares each capped country's time-to-cap with the global completion time.
///
/// A country is flagged when its cap is more likely to be hit by `T_plan` than
/// the study is to complete, or when its `q`-quantile time-to-cap precedes
/// the global `q`-quantile completion time.
pub fn cap_impact_report(plan: &StudyPlan, q: f64, method: PosMethod) -> Result<CapImpactReport> {
    check_level(q)?;
    if !plan.has_caps() {
        return Err(Error::InvalidPlan("no capped countries".into()));
    }
    let pos_t = pos(plan, plan.t_plan, method);
    let s_n = match completion_time_quantile(plan, q, method) {
        Ok(t) => Some(t),
        Err(Error::Unreachable { .. }) => None,
        Err(e) => return Err(e),
    };
    let countries = plan
        .countries
        .iter()
        .filter_map(|c| c.cap.map(|cap| (c, cap)))
        .map(|(c, cap)| {
            let p_cap = time_to_cap_cdf(c, plan.t_plan)?;
            let s_cap = if c.sites.is_empty() && cap > 0 {
                None
            } else {
                first_day_reaching(|t| time_to_cap_cdf(c, t).unwrap_or(0.0), q, MAX_SEARCH_DAY)
            };
            let earlier = match (s_cap, s_n) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                (None, _) => false,
            };
            Ok(CountryCapImpact {
                country: c.id.clone(),
                cap,
                p_cap_by_t_plan: p_cap,
                cap_time_quantile: s_cap,
                increase_cap_recommended: p_cap > pos_t || earlier,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CapImpactReport {
        method,
        q,
        t_plan: plan.t_plan,
        pos_at_t_plan: pos_t,
        completion_time_quantile: s_n,
        countries,
    })
}
