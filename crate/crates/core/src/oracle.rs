//! Monte Carlo simulation of the full generative model, used as ground truth.
//!
//! Each replication draws a rate `lambda_i ~ Gamma(alpha_i, beta_i)` per site
//! and generates the site's arrivals from exponential inter-arrival times
//! after its activation day. An arrival at continuous time `s` is counted on
//! day `ceil(s)`, so the count by day `t` is exactly `Poisson(lambda (t - u))`.
//! Country counts freeze at their cap; extra arrivals on the hitting day are
//! discarded.
//!
//! Replication `r` uses a ChaCha8 stream keyed by `(seed, r)`, and all
//! statistics are integer sums or histograms, so the summary does not depend
//! on how replications are split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capped::capped_from_law;
use crate::error::{Error, Result};
use crate::model::{CountLaw, StudyPlan};
use crate::pgdist::PGParams;
use crate::special::KahanSum;

/// Replications per parallel work unit.
const BLOCK: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replications: u64,
    pub seed: u64,
    /// Last simulated day.
    pub horizon: u32,
}

impl SimConfig {
    pub fn new(replications: u64, seed: u64, horizon: u32) -> Result<Self> {
        if replications == 0 {
            return Err(Error::Domain("replications must be >= 1".into()));
        }
        Ok(Self {
            replications,
            seed,
            horizon,
        })
    }
}

/// Histogram of non-negative integers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    fn add(&mut self, k: usize) {
        if k >= self.counts.len() {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
    }

    fn merge(&mut self, other: &Self) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Empirical `P(X <= k)` over `n` observations (`n` may exceed the
    /// histogram total when some observations were censored).
    pub fn cdf(&self, k: i64, n: u64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let end = (k as usize + 1).min(self.counts.len());
        self.counts[..end].iter().sum::<u64>() as f64 / n as f64
    }

    /// Smallest `k` with empirical `P(X <= k) >= q` over `n` observations.
    pub fn quantile(&self, q: f64, n: u64) -> Option<usize> {
        let need = (q * n as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            acc += c;
            if acc >= need {
                return Some(k);
            }
        }
        None
    }

    /// Empirical pmf over `n` observations.
    pub fn pmf(&self, n: u64) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySim {
    pub id: String,
    pub cap: Option<u32>,
    /// Uncapped country count at the planned date.
    pub count_at_t_plan: Histogram,
    /// Day the country count first reaches its cap (capped countries only);
    /// replications that never reach it within the horizon are not recorded.
    pub cap_hit_day: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub config: SimConfig,
    pub t_plan: u32,
    pub target_n: u64,
    pub mean_by_day: Vec<f64>,
    pub var_by_day: Vec<f64>,
    /// Global (capped) count distribution per day `0..=horizon`.
    pub count_by_day: Vec<Histogram>,
    /// First day the global count reaches `target_n`.
    pub completion_day: Histogram,
    pub countries: Vec<CountrySim>,
}

/// Binomial standard error of a proportion estimated from `n` draws.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

impl SimSummary {
    pub fn replications(&self) -> u64 {
        self.config.replications
    }

    pub fn quantile(&self, day: u32, q: f64) -> u64 {
        self.count_by_day[day as usize]
            .quantile(q, self.replications())
            .expect("every replication is recorded on every day") as u64
    }

    /// Empirical `P(global count at day <= k)`.
    pub fn cdf(&self, day: u32, k: i64) -> f64 {
        self.count_by_day[day as usize].cdf(k, self.replications())
    }

    pub fn mean_se(&self, day: u32) -> f64 {
        (self.var_by_day[day as usize] / self.replications() as f64).sqrt()
    }

    /// Empirical `P(global count at day >= target_n)`.
    pub fn pos_at(&self, day: u32) -> f64 {
        self.completion_day.cdf(day as i64, self.replications())
    }

    pub fn pos_at_t_plan(&self) -> f64 {
        self.pos_at(self.t_plan)
    }

    pub fn pos_se(&self) -> f64 {
        binomial_se(self.pos_at_t_plan(), self.replications())
    }

    pub fn completion_quantile(&self, q: f64) -> Option<u32> {
        self.completion_day.quantile(q, self.replications()).map(|d| d as u32)
    }

    /// Empirical `P(country reaches its cap by day)`.
    pub fn cap_hit_by(&self, country: usize, day: u32) -> f64 {
        self.countries[country].cap_hit_day.cdf(day as i64, self.replications())
    }

    pub fn cap_hit_quantile(&self, country: usize, q: f64) -> Option<u32> {
        self.countries[country]
            .cap_hit_day
            .quantile(q, self.replications())
            .map(|d| d as u32)
    }
}

struct Partial {
    sum: Vec<u128>,
    sum_sq: Vec<u128>,
    by_day: Vec<Histogram>,
    completion: Histogram,
    country_count: Vec<Histogram>,
    cap_hit: Vec<Histogram>,
}

impl Partial {
    fn new(days: usize, countries: usize) -> Self {
        Self {
            sum: vec![0; days],
            sum_sq: vec![0; days],
            by_day: vec![Histogram::default(); days],
            completion: Histogram::default(),
            country_count: vec![Histogram::default(); countries],
            cap_hit: vec![Histogram::default(); countries],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sum_sq.iter_mut().zip(&other.sum_sq).for_each(|(a, b)| *a += b);
        self.by_day.iter_mut().zip(&other.by_day).for_each(|(a, b)| a.merge(b));
        self.completion.merge(&other.completion);
        self.country_count
            .iter_mut()
            .zip(&other.country_count)
            .for_each(|(a, b)| a.merge(b));
        self.cap_hit
            .iter_mut()
            .zip(&other.cap_hit)
            .for_each(|(a, b)| a.merge(b));
        self
    }
}

struct SiteSampler {
    activation: f64,
    rate: Gamma<f64>,
}

/// Simulates `cfg.replications` independent realisations of `plan`.
pub fn simulate(plan: &StudyPlan, cfg: &SimConfig) -> Result<SimSummary> {
    if cfg.replications == 0 {
        return Err(Error::Domain("replications must be >= 1".into()));
    }
    let days = cfg.horizon as usize + 1;
    let samplers: Vec<Vec<SiteSampler>> = plan
        .countries
        .iter()
        .map(|c| {
            c.sites
                .iter()
                .map(|s| SiteSampler {
                    activation: s.activation_day as f64,
                    rate: Gamma::new(s.prior.alpha(), 1.0 / s.prior.beta()).expect("validated prior parameters"),
                })
                .collect()
        })
        .collect();
    let nc = plan.countries.len();
    let blocks = cfg.replications.div_ceil(BLOCK);

    let partial = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut acc = Partial::new(days, nc);
            let mut arrivals = vec![0u32; days];
            let mut global = vec![0u64; days];
            for rep in blk * BLOCK..((blk + 1) * BLOCK).min(cfg.replications) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(rep);
                global.iter_mut().for_each(|g| *g = 0);
                for (ci, country) in plan.countries.iter().enumerate() {
                    arrivals.iter_mut().for_each(|a| *a = 0);
                    for s in &samplers[ci] {
                        let lambda = s.rate.sample(&mut rng);
                        if lambda.is_nan() || lambda <= 0.0 {
                            continue;
                        }
                        let gap = Exp::new(lambda).expect("positive rate");
                        let mut time = s.activation;
                        loop {
                            time += gap.sample(&mut rng);
                            if time > cfg.horizon as f64 {
                                break;
                            }
                            arrivals[time.ceil() as usize] += 1;
                        }
                    }
                    let cap = country.cap.map_or(u64::MAX, u64::from);
                    let mut raw = 0u64;
                    let mut hit = cap == 0;
                    if hit {
                        acc.cap_hit[ci].add(0);
                    }
                    for (d, &a) in arrivals.iter().enumerate() {
                        raw += a as u64;
                        if d == plan.t_plan as usize {
                            acc.country_count[ci].add(raw as usize);
                        }
                        if !hit && raw >= cap {
                            hit = true;
                            acc.cap_hit[ci].add(d);
                        }
                        global[d] += raw.min(cap);
                    }
                    if plan.t_plan as usize >= days {
                        // The planned date lies beyond the horizon; record the
                        // count at the horizon instead.
                        acc.country_count[ci].add(raw as usize);
                    }
                }
                let mut done = false;
                for (d, &g) in global.iter().enumerate() {
                    acc.sum[d] += g as u128;
                    acc.sum_sq[d] += (g as u128) * (g as u128);
                    acc.by_day[d].add(g as usize);
                    if !done && g >= plan.target_n {
                        done = true;
                        acc.completion.add(d);
                    }
                }
            }
            acc
        })
        .reduce_with(Partial::merge)
        .expect("at least one block");

    let n = cfg.replications as f64;
    let mean_by_day: Vec<f64> = partial.sum.iter().map(|&s| s as f64 / n).collect();
    let var_by_day = partial
        .sum_sq
        .iter()
        .zip(&mean_by_day)
        .map(|(&sq, &m)| {
            if cfg.replications > 1 {
                ((sq as f64 - n * m * m) / (n - 1.0)).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let countries = plan
        .countries
        .iter()
        .zip(partial.country_count)
        .zip(partial.cap_hit)
        .map(|((c, count_at_t_plan), cap_hit_day)| CountrySim {
            id: c.id.clone(),
            cap: c.cap,
            count_at_t_plan,
            cap_hit_day,
        })
        .collect();
    Ok(SimSummary {
        config: *cfg,
        t_plan: plan.t_plan,
        target_n: plan.target_n,
        mean_by_day,
        var_by_day,
        count_by_day: partial.by_day,
        completion_day: partial.completion,
        countries,
    })
}

/// `(sum k pmf_k, sum k^2 pmf_k)` over the law of `min(N, L)`.
pub fn brute_capped_moments(params: &PGParams, cap: u32) -> (f64, f64) {
    let d = capped_from_law(&CountLaw::PoissonGamma(*params), cap);
    let (mut m1, mut m2) = (KahanSum::default(), KahanSum::default());
    for (k, &p) in d.pmf().iter().enumerate() {
        let k = k as f64;
        m1.add(k * p);
        m2.add(k * k * p);
    }
    (m1.value(), m2.value())
}
