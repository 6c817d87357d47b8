//! Enrollment plans and unrestricted site/country count models.
//!
//! A country's count is a mixed Poisson variable whose cumulative rate is a
//! weighted sum of independent gamma rates. The sum is replaced by a single
//! gamma law with the same mean and variance, giving a unit-exposure
//! Poisson-gamma count `PG(A, B)` with `A = E^2 / S2` and `B = E / S2`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::pgdist::{pg_cdf, PGParams, RatePrior};

/// Default tail mass dropped when truncating unbounded count vectors.
pub const DEFAULT_TAIL_EPS: f64 = 1e-9;

/// One site: activation day and rate prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePlan {
    pub id: String,
    pub activation_day: u32,
    pub prior: RatePrior,
}

impl SitePlan {
    pub fn new(id: impl Into<String>, activation_day: u32, prior: RatePrior) -> Self {
        Self {
            id: id.into(),
            activation_day,
            prior,
        }
    }

    /// Days of active enrollment by day `t`: `max(0, t - u)`.
    pub fn exposure(&self, t: u32) -> f64 {
        t.saturating_sub(self.activation_day) as f64
    }

    /// Unrestricted site count at day `t`.
    pub fn count_params(&self, t: u32) -> PGParams {
        self.prior.over(self.exposure(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryPlan {
    pub id: String,
    pub sites: Vec<SitePlan>,
    pub cap: Option<u32>,
}

impl CountryPlan {
    pub fn new(id: impl Into<String>, sites: Vec<SitePlan>, cap: Option<u32>) -> Result<Self> {
        let id = id.into();
        let mut seen = HashSet::new();
        for s in &sites {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidPlan(format!(
                    "duplicate site id {:?} in country {id:?}",
                    s.id
                )));
            }
        }
        Ok(Self { id, sites, cap })
    }

    /// Sites sharing one prior, activated on the given days.
    pub fn uniform(id: impl Into<String>, prior: RatePrior, activation_days: &[u32], cap: Option<u32>) -> Self {
        let id = id.into();
        let sites = activation_days
            .iter()
            .enumerate()
            .map(|(i, &u)| SitePlan::new(format!("{id}-{}", i + 1), u, prior))
            .collect();
        Self { id, sites, cap }
    }

    pub fn with_cap(mut self, cap: Option<u32>) -> Self {
        self.cap = cap;
        self
    }

    /// Sum of the site mean rates, `M(I_s)`.
    pub fn total_rate_mean(&self) -> f64 {
        self.sites.iter().map(|s| s.prior.mean()).sum()
    }

    /// Sum of the site rate variances, `V^2(I_s)`.
    pub fn total_rate_variance(&self) -> f64 {
        self.sites.iter().map(|s| s.prior.variance()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub countries: Vec<CountryPlan>,
    pub target_n: u64,
    pub t_plan: u32,
}

impl StudyPlan {
    pub fn new(countries: Vec<CountryPlan>, target_n: u64, t_plan: u32) -> Result<Self> {
        if target_n == 0 {
            return Err(Error::InvalidPlan("target_n must be >= 1".into()));
        }
        if t_plan == 0 {
            return Err(Error::InvalidPlan("t_plan must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for c in &countries {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::InvalidPlan(format!("duplicate country id {:?}", c.id)));
            }
        }
        Ok(Self {
            countries,
            target_n,
            t_plan,
        })
    }

    pub fn has_caps(&self) -> bool {
        self.countries.iter().any(|c| c.cap.is_some())
    }

    /// Copy of the plan with every cap removed.
    pub fn uncapped(&self) -> Self {
        Self {
            countries: self.countries.iter().map(|c| c.clone().with_cap(None)).collect(),
            ..self.clone()
        }
    }
}

/// Mean `E` and variance `S2` of a cumulative rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateMoments {
    pub mean: f64,
    pub var: f64,
}

impl std::ops::Add for RateMoments {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            mean: self.mean + other.mean,
            var: self.var + other.var,
        }
    }
}

impl std::iter::Sum for RateMoments {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Moment-matched unit-exposure Poisson-gamma parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPG {
    pub a: f64,
    pub b: f64,
}

impl AggregatedPG {
    pub fn params(&self) -> PGParams {
        PGParams::unit(self.a, self.b).expect("aggregated parameters are positive")
    }
}

/// `E = sum m_i v_i`, `S2 = sum s_i^2 v_i^2` over the sites active at day `t`.
pub fn country_rate_moments(country: &CountryPlan, t: u32) -> RateMoments {
    country
        .sites
        .iter()
        .map(|s| {
            let v = s.exposure(t);
            RateMoments {
                mean: s.prior.mean() * v,
                var: s.prior.variance() * v * v,
            }
        })
        .sum()
}

/// `A = E^2 / S2`, `B = E / S2`.
pub fn aggregate_pg(moments: RateMoments) -> Result<AggregatedPG> {
    if moments.var.is_nan() || moments.var <= 0.0 || moments.mean.is_nan() || moments.mean <= 0.0 {
        return Err(Error::Degenerate(format!(
            "rate moments E={}, S2={} admit no gamma match",
            moments.mean, moments.var
        )));
    }
    Ok(AggregatedPG {
        a: moments.mean * moments.mean / moments.var,
        b: moments.mean / moments.var,
    })
}

/// Count law of an unrestricted country process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountLaw {
    /// No active exposure.
    Zero,
    /// Known cumulative rate (zero rate variance).
    Poisson(f64),
    PoissonGamma(PGParams),
}

impl CountLaw {
    pub fn from_moments(m: RateMoments) -> Self {
        if m.mean.is_nan() || m.mean <= 0.0 {
            CountLaw::Zero
        } else {
            match aggregate_pg(m) {
                Ok(agg) => CountLaw::PoissonGamma(agg.params()),
                Err(_) => CountLaw::Poisson(m.mean),
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountLaw::Zero => 0.0,
            CountLaw::Poisson(m) => m,
            CountLaw::PoissonGamma(p) => p.mean(),
        }
    }

    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match *self {
            CountLaw::Zero => 1.0,
            CountLaw::Poisson(m) => poisson_prefix(m, k as usize + 1).iter().sum::<f64>().min(1.0),
            CountLaw::PoissonGamma(p) => pg_cdf(&p, k),
        }
    }

    pub fn pmf_prefix(&self, len: usize) -> Vec<f64> {
        match *self {
            CountLaw::Zero => {
                let mut v = vec![0.0; len];
                if len > 0 {
                    v[0] = 1.0;
                }
                v
            }
            CountLaw::Poisson(m) => poisson_prefix(m, len),
            CountLaw::PoissonGamma(p) => p.pmf_prefix(len),
        }
    }

    fn tail_bound(&self, eps: f64) -> usize {
        match *self {
            CountLaw::Zero => 0,
            CountLaw::Poisson(m) => {
                let mut k = (m + 8.0 * m.sqrt()).ceil() as usize + 8;
                while 1.0 - self.cdf(k as i64) >= eps {
                    k = 2 * k + 1;
                }
                k
            }
            CountLaw::PoissonGamma(p) => p.tail_bound(eps) as usize,
        }
    }
}

fn poisson_prefix(mean: f64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    if len == 0 {
        return v;
    }
    let mode = (mean.floor() as usize).min(len - 1);
    let kf = mode as f64;
    v[mode] = (kf * mean.ln() - mean - crate::special::ln_gamma(kf + 1.0)).exp();
    for j in mode..len - 1 {
        v[j + 1] = v[j] * mean / (j as f64 + 1.0);
    }
    for j in (0..mode).rev() {
        v[j] = v[j + 1] * (j as f64 + 1.0) / mean;
    }
    v
}

/// Aggregated count law of a country at day `t`, ignoring any cap.
pub fn country_count_law(country: &CountryPlan, t: u32) -> CountLaw {
    CountLaw::from_moments(country_rate_moments(country, t))
}

/// Truncated pmf of the unrestricted country count; the last entry holds the
/// whole remaining tail so the vector sums to one.
pub fn country_count_dist(country: &CountryPlan, t: u32, tail_eps: f64) -> DiscreteDist {
    law_to_dist(&country_count_law(country, t), tail_eps)
}

pub(crate) fn law_to_dist(law: &CountLaw, tail_eps: f64) -> DiscreteDist {
    let k = law.tail_bound(tail_eps);
    let mut pmf = law.pmf_prefix(k + 1);
    pmf[k] = 1.0 - law.cdf(k as i64 - 1);
    let mut d = DiscreteDist::from_pmf(pmf);
    d.clip_and_normalize();
    d
}

/// `P(tau(I_s, target) <= t) = 1 - P(PG(A, B) <= target - 1)`.
pub fn time_to_target_cdf(country: &CountryPlan, target: u32, t: u32) -> f64 {
    if target == 0 {
        return 1.0;
    }
    1.0 - country_count_law(country, t).cdf(target as i64 - 1)
}

fn round_half_even(x: f64) -> f64 {
    x.round_ties_even()
}

/// Activation days `a + round(i (b - a) / n)`, `i = 1..=n`, ties to even.
pub fn activation_grid(a: u32, b: u32, n: usize) -> Vec<u32> {
    assert!(b >= a, "activation window must satisfy a <= b");
    (1..=n)
        .map(|i| a + round_half_even(i as f64 * (b - a) as f64 / n as f64) as u32)
        .collect()
}

/// Exact country pmf on `0..len` by direct convolution of the site pmfs.
pub fn exact_country_pmf(country: &CountryPlan, t: u32, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    acc[0] = 1.0;
    for site in &country.sites {
        let p = site.count_params(t).pmf_prefix(len);
        let mut next = vec![0.0; len];
        for (i, &x) in acc.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in p[..len - i].iter().enumerate() {
                next[i + j] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Sup-norm distance on `0..=max_count` between the exact country pmf and
/// its moment-matched approximation.
pub fn aggregation_sup_error(country: &CountryPlan, t: u32, max_count: usize) -> f64 {
    let len = max_count + 1;
    let exact = exact_country_pmf(country, t, len);
    let approx = country_count_law(country, t).pmf_prefix(len);
    exact
        .iter()
        .zip(&approx)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `K` sites with rates `Gamma(1.5, 150)` and exposures `round(i * 300 / K)`
/// at day 300.
pub fn appendix_country(k: usize) -> CountryPlan {
    let prior = RatePrior::new(1.5, 150.0).expect("valid prior");
    let days: Vec<u32> = (1..=k)
        .map(|i| 300 - round_half_even(i as f64 * 300.0 / k as f64) as u32)
        .collect();
    CountryPlan::uniform(format!("K{k}"), prior, &days, None)
}
