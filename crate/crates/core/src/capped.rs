//! Enrollment processes stopped at a cap.
//!
//! A capped count is `min(N, L)`. Its law keeps the unrestricted pmf below `L`
//! and puts the whole upper tail on `L`. The first two moments follow from
//! shifting the gamma shape:
//!
//! ```text
//! E[min(N, L)]   = (a t / b) F_{a+1}(L - 2) + L (1 - F_a(L - 1))
//! E[min(N, L)^2] = (a (a + 1) t^2 / b^2) F_{a+2}(L - 3)
//!                + (a t / b) F_{a+1}(L - 2) + L^2 (1 - F_a(L - 1))
//! ```
//!
//! where `F_c` is the cdf of `PG(t, c, b)` and `F_c(k) = 0` for `k < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{country_count_law, country_rate_moments, CountLaw, CountryPlan, SitePlan};
use crate::pgdist::{pg_cdf, PGParams};

/// Law of `min(N, L)` on `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappedDist {
    pmf: Vec<f64>,
    cap: u32,
}

impl CappedDist {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn into_pmf(self) -> Vec<f64> {
        self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum()
    }
}

pub(crate) fn capped_from_law(law: &CountLaw, cap: u32) -> CappedDist {
    let l = cap as usize;
    let mut pmf = law.pmf_prefix(l + 1);
    // The atom at the cap is the complement of the cdf below it.
    pmf[l] = (1.0 - law.cdf(cap as i64 - 1)).max(0.0);
    CappedDist { pmf, cap }
}

/// Law of a single site's enrollment stopped at `cap`.
pub fn capped_site_dist(site: &SitePlan, t: u32, cap: u32) -> CappedDist {
    capped_from_law(&CountLaw::PoissonGamma(site.count_params(t)), cap)
}

/// `E[min(N, L)]` for `N ~ PG(t, alpha, beta)`.
pub fn capped_mean(params: &PGParams, cap: u32) -> f64 {
    let l = cap as i64;
    params.mean() * pg_cdf(&params.shifted_shape(1.0), l - 2) + cap as f64 * (1.0 - pg_cdf(params, l - 1))
}

/// `E[min(N, L)^2]` for `N ~ PG(t, alpha, beta)`.
pub fn capped_second_moment(params: &PGParams, cap: u32) -> f64 {
    let l = cap as i64;
    let lf = cap as f64;
    let r = params.t() / params.beta();
    let a = params.alpha();
    a * (a + 1.0) * r * r * pg_cdf(&params.shifted_shape(2.0), l - 3)
        + a * r * pg_cdf(&params.shifted_shape(1.0), l - 2)
        + lf * lf * (1.0 - pg_cdf(params, l - 1))
}

/// First and second moments of a capped count law.
pub(crate) fn capped_law_moments(law: &CountLaw, cap: u32) -> (f64, f64) {
    let l = cap as i64;
    let lf = cap as f64;
    match *law {
        CountLaw::Zero => (0.0, 0.0),
        CountLaw::PoissonGamma(p) => (capped_mean(&p, cap), capped_second_moment(&p, cap)),
        CountLaw::Poisson(m) => {
            let atom = 1.0 - law.cdf(l - 1);
            let mean = m * law.cdf(l - 2) + lf * atom;
            let second = m * m * law.cdf(l - 3) + m * law.cdf(l - 2) + lf * lf * atom;
            (mean, second)
        }
    }
}

/// Mean and variance of a count law stopped at `cap`; variance clamped at 0.
pub(crate) fn capped_law_mean_var(law: &CountLaw, cap: u32) -> (f64, f64) {
    let (m1, m2) = capped_law_moments(law, cap);
    (m1, (m2 - m1 * m1).max(0.0))
}

fn require_cap(country: &CountryPlan) -> Result<u32> {
    country
        .cap
        .ok_or_else(|| Error::InvalidPlan(format!("country {:?} has no cap", country.id)))
}

/// Law of the country process stopped at its cap, through the aggregated law.
pub fn capped_country_dist(country: &CountryPlan, t: u32) -> Result<CappedDist> {
    let cap = require_cap(country)?;
    Ok(capped_from_law(&country_count_law(country, t), cap))
}

/// Mean and variance of the capped country process at day `t`.
pub fn capped_country_mean_var(country: &CountryPlan, t: u32) -> Result<(f64, f64)> {
    let cap = require_cap(country)?;
    Ok(capped_law_mean_var(&country_count_law(country, t), cap))
}

/// `P(tau(I_s, L) <= t)`: probability the cap has been reached by day `t`.
pub fn time_to_cap_cdf(country: &CountryPlan, t: u32) -> Result<f64> {
    let cap = require_cap(country)?;
    if cap == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - country_count_law(country, t).cdf(cap as i64 - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPoint {
    /// Day, or site multiplier for the site-count sweep.
    pub scale: f64,
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub cap: u32,
    pub over_time: Vec<AsymptoticPoint>,
    pub over_sites: Vec<AsymptoticPoint>,
    /// First index after which the mean rises and the variance falls.
    pub time_knee: Option<usize>,
    pub sites_knee: Option<usize>,
}

impl AsymptoticReport {
    /// Both sweeps end within `tol` of the cap with monotone tails.
    pub fn converged(&self, tol: f64) -> bool {
        let cap = self.cap as f64;
        let ends_at_cap = |pts: &[AsymptoticPoint]| {
            pts.last()
                .is_none_or(|p| (p.mean - cap).abs() <= tol && p.var <= tol * cap.max(1.0))
        };
        self.time_knee.is_some()
            && self.sites_knee.is_some()
            && ends_at_cap(&self.over_time)
            && ends_at_cap(&self.over_sites)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticGrid {
    pub days: Vec<u32>,
    /// Each site is replicated this many times at `fixed_day`.
    pub site_multipliers: Vec<usize>,
    pub fixed_day: u32,
}

impl AsymptoticGrid {
    pub fn default_for(country: &CountryPlan) -> Self {
        let last = country.sites.iter().map(|s| s.activation_day).max().unwrap_or(0);
        Self {
            days: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            site_multipliers: (0..12).map(|i| 1usize << i).collect(),
            fixed_day: last + 100,
        }
    }
}

fn knee(points: &[AsymptoticPoint]) -> Option<usize> {
    if points.is_empty() {
        return None;
    }
    let mut k = points.len() - 1;
    while k > 0 {
        let (a, b) = (&points[k - 1], &points[k]);
        if b.mean + 1e-12 >= a.mean && b.var <= a.var + 1e-12 {
            k -= 1;
        } else {
            break;
        }
    }
    Some(k)
}

fn replicate(country: &CountryPlan, times: usize) -> CountryPlan {
    let sites = (0..times)
        .flat_map(|r| {
            country.sites.iter().map(move |s| SitePlan {
                id: format!("{}#{r}", s.id),
                ..s.clone()
            })
        })
        .collect();
    CountryPlan {
        id: country.id.clone(),
        sites,
        cap: country.cap,
    }
}

/// Capped mean and variance along a growing-time sweep and a growing-site sweep.
pub fn asymptotic_suite(country: &CountryPlan) -> Result<AsymptoticReport> {
    asymptotic_suite_with(country, &AsymptoticGrid::default_for(country))
}

pub fn asymptotic_suite_with(country: &CountryPlan, grid: &AsymptoticGrid) -> Result<AsymptoticReport> {
    let cap = require_cap(country)?;
    if cap > 0 {
        let m = country_rate_moments(country, u32::MAX);
        if !(country.total_rate_mean() > 0.0 && country.total_rate_variance() > 0.0 && m.mean > 0.0) {
            return Err(Error::Degenerate(format!(
                "country {:?} needs positive total rate mean and variance",
                country.id
            )));
        }
    }
    let over_time: Vec<AsymptoticPoint> = grid
        .days
        .iter()
        .map(|&t| {
            let (mean, var) = capped_country_mean_var(country, t)?;
            Ok(AsymptoticPoint {
                scale: t as f64,
                mean,
                var,
            })
        })
        .collect::<Result<_>>()?;
    let over_sites: Vec<AsymptoticPoint> = grid
        .site_multipliers
        .iter()
        .map(|&r| {
            let (mean, var) = capped_country_mean_var(&replicate(country, r), grid.fixed_day)?;
            Ok(AsymptoticPoint {
                scale: r as f64,
                mean,
                var,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AsymptoticReport {
        cap,
        time_knee: knee(&over_time),
        sites_knee: knee(&over_sites),
        over_time,
        over_sites,
    })
}
