//! Poisson-gamma (negative binomial) primitives.
//!
//! A Poisson process whose rate is drawn from `Gamma(alpha, beta)` (shape, rate)
//! and observed over an exposure `t` has the negative binomial law with size
//! `alpha` and success probability `beta / (beta + t)`. Everything is evaluated
//! in log space at the mode and then extended by the ratio recurrence
//! `pmf(k + 1) = pmf(k) * t (alpha + k) / ((k + 1)(beta + t))`, so that large
//! aggregated shapes never underflow the first term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, KahanSum};

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("{name} must be finite and > 0, got {x}")));
    }
    Ok(())
}

/// Gamma prior of a site's enrollment rate (patients per day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrior {
    alpha: f64,
    beta: f64,
}

impl RatePrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(Self { alpha, beta })
    }

    /// Prior with the given mean rate and coefficient of variation:
    /// `alpha = 1 / cv^2`, `beta = alpha / mean`.
    pub fn from_mean_cv(mean: f64, cv: f64) -> Result<Self> {
        check_positive("mean rate", mean)?;
        check_positive("cv", cv)?;
        let alpha = 1.0 / (cv * cv);
        Self::new(alpha, alpha / mean)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    pub fn cv(&self) -> f64 {
        1.0 / self.alpha.sqrt()
    }

    /// Count distribution after `exposure` days of active enrollment.
    pub fn over(&self, exposure: f64) -> PGParams {
        PGParams {
            t: exposure,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Parameters `(t, alpha, beta)` of a Poisson-gamma count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGParams {
    t: f64,
    alpha: f64,
    beta: f64,
}

impl PGParams {
    pub fn new(t: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("exposure must be finite and >= 0, got {t}")));
        }
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(Self { t, alpha, beta })
    }

    /// Unit-exposure count `PG(alpha, beta) = PG(1, alpha, beta)`.
    pub fn unit(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(1.0, alpha, beta)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Same exposure and rate with the shape increased by `delta`.
    pub fn shifted_shape(&self, delta: f64) -> Self {
        Self {
            alpha: self.alpha + delta,
            ..*self
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha * self.t / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.mean() + self.alpha * self.t * self.t / (self.beta * self.beta)
    }

    /// Negative-binomial success probability `beta / (beta + t)`.
    pub fn nb_prob(&self) -> f64 {
        self.beta / (self.beta + self.t)
    }

    fn is_point_mass(&self) -> bool {
        self.t == 0.0
    }

    /// `t / (beta + t)`, the per-step factor of the ratio recurrence.
    fn q(&self) -> f64 {
        self.t / (self.beta + self.t)
    }

    fn mode(&self) -> u64 {
        if self.alpha <= 1.0 {
            0
        } else {
            ((self.alpha - 1.0) * self.t / self.beta).floor() as u64
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if self.is_point_mass() {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let kf = k as f64;
        let ln_coef = ln_gamma(self.alpha + kf) - ln_gamma(kf + 1.0) - ln_gamma(self.alpha);
        // ln(beta/(beta+t)) = -ln1p(t/beta), ln(t/(beta+t)) = -ln1p(beta/t)
        let ln_p = -(self.t / self.beta).ln_1p();
        let ln_q = -(self.beta / self.t).ln_1p();
        ln_coef + self.alpha * ln_p + kf * ln_q
    }

    /// Probabilities of `0..len` evaluated outward from the mode.
    pub fn pmf_prefix(&self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        if len == 0 {
            return v;
        }
        if self.is_point_mass() {
            v[0] = 1.0;
            return v;
        }
        let q = self.q();
        let start = (self.mode() as usize).min(len - 1);
        v[start] = self.ln_pmf(start as u64).exp();
        for j in start..len - 1 {
            v[j + 1] = v[j] * (self.alpha + j as f64) * q / (j as f64 + 1.0);
        }
        for j in (0..start).rev() {
            v[j] = v[j + 1] * (j as f64 + 1.0) / ((self.alpha + j as f64) * q);
        }
        v
    }

    /// Index beyond which the upper tail is below `eps`.
    pub(crate) fn tail_bound(&self, eps: f64) -> u64 {
        let mut k = (self.mean() + 8.0 * self.variance().sqrt()).ceil() as u64 + 8;
        loop {
            if 1.0 - pg_cdf(self, k as i64) < eps {
                return k;
            }
            k = k * 2 + 1;
        }
    }
}

/// `P(N = k)` for `N ~ PG(t, alpha, beta)`.
pub fn pg_pmf(params: &PGParams, k: u64) -> f64 {
    params.ln_pmf(k).exp()
}

/// `P(N <= k)`; zero for negative `k`.
pub fn pg_cdf(params: &PGParams, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if params.is_point_mass() {
        return 1.0;
    }
    let k = k as u64;
    let q = params.q();
    let alpha = params.alpha;
    let mode = params.mode();
    let start = mode.min(k);
    let p_start = params.ln_pmf(start).exp();

    let mut acc = KahanSum::default();
    acc.add(p_start);
    // Below the mode terms shrink going down; above it they shrink going up.
    let mut term = p_start;
    let mut j = start;
    while j > 0 {
        term *= j as f64 / ((alpha + (j - 1) as f64) * q);
        j -= 1;
        acc.add(term);
        if term < acc.value() * 1e-18 || term == 0.0 {
            break;
        }
    }
    let mut term = p_start;
    let mut j = start;
    while j < k {
        term *= (alpha + j as f64) * q / (j as f64 + 1.0);
        j += 1;
        acc.add(term);
        if term < acc.value() * 1e-18 || term == 0.0 {
            break;
        }
    }
    acc.value().clamp(0.0, 1.0)
}

/// Smallest `k` with `P(N <= k) >= q`.
pub fn pg_quantile(params: &PGParams, q: f64) -> Result<u64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    if params.is_point_mass() {
        return Ok(0);
    }
    let mut len = (params.mean() + 12.0 * params.variance().sqrt()).ceil() as usize + 16;
    loop {
        let pmf = params.pmf_prefix(len);
        let mut acc = KahanSum::default();
        for (k, p) in pmf.iter().enumerate() {
            acc.add(*p);
            if acc.value() >= q {
                return Ok(k as u64);
            }
        }
        len *= 2;
    }
}
