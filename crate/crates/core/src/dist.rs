//! Finite probability vectors over patient counts.

use serde::{Deserialize, Serialize};

use crate::special::KahanSum;

/// Probability mass over `0..len`, index = patient count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    pmf: Vec<f64>,
}

impl DiscreteDist {
    /// Wraps a vector without normalising it.
    pub fn from_pmf(pmf: Vec<f64>) -> Self {
        assert!(!pmf.is_empty(), "a distribution needs at least one atom");
        Self { pmf }
    }

    pub fn point_mass(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self { pmf }
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn into_pmf(self) -> Vec<f64> {
        self.pmf
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    /// Largest representable count.
    pub fn max_count(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn total(&self) -> f64 {
        let mut s = KahanSum::default();
        self.pmf.iter().for_each(|&p| s.add(p));
        s.value()
    }

    /// Clips negative round-off to zero and rescales to unit mass.
    pub fn clip_and_normalize(&mut self) {
        self.pmf.iter_mut().for_each(|p| {
            if *p < 0.0 {
                *p = 0.0
            }
        });
        let s = self.total();
        if s > 0.0 {
            self.pmf.iter_mut().for_each(|p| *p /= s);
        }
    }

    /// Drops trailing atoms whose mass is exactly zero.
    pub fn trim_zeros(&mut self) {
        while self.pmf.len() > 1 && *self.pmf.last().unwrap() == 0.0 {
            self.pmf.pop();
        }
    }

    pub fn mean(&self) -> f64 {
        let mut s = KahanSum::default();
        self.pmf.iter().enumerate().for_each(|(k, &p)| s.add(k as f64 * p));
        s.value()
    }

    pub fn second_moment(&self) -> f64 {
        let mut s = KahanSum::default();
        self.pmf
            .iter()
            .enumerate()
            .for_each(|(k, &p)| s.add((k * k) as f64 * p));
        s.value()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// `P(X <= k)`; zero for negative `k`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let end = (k as usize + 1).min(self.pmf.len());
        let mut s = KahanSum::default();
        self.pmf[..end].iter().for_each(|&p| s.add(p));
        s.value().min(1.0)
    }

    /// `P(X >= k)`.
    pub fn sf_from(&self, k: u64) -> f64 {
        (1.0 - self.cdf(k as i64 - 1)).clamp(0.0, 1.0)
    }

    /// Smallest `k` with `P(X <= k) >= q`; the last index when round-off
    /// keeps the total just below `q`.
    pub fn quantile(&self, q: f64) -> usize {
        let mut s = KahanSum::default();
        for (k, &p) in self.pmf.iter().enumerate() {
            s.add(p);
            if s.value() >= q {
                return k;
            }
        }
        self.max_count()
    }
}
