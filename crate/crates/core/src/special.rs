//! Thin wrappers over the special functions used by the kernels.

use statrs::distribution::{ContinuousCDF, Normal};

pub(crate) use statrs::function::gamma::ln_gamma;

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Standard normal quantile.
pub fn norm_ppf(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn normal_helpers_are_inverse() {
        for &p in &[0.05, 0.5, 0.8, 0.975] {
            let e = (norm_cdf(norm_ppf(p)) - p).abs();
            assert!(e < 1e-10, "{p}: {e:e}");
        }
        assert_eq!(norm_ppf(0.5), 0.0);
    }
}
