//! Study configuration: JSON ingestion, validation, and conversion to the
//! kernel's plan and design types.
//!
//! Monthly rates are converted with [`DAYS_PER_MONTH`] and `(mean, cv)` pairs
//! become `(alpha, beta) = (1/cv^2, 1/(cv^2 mean))` here, so the kernel only
//! ever sees per-day `(alpha, beta)` priors.

use std::collections::HashSet;
use std::path::Path;

use enroll_core::design::{AllocationBounds, CostModel, CountryKinetics, DesignProblem};
use enroll_core::model::activation_grid;
use enroll_core::{CountryPlan, RatePrior, SitePlan, StudyPlan, DAYS_PER_MONTH};
use serde::{Deserialize, Serialize};

/// A configuration problem, located by a field path such as `countries[2].rate.cv`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub countries: Vec<CountryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub target_n: u64,
    pub t_plan_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationConfig>,
    /// Number of sites placed on the activation window grid when neither
    /// explicit days nor a site list is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<SiteConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub site: f64,
    pub patient: f64,
    #[serde(default)]
    pub country: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub low: u32,
    pub high: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_per_month: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_per_day: Option<f64>,
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_days: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_days: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub activation_day: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn positive(path: &str, v: f64) -> CResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("must be a finite positive number, got {v}"),
        ))
    }
}

fn non_negative(path: &str, v: f64) -> CResult<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("must be a finite non-negative number, got {v}"),
        ))
    }
}

impl RateConfig {
    /// Per-day prior from the configured mean and cv.
    fn prior(&self, path: &str) -> CResult<RatePrior> {
        let mean = match (self.mean_per_month, self.mean_per_day) {
            (Some(m), None) => {
                positive(&format!("{path}.mean_per_month"), m)?;
                m / DAYS_PER_MONTH
            }
            (None, Some(d)) => {
                positive(&format!("{path}.mean_per_day"), d)?;
                d
            }
            _ => {
                return Err(ConfigError::new(
                    path,
                    "exactly one of mean_per_month or mean_per_day is required",
                ))
            }
        };
        positive(&format!("{path}.cv"), self.cv)?;
        RatePrior::from_mean_cv(mean, self.cv).map_err(|e| ConfigError::new(path, e.to_string()))
    }
}

impl ActivationConfig {
    fn check(&self, path: &str) -> CResult<()> {
        match (&self.window_days, &self.explicit_days) {
            (Some([a, b]), None) if a > b => Err(ConfigError::new(
                format!("{path}.window_days"),
                format!("window start {a} exceeds its end {b}"),
            )),
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(ConfigError::new(
                path,
                "exactly one of window_days or explicit_days is required",
            )),
        }
    }
}

impl CountryConfig {
    /// Prior shared by all sites of the country, when the country uses `rate`.
    fn shared_prior(&self, path: &str) -> CResult<Option<RatePrior>> {
        self.rate.as_ref().map(|r| r.prior(&format!("{path}.rate"))).transpose()
    }

    /// Activation days and per-site priors of the country's sites, or `None`
    /// when the configuration only describes the window (optimization input).
    fn site_list(&self, path: &str) -> CResult<Option<Vec<(u32, RatePrior)>>> {
        let shared = self.shared_prior(path)?;
        if let Some(sites) = &self.sites {
            return sites
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let sp = format!("{path}.sites[{i}]");
                    let prior = match (shared, s.alpha, s.beta) {
                        (Some(p), None, None) => p,
                        (None, Some(a), Some(b)) => {
                            positive(&format!("{sp}.alpha"), a)?;
                            positive(&format!("{sp}.beta"), b)?;
                            RatePrior::new(a, b).map_err(|e| ConfigError::new(&sp, e.to_string()))?
                        }
                        (Some(_), _, _) => {
                            return Err(ConfigError::new(
                                sp,
                                "alpha/beta must not be given when the country has a rate",
                            ))
                        }
                        (None, _, _) => {
                            return Err(ConfigError::new(
                                sp,
                                "alpha and beta are required when the country has no rate",
                            ))
                        }
                    };
                    Ok((s.activation_day, prior))
                })
                .collect::<CResult<Vec<_>>>()
                .map(Some);
        }
        let Some(prior) = shared else {
            return Err(ConfigError::new(
                path,
                "exactly one of rate or per-site alpha/beta is required",
            ));
        };
        let days = match (&self.activation, self.n_sites) {
            (
                Some(ActivationConfig {
                    explicit_days: Some(d), ..
                }),
                _,
            ) => d.clone(),
            (
                Some(ActivationConfig {
                    window_days: Some([a, b]),
                    ..
                }),
                Some(n),
            ) => activation_grid(*a, *b, n as usize),
            _ => return Ok(None),
        };
        Ok(Some(days.into_iter().map(|d| (d, prior)).collect()))
    }

    /// Activation window used by the optimizers.
    fn window(&self, path: &str) -> CResult<(u32, u32)> {
        let span = |days: &mut dyn Iterator<Item = u32>| {
            days.fold(None, |acc: Option<(u32, u32)>, d| {
                Some(acc.map_or((d, d), |(a, b)| (a.min(d), b.max(d))))
            })
        };
        let from_activation = self
            .activation
            .as_ref()
            .and_then(|a| match (&a.window_days, &a.explicit_days) {
                (Some([a, b]), _) => Some((*a, *b)),
                (_, Some(d)) => span(&mut d.iter().copied()),
                _ => None,
            });
        from_activation
            .or_else(|| {
                self.sites
                    .as_ref()
                    .and_then(|s| span(&mut s.iter().map(|s| s.activation_day)))
            })
            .ok_or_else(|| ConfigError::new(format!("{path}.activation"), "required by optimize"))
    }
}

impl StudyConfig {
    pub fn from_path(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(
                if path == "." { "<root>".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks shared by every command.
    pub fn validate(&self) -> CResult<()> {
        if self.study.target_n == 0 {
            return Err(ConfigError::new("study.target_n", "must be at least 1"));
        }
        if self.study.t_plan_days == 0 {
            return Err(ConfigError::new("study.t_plan_days", "must be at least 1"));
        }
        if self.countries.is_empty() {
            return Err(ConfigError::new("countries", "at least one country is required"));
        }
        let mut ids = HashSet::new();
        for (i, c) in self.countries.iter().enumerate() {
            let path = format!("countries[{i}]");
            if !ids.insert(c.id.as_str()) {
                return Err(ConfigError::new(
                    format!("{path}.id"),
                    format!("duplicate id {:?}", c.id),
                ));
            }
            if let Some(cost) = &c.cost {
                non_negative(&format!("{path}.cost.site"), cost.site)?;
                non_negative(&format!("{path}.cost.patient"), cost.patient)?;
                non_negative(&format!("{path}.cost.country"), cost.country)?;
            }
            if let Some(b) = &c.bounds {
                if b.low > b.high {
                    return Err(ConfigError::new(
                        format!("{path}.bounds"),
                        format!("low {} exceeds high {}", b.low, b.high),
                    ));
                }
            }
            if let Some(a) = &c.activation {
                a.check(&format!("{path}.activation"))?;
            }
            if c.n_sites.is_some() && c.sites.is_some() {
                return Err(ConfigError::new(
                    format!("{path}.n_sites"),
                    "must not be combined with an explicit site list",
                ));
            }
            // Resolves the rate / per-site prior exclusivity.
            c.site_list(&path)?;
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.countries.iter().map(|c| c.id.clone()).collect()
    }

    /// Concrete study plan for forecasting and simulation.
    pub fn study_plan(&self) -> CResult<StudyPlan> {
        let countries = self
            .countries
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let path = format!("countries[{i}]");
                let sites = c.site_list(&path)?.ok_or_else(|| {
                    ConfigError::new(
                        &path,
                        "sites, activation.explicit_days, or n_sites with activation.window_days is required to forecast",
                    )
                })?;
                let sites = sites
                    .into_iter()
                    .enumerate()
                    .map(|(k, (day, prior))| SitePlan::new(format!("{}-{}", c.id, k + 1), day, prior))
                    .collect();
                CountryPlan::new(c.id.clone(), sites, c.cap).map_err(|e| ConfigError::new(&path, e.to_string()))
            })
            .collect::<CResult<Vec<_>>>()?;
        StudyPlan::new(countries, self.study.target_n, self.study.t_plan_days)
            .map_err(|e| ConfigError::new("study", e.to_string()))
    }

    /// Allocation problem for the optimizers.
    ///
    /// Countries described by per-site priors use the average site mean and
    /// variance as their per-site rate moments.
    pub fn design_problem(&self) -> CResult<DesignProblem> {
        let t_plan = self.study.t_plan_days;
        let mut kin = Vec::new();
        let (mut site, mut patient, mut country) = (Vec::new(), Vec::new(), Vec::new());
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for (i, c) in self.countries.iter().enumerate() {
            let path = format!("countries[{i}]");
            let cost = c
                .cost
                .as_ref()
                .ok_or_else(|| ConfigError::new(format!("{path}.cost"), "required by optimize"))?;
            let bounds = c
                .bounds
                .as_ref()
                .ok_or_else(|| ConfigError::new(format!("{path}.bounds"), "required by optimize"))?;
            let (mean, var) = match c.shared_prior(&path)? {
                Some(p) => (p.mean(), p.variance()),
                None => {
                    let sites = c.site_list(&path)?.unwrap_or_default();
                    let k = sites.len().max(1) as f64;
                    sites
                        .iter()
                        .fold((0.0, 0.0), |(m, v), (_, p)| (m + p.mean() / k, v + p.variance() / k))
                }
            };
            let window = c.window(&path)?;
            kin.push(
                CountryKinetics::new(mean, var, window, t_plan)
                    .map_err(|e| ConfigError::new(format!("{path}.activation"), e.to_string()))?,
            );
            site.push(cost.site);
            patient.push(cost.patient);
            country.push(cost.country);
            low.push(bounds.low);
            high.push(bounds.high);
        }
        let costs = CostModel::new(site, patient, country).map_err(|e| ConfigError::new("countries", e.to_string()))?;
        let bounds = AllocationBounds::new(low, high).map_err(|e| ConfigError::new("countries", e.to_string()))?;
        let caps = self.countries.iter().map(|c| c.cap).collect();
        DesignProblem::new(kin, costs, bounds, caps, self.study.target_n, t_plan)
            .map_err(|e| ConfigError::new("study", e.to_string()))
    }
}
