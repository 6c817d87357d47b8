//! Poisson-gamma enrollment modeling for multi-country clinical trials.
//!
//! The crate is organised bottom-up:
//!
//! * [`pgdist`]: Poisson-gamma (negative binomial) pmf, cdf and quantiles.
//! * [`model`]: study/country/site plans and the moment-matched country aggregation.
//! * [`capped`]: country processes truncated at an enrollment cap.
//! * [`forecast`]: global forecasts by convolution or normal approximation.
//! * [`design`]: cost-minimal site allocation under a probability-of-success constraint.
//! * [`oracle`]: Monte Carlo simulator used as independent ground truth.

pub mod capped;
pub mod design;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod model;
pub mod oracle;
pub mod pgdist;
mod special;

pub use special::{norm_cdf, norm_ppf};

pub use dist::DiscreteDist;
pub use error::{Error, Result};
pub use model::{AggregatedPG, CountryPlan, RateMoments, SitePlan, StudyPlan};
pub use pgdist::{PGParams, RatePrior};

/// Days per month used when converting monthly rates.
pub const DAYS_PER_MONTH: f64 = 30.0;
