//! Fixtures shared by the kernel benchmarks.

pub use enroll_core::design::{AllocationBounds, CostModel, CountryKinetics, DesignProblem};
pub use enroll_core::model::activation_grid;
pub use enroll_core::{CountryPlan, PGParams, RatePrior, StudyPlan, DAYS_PER_MONTH};

/// `(low, high, mean rate per month, cost per patient)` for 16 countries.
pub const SIXTEEN_COUNTRIES: [(u32, u32, f64, f64); 16] = [
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

fn prior(monthly: f64) -> RatePrior {
    RatePrior::from_mean_cv(monthly / DAYS_PER_MONTH, 1.2).expect("valid prior")
}

/// Allocation problem with 250 patients in 720 days, cv 1.2, site cost 5000
/// and activation window [30, 210] days.
pub fn sixteen_country_problem() -> DesignProblem {
    let t_plan = 720;
    let kin = SIXTEEN_COUNTRIES
        .iter()
        .map(|r| CountryKinetics::from_prior(&prior(r.2), (30, 210), t_plan).expect("valid kinetics"))
        .collect();
    let costs = CostModel::new(
        vec![5000.0; 16],
        SIXTEEN_COUNTRIES.iter().map(|r| r.3).collect(),
        vec![0.0; 16],
    )
    .expect("valid costs");
    let bounds = AllocationBounds::new(
        SIXTEEN_COUNTRIES.iter().map(|r| r.0).collect(),
        SIXTEEN_COUNTRIES.iter().map(|r| r.1).collect(),
    )
    .expect("valid bounds");
    DesignProblem::new(kin, costs, bounds, vec![None; 16], 250, t_plan).expect("valid problem")
}

/// Plan with `countries` countries of five sites each, cycling through the
/// 16-country rates; every third country is capped at `cap` when given.
pub fn many_country_plan(countries: usize, cap: Option<u32>) -> StudyPlan {
    let plans = (0..countries)
        .map(|i| {
            let r = SIXTEEN_COUNTRIES[i % 16];
            let cap = cap.filter(|_| i % 3 == 0);
            CountryPlan::uniform(format!("c{i}"), prior(r.2), &activation_grid(30, 210, 5), cap)
        })
        .collect();
    let target = (countries as u64 * 16).max(1);
    StudyPlan::new(plans, target, 720).expect("valid plan")
}
