//! Command implementations. Each command writes its files into the output
//! directory and returns a one-line human summary for stdout.

use std::fs;
use std::path::{Path, PathBuf};

use enroll_core::capped::time_to_cap_cdf;
use enroll_core::design::{
    optimize_de, optimize_direct, optimize_stepwise_lp, pos_capped_normal, pos_convolution, pos_unrestricted,
    AllocationResult, CostBreakdown, Criterion, DeConfig, DesignProblem, DirectOptions, LpIterate, OptimizerKind,
    PosApprox,
};
use enroll_core::forecast::{
    cap_impact_report, completion_summary, forecast_series, global_mean_var, pos, CapImpactReport, CompletionSummary,
    PosMethod,
};
use enroll_core::model::{aggregation_sup_error, appendix_country};
use enroll_core::oracle::{binomial_se, simulate, SimConfig};
use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::CliError;

type CmdResult = Result<String, CliError>;

fn out_file(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = out_file(dir, name)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
    let path = out_file(dir, name)?;
    csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

// ---------------------------------------------------------------------------
// forecast

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub day: u32,
    pub mean: f64,
    pub median: u64,
    pub lo: u64,
    pub hi: u64,
    pub pos: f64,
}

pub fn forecast(config: &StudyConfig, method: PosMethod, q: f64, out: &Path) -> CmdResult {
    let plan = config.study_plan()?;
    let series = forecast_series(&plan, q, method)?;
    let summary = completion_summary(&plan, q, method)?;
    let mut w = csv_writer(out, "forecast.csv")?;
    for i in 0..series.days.len() {
        w.serialize(ForecastRow {
            day: series.days[i],
            mean: series.mean[i],
            median: series.median[i],
            lo: series.lo[i],
            hi: series.hi[i],
            pos: series.pos_by_day[i],
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    write_json(out, "forecast_summary.json", &summary)?;
    Ok(format_summary(&summary))
}

fn format_summary(s: &CompletionSummary) -> String {
    format!(
        "completion of {} patients: mean {:.1} days, {:.0}% interval [{}, {}] days, PoS at day {} = {:.4}",
        s.target_n,
        s.mean_days,
        s.interval_level * 100.0,
        s.interval_days.0,
        s.interval_days.1,
        s.t_plan,
        s.pos_at_t_plan
    )
}

// ---------------------------------------------------------------------------
// cap-impact

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapImpactRow {
    pub country: String,
    pub cap: u32,
    pub p_cap_by_t_plan: f64,
    pub cap_time_quantile: Option<u32>,
    pub increase_cap_recommended: bool,
}

pub fn cap_impact(config: &StudyConfig, q: f64, out: &Path) -> CmdResult {
    if config.countries.iter().all(|c| c.cap.is_none()) {
        return Err(CliError::Config(crate::config::ConfigError::new(
            "countries",
            "no capped countries",
        )));
    }
    let plan = config.study_plan()?;
    let report: CapImpactReport = cap_impact_report(&plan, q, PosMethod::Convolution)?;
    let mut w = csv_writer(out, "cap_impact.csv")?;
    for c in &report.countries {
        w.serialize(CapImpactRow {
            country: c.country.clone(),
            cap: c.cap,
            p_cap_by_t_plan: c.p_cap_by_t_plan,
            cap_time_quantile: c.cap_time_quantile,
            increase_cap_recommended: c.increase_cap_recommended,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    write_json(out, "cap_impact.json", &report)?;
    let flagged: Vec<&str> = report.flagged().map(|c| c.country.as_str()).collect();
    Ok(format!(
        "PoS at day {} = {:.4}; {} of {} capped countries flagged{}",
        report.t_plan,
        report.pos_at_t_plan,
        flagged.len(),
        report.countries.len(),
        if flagged.is_empty() {
            String::new()
        } else {
            format!(": {}", flagged.join(", "))
        }
    ))
}

// ---------------------------------------------------------------------------
// optimize

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodChoice {
    Auto,
    Lp,
    Direct,
    De,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPos {
    /// Global count as one Poisson-gamma law (caps ignored).
    pub pg: f64,
    /// Normal approximation (caps ignored).
    pub normal: f64,
    /// Normal approximation with capped country moments.
    pub capped_normal: f64,
    /// Convolution of the (capped) country laws.
    pub convolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryAllocation {
    pub id: String,
    pub sites: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub requested_method: String,
    pub method: OptimizerKind,
    pub criterion: Criterion,
    pub target_pos: f64,
    pub target_n: u64,
    pub t_plan: u32,
    pub dimension: f64,
    pub allocation: Vec<CountryAllocation>,
    pub total_sites: u32,
    pub total_cost: f64,
    pub cost: CostBreakdown,
    pub pos_achieved: f64,
    pub pos: AnalyticPos,
    /// Convolution PoS with sites on the actual activation grid.
    pub pos_on_grid: f64,
    /// LP solves, candidates examined, or DE generations.
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lp_trace: Vec<LpIterate>,
}

pub struct OptimizeArgs {
    pub pos: f64,
    pub method: MethodChoice,
    pub seed: u64,
    pub dim_ceiling: f64,
}

fn run_optimizer(problem: &DesignProblem, args: &OptimizeArgs) -> Result<AllocationResult, CliError> {
    let de = |p: &DesignProblem| {
        optimize_de(
            p,
            args.pos,
            &DeConfig {
                seed: args.seed,
                ..DeConfig::default()
            },
        )
    };
    let direct = |p: &DesignProblem| {
        optimize_direct(
            p,
            args.pos,
            DirectOptions {
                criterion: None,
                dim_ceiling: args.dim_ceiling,
            },
        )
    };
    let result = match args.method {
        MethodChoice::Lp => optimize_stepwise_lp(problem, args.pos),
        MethodChoice::Direct => direct(problem),
        MethodChoice::De => de(problem),
        MethodChoice::Auto if problem.bounds.dimension() <= args.dim_ceiling => direct(problem),
        MethodChoice::Auto if problem.has_caps() => de(problem),
        MethodChoice::Auto => optimize_stepwise_lp(problem, args.pos),
    };
    Ok(result?)
}

pub fn optimize(config: &StudyConfig, args: &OptimizeArgs, out: &Path) -> CmdResult {
    let problem = config.design_problem()?;
    let r = run_optimizer(&problem, args)?;
    let a = &r.allocation;
    let (kin, n) = (&problem.kinetics, problem.target_n);
    let report = OptimizeReport {
        requested_method: format!("{:?}", args.method).to_lowercase(),
        method: r.method,
        criterion: r.criterion,
        target_pos: args.pos,
        target_n: n,
        t_plan: problem.t_plan,
        dimension: problem.bounds.dimension(),
        allocation: config
            .ids()
            .into_iter()
            .zip(a)
            .map(|(id, &sites)| CountryAllocation { id, sites })
            .collect(),
        total_sites: a.iter().sum(),
        total_cost: r.total_cost,
        cost: r.cost,
        pos_achieved: r.pos_achieved,
        pos: AnalyticPos {
            pg: pos_unrestricted(a, kin, n, PosApprox::Pg),
            normal: pos_unrestricted(a, kin, n, PosApprox::Normal),
            capped_normal: pos_capped_normal(a, kin, &problem.caps, n),
            convolution: pos_convolution(a, kin, &problem.caps, n),
        },
        pos_on_grid: r.pos_on_grid,
        iterations: r.iterations,
        lp_trace: r.lp_trace.clone(),
    };
    write_json(out, "optimize.json", &report)?;
    Ok(format!(
        "{:?}: {} sites, total cost {:.0}, PoS ({:?}) {:.4}",
        report.method, report.total_sites, report.total_cost, report.criterion, report.pos_achieved
    ))
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub day: u32,
    pub mean: f64,
    pub var: f64,
    pub q05: u64,
    pub median: u64,
    pub q95: u64,
    pub pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub day: u32,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    /// `(monte_carlo - analytic) / std_error`; empty when the error is zero.
    pub z: Option<f64>,
}

impl ComparisonRow {
    fn new(quantity: impl Into<String>, day: u32, analytic: f64, monte_carlo: f64, std_error: f64) -> Self {
        Self {
            quantity: quantity.into(),
            day,
            analytic,
            monte_carlo,
            std_error,
            z: (std_error > 0.0).then(|| (monte_carlo - analytic) / std_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub replications: u64,
    pub seed: u64,
    pub horizon: u32,
    pub t_plan: u32,
    pub target_n: u64,
    pub pos_at_t_plan: f64,
    pub pos_std_error: f64,
    pub completion_day_median: Option<u32>,
    pub max_abs_z: Option<f64>,
    pub comparison: Vec<ComparisonRow>,
}

pub fn simulate_cmd(config: &StudyConfig, reps: u64, seed: u64, horizon: Option<u32>, out: &Path) -> CmdResult {
    let plan = config.study_plan()?;
    let horizon = horizon.unwrap_or(plan.t_plan).max(plan.t_plan);
    let cfg = SimConfig::new(reps, seed, horizon)?;
    let sim = simulate(&plan, &cfg)?;

    let mut w = csv_writer(out, "simulate.csv")?;
    for day in 0..=horizon {
        let d = day as usize;
        w.serialize(SimulateRow {
            day,
            mean: sim.mean_by_day[d],
            var: sim.var_by_day[d],
            q05: sim.quantile(day, 0.05),
            median: sim.quantile(day, 0.5),
            q95: sim.quantile(day, 0.95),
            pos: sim.pos_at(day),
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;

    let t_plan = plan.t_plan;
    let mut rows = Vec::new();
    let p_an = pos(&plan, t_plan, PosMethod::Convolution);
    rows.push(ComparisonRow::new(
        "pos",
        t_plan,
        p_an,
        sim.pos_at_t_plan(),
        binomial_se(p_an, reps),
    ));
    for k in 1..=4u32 {
        let day = (t_plan * k / 4).max(1);
        let (m, v) = global_mean_var(&plan, day);
        rows.push(ComparisonRow::new(
            "mean",
            day,
            m,
            sim.mean_by_day[day as usize],
            (v / reps as f64).sqrt(),
        ));
    }
    for (i, c) in plan.countries.iter().enumerate() {
        if c.cap.is_none() {
            continue;
        }
        let an = time_to_cap_cdf(c, t_plan)?;
        rows.push(ComparisonRow::new(
            format!("cap_hit:{}", c.id),
            t_plan,
            an,
            sim.cap_hit_by(i, t_plan),
            binomial_se(an, reps),
        ));
    }
    let mut w = csv_writer(out, "comparison.csv")?;
    for r in &rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;

    let max_abs_z = rows.iter().filter_map(|r| r.z.map(f64::abs)).reduce(f64::max);
    let report = SimulateReport {
        replications: reps,
        seed,
        horizon,
        t_plan,
        target_n: plan.target_n,
        pos_at_t_plan: sim.pos_at_t_plan(),
        pos_std_error: sim.pos_se(),
        completion_day_median: sim.completion_quantile(0.5),
        max_abs_z,
        comparison: rows,
    };
    write_json(out, "simulate.json", &report)?;
    Ok(format!(
        "{reps} replications: MC PoS at day {t_plan} = {:.4} (analytic {:.4}); max |z| = {}",
        report.pos_at_t_plan,
        p_an,
        max_abs_z.map_or("n/a".into(), |z| format!("{z:.2}"))
    ))
}

// ---------------------------------------------------------------------------
// appendix-check

/// Published `(K, Dif(K))` pairs for the site-aggregation example.
pub const PUBLISHED_DIF: [(usize, f64); 7] = [
    (2, 0.0019),
    (3, 0.0017),
    (5, 0.0011),
    (8, 0.00075),
    (10, 0.00059),
    (15, 0.00039),
    (20, 0.00029),
];
pub const DIF_TOLERANCE: f64 = 2e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixRow {
    pub k: usize,
    pub dif: f64,
    pub published: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub alpha: f64,
    pub beta: f64,
    pub day: u32,
    pub max_count: usize,
    pub tolerance: f64,
    pub rows: Vec<AppendixRow>,
    pub strictly_decreasing: bool,
    pub all_pass: bool,
}

pub fn appendix_check(out: &Path) -> CmdResult {
    let rows: Vec<AppendixRow> = PUBLISHED_DIF
        .iter()
        .map(|&(k, published)| {
            let dif = aggregation_sup_error(&appendix_country(k), 300, 50);
            let abs_diff = (dif - published).abs();
            AppendixRow {
                k,
                dif,
                published,
                abs_diff,
                pass: abs_diff <= DIF_TOLERANCE,
            }
        })
        .collect();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].dif < w[0].dif);
    let report = AppendixReport {
        alpha: 1.5,
        beta: 150.0,
        day: 300,
        max_count: 50,
        tolerance: DIF_TOLERANCE,
        all_pass: strictly_decreasing && rows.iter().all(|r| r.pass),
        strictly_decreasing,
        rows,
    };
    let mut w = csv_writer(out, "appendix.csv")?;
    for r in &report.rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    write_json(out, "appendix.json", &report)?;
    let mut text = String::from("   K        Dif  published  pass\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{:4} {:10.6} {:10.5}  {}\n",
            r.k,
            r.dif,
            r.published,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    text.push_str(&format!(
        "strictly decreasing: {}",
        if report.strictly_decreasing { "yes" } else { "no" }
    ));
    Ok(text)
}
