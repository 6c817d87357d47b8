//! Acceptance suite: one test per acceptance criterion. Every test prints a
//! `CRITERION n: PASS|FAIL` line with the individual checks before asserting.

use std::time::{Duration, Instant};

use enroll_core::capped::{capped_mean, capped_second_moment, time_to_cap_cdf};
use enroll_core::design::{
    optimize_de, optimize_direct, optimize_stepwise_lp, AllocationBounds, CostModel, CountryKinetics, Criterion,
    DeConfig, DesignProblem, DirectOptions,
};
use enroll_core::forecast::{first_day_reaching, global_dist, global_mean_var, pos, PosMethod};
use enroll_core::model::{activation_grid, aggregation_sup_error, appendix_country};
use enroll_core::oracle::{binomial_se, brute_capped_moments, simulate, SimConfig};
use enroll_core::{CountryPlan, PGParams, RatePrior, StudyPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    criterion: u32,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(criterion: u32) -> Self {
        Self {
            criterion,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push((what.into(), ok));
    }

    fn finish(self, elapsed: Duration, budget: Duration) {
        let mut ok = self.checks.iter().all(|c| c.1);
        let in_time = elapsed <= budget;
        ok &= in_time;
        for (what, pass) in &self.checks {
            if !pass {
                println!("  FAIL {what}");
            }
        }
        println!(
            "CRITERION {}: {} ({} checks, {} failed, {:.2?} of {:?} budget)",
            self.criterion,
            if ok { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.checks.iter().filter(|c| !c.1).count(),
            elapsed,
            budget
        );
        assert!(in_time, "criterion {} exceeded its runtime budget", self.criterion);
        assert!(ok, "criterion {} failed", self.criterion);
    }
}

fn country(id: &str, mean_per_day: f64, cv: f64, days: &[u32], cap: Option<u32>) -> CountryPlan {
    CountryPlan::uniform(id, RatePrior::from_mean_cv(mean_per_day, cv).unwrap(), days, cap)
}

fn grid_country(id: &str, mean_per_day: f64, cv: f64, window: (u32, u32), n: usize, cap: Option<u32>) -> CountryPlan {
    country(id, mean_per_day, cv, &activation_grid(window.0, window.1, n), cap)
}

// ---------------------------------------------------------------------------
// Criterion 1: Appendix A.1 aggregation error table.

#[test]
fn criterion_1_appendix_dif_table() {
    let start = Instant::now();
    let mut r = Report::new(1);
    let published = [
        (2, 0.0019),
        (3, 0.0017),
        (5, 0.0011),
        (8, 0.00075),
        (10, 0.00059),
        (15, 0.00039),
        (20, 0.00029),
    ];
    let mut prev = f64::INFINITY;
    for (k, want) in published {
        let dif = aggregation_sup_error(&appendix_country(k), 300, 50);
        println!("  K={k:2}: Dif = {dif:.6} (published {want})");
        r.check(
            (dif - want).abs() <= 2e-4,
            format!("K={k}: Dif {dif:.6} vs {want} (tolerance 2e-4)"),
        );
        r.check(dif < prev, format!("K={k}: Dif not strictly below the previous K"));
        prev = dif;
    }
    r.finish(start.elapsed(), Duration::from_secs(5));
}

// ---------------------------------------------------------------------------
// Criterion 2: capped-moment closed forms against direct summation.

#[test]
fn criterion_2_capped_moment_closed_forms() {
    let start = Instant::now();
    let mut r = Report::new(2);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 || (a - b).abs() <= 1e-10 * b.abs();
    for alpha in [0.3, 1.0, 1.5, 4.0] {
        for beta in [10.0, 150.0] {
            for t in [1.0, 30.0, 300.0] {
                for cap in [0u32, 1, 2, 3, 10, 50] {
                    let p = PGParams::new(t, alpha, beta).unwrap();
                    let (m1, m2) = brute_capped_moments(&p, cap);
                    let (c1, c2) = (capped_mean(&p, cap), capped_second_moment(&p, cap));
                    r.check(
                        close(c1, m1),
                        format!("mean a={alpha} b={beta} t={t} L={cap}: {c1} vs {m1}"),
                    );
                    r.check(
                        close(c2, m2),
                        format!("second a={alpha} b={beta} t={t} L={cap}: {c2} vs {m2}"),
                    );
                }
            }
        }
    }
    r.finish(start.elapsed(), Duration::from_secs(10));
}

// ---------------------------------------------------------------------------
// Criterion 3: Monte Carlo cross-validation on a 5-plan regression suite.

fn regression_suite() -> Vec<(&'static str, StudyPlan)> {
    let table1_rates = [
        0.42, 0.43, 0.22, 0.55, 0.3, 0.57, 0.21, 0.25, 0.16, 0.19, 0.18, 0.62, 0.45, 0.23, 0.3, 0.39,
    ];
    let table1_alloc = [0, 0, 5, 4, 6, 3, 5, 1, 5, 0, 2, 2, 4, 5, 0, 2];
    let sixteen = table1_rates
        .iter()
        .zip(table1_alloc)
        .enumerate()
        .map(|(i, (&rate, n))| grid_country(&format!("c{}", i + 1), rate / 30.0, 1.2, (30, 210), n, None))
        .collect();
    vec![
        (
            "three capped countries",
            StudyPlan::new(
                vec![
                    grid_country("A", 0.02, 0.6, (0, 60), 6, Some(20)),
                    grid_country("B", 0.03, 0.5, (10, 90), 5, Some(25)),
                    grid_country("C", 0.015, 0.7, (20, 100), 8, Some(18)),
                ],
                50,
                240,
            )
            .unwrap(),
        ),
        ("sixteen uncapped countries", StudyPlan::new(sixteen, 180, 720).unwrap()),
        (
            "one uncapped country",
            StudyPlan::new(vec![grid_country("A", 0.01, 0.8, (0, 120), 12, None)], 30, 300).unwrap(),
        ),
        (
            "five countries, mixed caps",
            StudyPlan::new(
                vec![
                    grid_country("A", 0.02, 0.6, (0, 80), 6, Some(25)),
                    grid_country("B", 0.025, 0.5, (10, 90), 6, None),
                    grid_country("C", 0.015, 0.7, (0, 120), 8, Some(20)),
                    grid_country("D", 0.01, 0.5, (30, 150), 10, None),
                    grid_country("E", 0.03, 0.6, (0, 60), 4, Some(15)),
                ],
                110,
                300,
            )
            .unwrap(),
        ),
        (
            "binding caps",
            StudyPlan::new(
                vec![
                    grid_country("A", 0.03, 0.5, (0, 40), 8, Some(30)),
                    grid_country("B", 0.02, 0.6, (0, 60), 10, Some(35)),
                ],
                60,
                200,
            )
            .unwrap(),
        ),
    ]
}

#[test]
fn criterion_3_monte_carlo_cross_validation() {
    let start = Instant::now();
    let mut r = Report::new(3);
    let reps = 100_000;
    for (pi, (name, plan)) in regression_suite().into_iter().enumerate() {
        // Analytic time-to-cap 0.9-quantiles fix the simulation horizon.
        let cap_q: Vec<(usize, u32)> = plan
            .countries
            .iter()
            .enumerate()
            .filter(|(_, c)| c.cap.is_some())
            .map(|(i, c)| {
                (
                    i,
                    first_day_reaching(|t| time_to_cap_cdf(c, t).unwrap(), 0.9, 1 << 20).unwrap(),
                )
            })
            .collect();
        let horizon = cap_q.iter().map(|x| x.1).max().unwrap_or(0).max(plan.t_plan) + 1;
        let sim = simulate(&plan, &SimConfig::new(reps, 1000 + pi as u64, horizon).unwrap()).unwrap();
        let n = sim.replications();

        let analytic = pos(&plan, plan.t_plan, PosMethod::Convolution);
        let mc = sim.pos_at_t_plan();
        let se = binomial_se(mc, n);
        let z = (analytic - mc) / se;
        println!("  [{name}] PoS analytic {analytic:.4} MC {mc:.4} z={z:.2}");
        r.check(z.abs() < 3.0, format!("[{name}] PoS z = {z:.2}"));

        for k in 1..=8u32 {
            let day = plan.t_plan * k / 8;
            let mean = global_mean_var(&plan, day).0;
            let se = sim.mean_se(day);
            let z = if se > 0.0 {
                (mean - sim.mean_by_day[day as usize]) / se
            } else {
                0.0
            };
            r.check(z.abs() < 3.0, format!("[{name}] mean at day {day}: z = {z:.2}"));

            // A quantile agrees when the MC cdf brackets the level at it.
            let dist = global_dist(&plan, day);
            for q in [0.05, 0.95] {
                let qa = dist.quantile(q) as i64;
                let tol = 3.0 * binomial_se(q, n);
                let above = sim.cdf(day, qa) >= q - tol;
                let below = sim.cdf(day, qa - 1) <= q + tol;
                r.check(above && below, format!("[{name}] {q}-quantile {qa} at day {day}"));
            }
        }

        for (i, day) in cap_q {
            let tol = 3.0 * binomial_se(0.9, n);
            let mc_at = sim.cap_hit_by(i, day);
            let mc_before = sim.cap_hit_by(i, day - 1);
            let mcq = sim.cap_hit_quantile(i, 0.9);
            println!("  [{name}] country {i}: time-to-cap 0.9-quantile analytic {day}, MC {mcq:?}");
            r.check(
                mc_at >= 0.9 - tol && mc_before <= 0.9 + tol,
                format!("[{name}] country {i} cap quantile {day}: MC cdf {mc_before:.4}..{mc_at:.4}"),
            );
        }
    }
    r.finish(start.elapsed(), Duration::from_secs(300));
}

// ---------------------------------------------------------------------------
// Criterion 4: Table 1.

const TABLE1: [(u32, u32, f64, f64); 16] = [
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

const TABLE1_ALLOC: [[u32; 16]; 5] = [
    [0, 0, 2, 3, 6, 1, 5, 1, 5, 1, 2, 2, 4, 5, 1, 2],
    [0, 0, 4, 4, 6, 1, 5, 1, 5, 1, 2, 2, 4, 5, 1, 2],
    [0, 0, 5, 4, 6, 2, 5, 1, 5, 0, 2, 2, 4, 5, 1, 2],
    [0, 0, 5, 4, 6, 4, 5, 1, 5, 0, 2, 2, 4, 5, 1, 2],
    [0, 1, 5, 4, 6, 6, 5, 1, 5, 0, 2, 2, 4, 5, 1, 2],
];

fn table1_problem() -> DesignProblem {
    let t_plan = 720;
    let kin = TABLE1
        .iter()
        .map(|row| {
            let prior = RatePrior::from_mean_cv(row.2 / 30.0, 1.2).unwrap();
            CountryKinetics::from_prior(&prior, (30, 210), t_plan).unwrap()
        })
        .collect();
    let costs = CostModel::new(vec![5000.0; 16], TABLE1.iter().map(|r| r.3).collect(), vec![0.0; 16]).unwrap();
    let bounds = AllocationBounds::new(
        TABLE1.iter().map(|r| r.0).collect(),
        TABLE1.iter().map(|r| r.1).collect(),
    )
    .unwrap();
    DesignProblem::new(kin, costs, bounds, vec![None; 16], 250, t_plan).unwrap()
}

#[test]
fn criterion_4_table1_optimization() {
    let start = Instant::now();
    let mut r = Report::new(4);
    let problem = table1_problem();
    let levels = [0.5, 0.6, 0.7, 0.8, 0.9];
    let costs = [3_643_470.0, 3_902_851.0, 4_135_948.0, 4_415_110.0, 4_879_621.0];
    let totals = [40u32, 43, 45, 46, 49];
    for (j, &p) in levels.iter().enumerate() {
        let res = optimize_stepwise_lp(&problem, p).unwrap();
        let sites: u32 = res.allocation.iter().sum();
        let rel = (res.total_cost - costs[j]) / costs[j];
        let max_dev = res
            .allocation
            .iter()
            .zip(&TABLE1_ALLOC[j])
            .map(|(a, b)| (*a as i64 - *b as i64).abs())
            .max()
            .unwrap();
        let pg = problem.pos(&res.allocation, Criterion::Pg);
        println!(
            "  P={p}: sites {sites} (published {}), cost {:.0} ({:+.2}%), max per-country deviation {max_dev}, \
             pg PoS {pg:.4}, grid PoS {:.4}, {} LP steps, allocation {:?}",
            totals[j],
            res.total_cost,
            100.0 * rel,
            res.pos_on_grid,
            res.iterations,
            res.allocation
        );
        r.check(
            (sites as i64 - totals[j] as i64).abs() <= 2,
            format!("P={p}: {sites} sites"),
        );
        r.check(max_dev <= 1, format!("P={p}: per-country deviation {max_dev}"));
        r.check(rel.abs() <= 0.03, format!("P={p}: cost off by {:.2}%", 100.0 * rel));
        r.check(pg >= p - 0.01, format!("P={p}: pg PoS {pg:.4}"));
    }
    r.finish(start.elapsed(), Duration::from_secs(120));
}

// ---------------------------------------------------------------------------
// Criterion 5: optimizer cross-agreement.

fn random_problem(rng: &mut ChaCha8Rng, capped: bool) -> (DesignProblem, f64) {
    loop {
        let s = rng.random_range(2..=5usize);
        // Use the dimension budget: as many options per country as Dim <= 1e5 allows.
        let options = (1e5f64.powf(1.0 / s as f64).floor() as u32).min(40);
        let t_plan = 360;
        let mut low = Vec::new();
        let mut high = Vec::new();
        let mut kin = Vec::new();
        for _ in 0..s {
            let l = rng.random_range(0..=2u32);
            low.push(l);
            high.push(l + options - 1);
            let prior = RatePrior::from_mean_cv(rng.random_range(0.01..0.08), rng.random_range(0.4..1.3)).unwrap();
            let a = rng.random_range(0..60u32);
            let b = a + rng.random_range(0..150u32);
            kin.push(CountryKinetics::from_prior(&prior, (a, b), t_plan).unwrap());
        }
        let bounds = AllocationBounds::new(low, high).unwrap();
        if bounds.dimension() > 1e5 {
            continue;
        }
        let costs = CostModel::new(
            (0..s).map(|_| rng.random_range(2000.0..8000.0)).collect(),
            (0..s).map(|_| rng.random_range(500.0..3000.0)).collect(),
            (0..s)
                .map(|_| if capped { rng.random_range(0.0..20000.0) } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let e_max: f64 = kin.iter().zip(&bounds.high).map(|(k, &h)| k.moments(h).mean).sum();
        let caps: Vec<Option<u32>> = kin
            .iter()
            .zip(&bounds.high)
            .map(|(k, &h)| capped.then(|| (k.moments(h).mean * rng.random_range(0.4..1.0)).round() as u32))
            .collect();
        let n = (e_max * rng.random_range(0.35..0.6)).round().max(1.0) as u64;
        let p = [0.6, 0.7, 0.8, 0.9][rng.random_range(0..4)];
        let problem = DesignProblem::new(kin, costs, bounds, caps, n, t_plan).unwrap();
        let crit = if capped {
            Criterion::CappedNormal
        } else {
            Criterion::Normal
        };
        if problem.pos(&problem.bounds.high, crit) >= p {
            return (problem, p);
        }
    }
}

#[test]
fn criterion_5_optimizer_cross_agreement() {
    let start = Instant::now();
    let mut r = Report::new(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Direct search uses the same normal criterion as the stepwise LP, so the
    // two optimize the same feasible set.
    let normal = DirectOptions {
        criterion: Some(Criterion::Normal),
        ..DirectOptions::default()
    };
    for i in 0..10 {
        let (problem, p) = random_problem(&mut rng, false);
        let direct = optimize_direct(&problem, p, normal).unwrap();
        let lp = optimize_stepwise_lp(&problem, p).unwrap();
        let gap = (lp.total_cost - direct.total_cost) / direct.total_cost;
        println!(
            "  uncapped #{i}: S={} dim={} P={p} direct {:.0} LP {:.0} (+{:.2}%)",
            problem.countries(),
            problem.bounds.dimension(),
            direct.total_cost,
            lp.total_cost,
            100.0 * gap
        );
        r.check(
            direct.total_cost <= lp.total_cost + 1e-6,
            format!("uncapped #{i}: direct above LP"),
        );
        r.check(
            gap <= 0.05,
            format!("uncapped #{i}: LP {:.2}% above direct", 100.0 * gap),
        );
    }
    for i in 0..5 {
        let (problem, p) = random_problem(&mut rng, true);
        let direct = optimize_direct(&problem, p, DirectOptions::default()).unwrap();
        let de = optimize_de(&problem, p, &DeConfig::default()).unwrap();
        println!(
            "  capped #{i}: S={} dim={} P={p} direct {:.0} {:?} DE {:.0} {:?}",
            problem.countries(),
            problem.bounds.dimension(),
            direct.total_cost,
            direct.allocation,
            de.total_cost,
            de.allocation
        );
        r.check(
            de.total_cost == direct.total_cost,
            format!("capped #{i}: DE differs from direct"),
        );
    }
    r.finish(start.elapsed(), Duration::from_secs(300));
}

// ---------------------------------------------------------------------------
// Criterion 6: cap monotonicity.

/// Absolute PoS tolerance: the tail mass dropped when truncating uncapped laws.
const TAIL_TOL: f64 = 1e-9;

#[test]
fn criterion_6_cap_monotonicity() {
    let start = Instant::now();
    let mut r = Report::new(6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..20 {
        let s = rng.random_range(2..=5usize);
        let countries: Vec<CountryPlan> = (0..s)
            .map(|c| {
                let n = rng.random_range(1..=6usize);
                let a = rng.random_range(0..60u32);
                let cap = rng.random_range(0..=25u32);
                grid_country(
                    &format!("c{c}"),
                    rng.random_range(0.01..0.06),
                    rng.random_range(0.3..1.5),
                    (a, a + rng.random_range(0..90u32)),
                    n,
                    Some(cap),
                )
            })
            .collect();
        let n = rng.random_range(10..60u64);
        let plan = StudyPlan::new(countries, n, 240).unwrap();
        let days: Vec<u32> = (0..=24).map(|k| k * 15).collect();
        let base: Vec<f64> = days.iter().map(|&t| pos(&plan, t, PosMethod::Convolution)).collect();
        for c in 0..s {
            let mut raised = plan.clone();
            raised.countries[c].cap = raised.countries[c].cap.map(|l| l + 1 + rng.random_range(0..5u32));
            let worse = days
                .iter()
                .zip(&base)
                .find(|(&t, &b)| pos(&raised, t, PosMethod::Convolution) < b - TAIL_TOL);
            r.check(
                worse.is_none(),
                format!("plan {i}: raising cap of country {c} lowered PoS at {worse:?}"),
            );
        }
        let free = plan.uncapped();
        let worse = days
            .iter()
            .zip(&base)
            .find(|(&t, &b)| pos(&free, t, PosMethod::Convolution) < b - TAIL_TOL);
        r.check(
            worse.is_none(),
            format!("plan {i}: uncapped PoS below capped at {worse:?}"),
        );

        // The mean curve rises toward the sum of the caps; with heavy-tailed
        // rate priors the approach is slow, so check the trend on a long grid.
        let total_cap = plan.countries.iter().map(|c| c.cap.unwrap()).sum::<u32>() as f64;
        let means: Vec<f64> = [1e3, 1e4, 1e5, 1e6, 1e7]
            .iter()
            .map(|&t| global_mean_var(&plan, t as u32).0)
            .collect();
        let rising = means.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        let bounded = means.iter().all(|&m| m <= total_cap + 1e-9);
        let (first_gap, last_gap) = (total_cap - means[0], total_cap - means[4]);
        r.check(
            rising && bounded && (last_gap < first_gap || last_gap < 1e-9) && last_gap < 0.05 * total_cap.max(1.0),
            format!("plan {i}: mean {means:?} does not plateau at the cap total {total_cap}"),
        );
    }
    // Lemma 2 on single-country fixtures: E[min(N, L)] -> L.
    for (alpha, beta, sites, cap) in [(4.0, 100.0, 3usize, 8u32), (2.0, 50.0, 5, 20), (6.0, 300.0, 2, 5)] {
        let prior = RatePrior::new(alpha, beta).unwrap();
        let c = CountryPlan::uniform("A", prior, &activation_grid(0, 200, sites), Some(cap));
        let plan = StudyPlan::new(vec![c], 1, 100).unwrap();
        let m = global_mean_var(&plan, 10_000).0;
        println!("  Lemma 2 fixture (a={alpha}, b={beta}, {sites} sites, L={cap}): E at 1e4 = {m:.9}");
        r.check(
            (m - cap as f64).abs() < 1e-6,
            format!("Lemma 2 fixture L={cap}: mean {m}"),
        );
    }
    r.finish(start.elapsed(), Duration::from_secs(60));
}

// ---------------------------------------------------------------------------
// Criterion 7: normal approximation vs convolution.

fn many_country_plan(countries: usize, seed: u64) -> StudyPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cs: Vec<CountryPlan> = (0..countries)
        .map(|c| {
            let a = rng.random_range(0..90u32);
            grid_country(
                &format!("c{c}"),
                rng.random_range(0.005..0.02),
                rng.random_range(0.5..1.2),
                (a, a + rng.random_range(30..180u32)),
                rng.random_range(2..=8usize),
                None,
            )
        })
        .collect();
    let t_plan = 540;
    let probe = StudyPlan::new(cs.clone(), 1, t_plan).unwrap();
    let mean = global_mean_var(&probe, t_plan).0;
    StudyPlan::new(cs, (mean * 0.95).round() as u64, t_plan).unwrap()
}

fn time_per_eval(plan: &StudyPlan, method: PosMethod) -> Duration {
    let reps = match method {
        PosMethod::Normal => 2000,
        PosMethod::Convolution => 50,
    };
    let start = Instant::now();
    let mut acc = 0.0;
    for _ in 0..reps {
        acc += pos(std::hint::black_box(plan), plan.t_plan, method);
    }
    std::hint::black_box(acc);
    start.elapsed() / reps
}

#[test]
fn criterion_7_normal_vs_convolution() {
    let start = Instant::now();
    let mut r = Report::new(7);
    for (countries, seed) in [(15usize, 15u64), (40, 40)] {
        let plan = many_country_plan(countries, seed);
        let normal = pos(&plan, plan.t_plan, PosMethod::Normal);
        let conv = pos(&plan, plan.t_plan, PosMethod::Convolution);
        let tn = time_per_eval(&plan, PosMethod::Normal);
        let tc = time_per_eval(&plan, PosMethod::Convolution);
        let speedup = tc.as_secs_f64() / tn.as_secs_f64();
        println!(
            "  {countries} countries, n={}: PoS normal {normal:.4} convolution {conv:.4}; {tn:.2?} vs {tc:.2?} per eval ({speedup:.0}x)",
            plan.target_n
        );
        r.check(
            (normal - conv).abs() <= 0.02,
            format!("{countries} countries: |dPoS| = {:.4}", (normal - conv).abs()),
        );
        r.check(speedup >= 10.0, format!("{countries} countries: speedup {speedup:.1}x"));
    }
    r.finish(start.elapsed(), Duration::from_secs(60));
}

// ---------------------------------------------------------------------------
// Criterion 8: stepwise-LP convergence.

#[test]
fn criterion_8_stepwise_convergence() {
    let start = Instant::now();
    let mut r = Report::new(8);
    for (rate, cv, n, p) in [(0.05, 1.0, 100u64, 0.8), (0.02, 1.5, 60, 0.9), (0.1, 0.5, 300, 0.95)] {
        let prior = RatePrior::from_mean_cv(rate, cv).unwrap();
        let k = CountryKinetics::from_prior(&prior, (20, 140), 360).unwrap();
        let upper = 1000u32;
        let problem = DesignProblem::new(
            vec![k],
            CostModel::new(vec![4000.0], vec![1000.0], vec![0.0]).unwrap(),
            AllocationBounds::new(vec![0], vec![upper]).unwrap(),
            vec![None],
            n,
            360,
        )
        .unwrap();
        let res = optimize_stepwise_lp(&problem, p).unwrap();
        let xs: Vec<f64> = res.lp_trace.iter().map(|s| s.allocation[0]).collect();
        // x_{k+1} = n / (mR) + z sqrt(x_k (mR + s2 V)) / (mR), x_0 = 0.
        let z = enroll_core::norm_ppf(p);
        let (e, g) = (k.patients_per_site(), k.rate_mean * k.r + k.rate_var * k.v);
        let mut x = 0.0f64;
        let mut follows = true;
        for &xi in &xs {
            let next = (n as f64 + z * (x * g).sqrt()) / e;
            follows &= (xi - next).abs() < 1e-7 * next.max(1.0);
            x = next;
        }
        let increasing = xs.windows(2).all(|w| w[1] > w[0]);
        let bounded = xs.iter().all(|&x| x <= upper as f64);
        println!("  1-D rate={rate} cv={cv} n={n} P={p}: iterates {xs:.3?}");
        r.check(follows, format!("1-D n={n}: iterates deviate from the recurrence"));
        r.check(
            increasing && bounded,
            format!("1-D n={n}: iterates not monotone and bounded"),
        );
    }
    let problem = table1_problem();
    for p in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let res = optimize_stepwise_lp(&problem, p).unwrap();
        println!("  Table 1 P={p}: {} LP steps", res.iterations);
        r.check(res.iterations <= 15, format!("Table 1 P={p}: {} steps", res.iterations));
    }
    r.finish(start.elapsed(), Duration::from_secs(60));
}
