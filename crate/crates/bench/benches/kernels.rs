use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use enroll_bench::*;
use enroll_core::capped::{capped_mean, capped_second_moment};
use enroll_core::design::{optimize_stepwise_lp, DeConfig};
use enroll_core::forecast::{pos, PosMethod};
use enroll_core::oracle::{simulate, SimConfig};

fn pos_methods(c: &mut Criterion) {
    let mut g = c.benchmark_group("pos_at_t_plan");
    for countries in [15, 40] {
        let plan = many_country_plan(countries, Some(40));
        for (name, method) in [("normal", PosMethod::Normal), ("convolution", PosMethod::Convolution)] {
            g.bench_with_input(BenchmarkId::new(name, countries), &plan, |b, plan| {
                b.iter(|| pos(black_box(plan), plan.t_plan, method))
            });
        }
    }
    g.finish();
}

fn capped_moments(c: &mut Criterion) {
    let p = PGParams::new(300.0, 1.5, 150.0).unwrap();
    c.bench_function("capped_moments", |b| {
        b.iter(|| (capped_mean(black_box(&p), 10), capped_second_moment(black_box(&p), 10)))
    });
}

fn optimizers(c: &mut Criterion) {
    let problem = sixteen_country_problem();
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    g.bench_function("stepwise_lp_16_countries", |b| {
        b.iter(|| optimize_stepwise_lp(black_box(&problem), 0.9).unwrap())
    });
    let small = {
        let mut p = sixteen_country_problem();
        p.kinetics.truncate(5);
        p.costs.site.truncate(5);
        p.costs.patient.truncate(5);
        p.costs.country.truncate(5);
        p.bounds.low.truncate(5);
        p.bounds.high.truncate(5);
        p.caps = vec![Some(40), None, Some(30), None, None];
        p.target_n = 80;
        p
    };
    g.bench_function("de_5_countries_capped", |b| {
        let cfg = DeConfig {
            generations: 50,
            ..DeConfig::default()
        };
        b.iter(|| enroll_core::design::optimize_de(black_box(&small), 0.8, &cfg).unwrap())
    });
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let plan = many_country_plan(15, Some(40));
    let cfg = SimConfig::new(1000, 1, plan.t_plan).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("simulate_15_countries_1000_reps", |b| {
        b.iter(|| simulate(black_box(&plan), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, pos_methods, capped_moments, optimizers, monte_carlo);
criterion_main!(benches);
