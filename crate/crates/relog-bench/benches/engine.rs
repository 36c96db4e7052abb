use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use relog_bench::bench_catalog;
use relog_core::cost::{CostParams, EstimateOptions};
use relog_core::eval::{evaluate, DfStrategy, EvalConfig};
use relog_core::optimizer::{optimize, OptimizeMode};
use relog_core::parser::{parse, render};

fn df_strategies(c: &mut Criterion) {
    let mut group = c.benchmark_group("directly_follows");
    for events_per_case in [5usize, 10, 20] {
        let catalog = bench_catalog(50, events_per_case);
        let expr = parse("df(case, end_time, Log)").unwrap();
        for (name, strategy) in [
            ("native", DfStrategy::Native),
            ("composite", DfStrategy::Composite),
        ] {
            group.bench_with_input(
                BenchmarkId::new(name, events_per_case),
                &events_per_case,
                |b, _| {
                    let config = EvalConfig {
                        df_strategy: strategy,
                        collect_metrics: false,
                    };
                    b.iter(|| evaluate(black_box(&expr), &catalog, config).unwrap());
                },
            );
        }
    }
    group.finish();
}

fn parser_roundtrip(c: &mut Criterion) {
    let query = "project(u.resource, select(u.amount != d.amount, df(case, end_time, Log)))";
    c.bench_function("parse", |b| b.iter(|| parse(black_box(query)).unwrap()));
    let expr = parse(query).unwrap();
    c.bench_function("render", |b| b.iter(|| render(black_box(&expr))));
}

fn optimizer(c: &mut Criterion) {
    let catalog = bench_catalog(100, 10);
    let expr = parse("select(d.amount = 5 & u.amount = 5, df(case, end_time, Log))").unwrap();
    let params = CostParams::new(1_000, 100, 50, 200).unwrap();
    let opts = EstimateOptions {
        df_pricing: DfStrategy::Composite,
        measure_selectivity: false,
    };
    c.bench_function("optimize_heuristic", |b| {
        b.iter(|| {
            optimize(
                black_box(&expr),
                &catalog,
                &params,
                &opts,
                OptimizeMode::Heuristic,
                5_000,
            )
            .unwrap()
        })
    });
    c.bench_function("optimize_exhaustive", |b| {
        b.iter(|| {
            optimize(
                black_box(&expr),
                &catalog,
                &params,
                &opts,
                OptimizeMode::Exhaustive,
                2_000,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, df_strategies, parser_roundtrip, optimizer);
criterion_main!(benches);
