//! Acceptance suite: one test per criterion, each printing a pass line.
//! Run with `cargo test -p relog-core --test acceptance -- --nocapture`
//! to see the lines.

use std::time::Instant;

use num::rational::Ratio;
use num::{One, Signed};
use rand::rngs::StdRng;
use rand::SeedableRng;

use relog_core::algebra::{expand_df, AlgebraExpr};
use relog_core::catalog::{load_csv, Catalog, LoadOptions};
use relog_core::cost::{
    blocks, composite_df_cost, detect_jumps, estimate_plan, order_of_cost, result1_threshold,
    result2_threshold, strategy_costs, sweep, table5_order, Blocks, CostParams, EstimateOptions,
    ExecutionSequence, Residency, Strategy, SweepAxis,
};
use relog_core::eval::{
    evaluate, evaluate_df_composite, evaluate_df_native, DfStrategy, EvalConfig,
};
use relog_core::optimizer::{
    optimize, verify_rule_on_instance, OptimizeMode, RewriteDirection, RuleId,
};
use relog_core::parser::{parse, render};
use relog_core::relation::{relation_equal, AttrName, Value};
use relog_core::testkit::{
    brute_force_df, generate_log, instance_for, projection_minus_instance, random_expr,
    table1_expected_df, AttrSpec, EventsPerCase, LogSpec,
};
use relog_core::{evaluate as eval_expr, AttrClass};

fn pass(n: u32, what: &str) {
    println!("criterion {n:02} ({what}): PASS");
}

fn table1_catalog() -> Catalog {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/table1.csv");
    let loaded = load_csv(path, &LoadOptions::default()).unwrap();
    let mut catalog = Catalog::new();
    catalog.insert("Log", loaded.relation, loaded.meta);
    catalog
}

#[test]
fn criterion_01_sample_log_df_is_exact() {
    let start = Instant::now();
    let catalog = table1_catalog();
    let expected = table1_expected_df();
    let expr = parse("df(case, end_time, Log)").unwrap();
    for strategy in [DfStrategy::Native, DfStrategy::Composite] {
        let out = evaluate(
            &expr,
            &catalog,
            EvalConfig {
                df_strategy: strategy,
                collect_metrics: false,
            },
        )
        .unwrap();
        assert_eq!(out.len(), 12, "{strategy:?}");
        assert!(relation_equal(&out, &expected), "{strategy:?}");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "exceeded 1 s");
    pass(1, "12 directly-follows pairs from the 18-row sample log");
}

#[test]
fn criterion_02_oracle_equivalence_over_1000_logs() {
    let start = Instant::now();
    let case = AttrName::new("case");
    let end_time = AttrName::new("end_time");
    for seed in 0..1000u64 {
        let spec = LogSpec::new(
            (seed % 8 + 1) as usize,
            EventsPerCase::Range(1, 12),
            seed,
        )
        .with_duplicate_rate(0.1)
        .with_attribute(AttrSpec::new(
            "amount",
            AttrClass::Case,
            vec![Value::Integer(1), Value::Integer(5)],
        ));
        let (log, _) = generate_log(&spec);
        let oracle = brute_force_df(&log, &case, &end_time);
        let native = evaluate_df_native(&log, &case, &end_time).unwrap();
        let composite = evaluate_df_composite(&log, &case, &end_time).unwrap();
        assert!(relation_equal(&oracle, &native), "seed {seed}: native");
        assert!(
            relation_equal(&oracle, &composite),
            "seed {seed}: composite"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "exceeded 60 s: {elapsed:.1}");
    pass(2, "brute force = native = composite on 1000 seeded logs");
}

#[test]
fn criterion_03_rule_soundness_200_instances_each() {
    for rule in RuleId::ALL {
        for seed in 0..200u64 {
            let instance = instance_for(rule, seed);
            let equal = verify_rule_on_instance(
                instance.rule,
                instance.direction,
                &instance.expr,
                &instance.path,
                &instance.catalog,
            )
            .unwrap_or_else(|e| panic!("{rule} seed {seed}: {e}"));
            assert!(equal, "{rule} seed {seed}: both sides differ");
        }
    }
    // restricted projection/set-minus property on subset/key instances
    for seed in 0..200u64 {
        let (r, s, key) = projection_minus_instance(seed);
        let mut catalog = Catalog::new();
        catalog.insert("R", r, Default::default());
        catalog.insert("S", s, Default::default());
        let lhs = AlgebraExpr::project(
            key.clone(),
            AlgebraExpr::minus(AlgebraExpr::base("R"), AlgebraExpr::base("S")),
        );
        let rhs = AlgebraExpr::minus(
            AlgebraExpr::project(key.clone(), AlgebraExpr::base("R")),
            AlgebraExpr::project(key, AlgebraExpr::base("S")),
        );
        let a = eval_expr(&lhs, &catalog, EvalConfig::default()).unwrap();
        let b = eval_expr(&rhs, &catalog, EvalConfig::default()).unwrap();
        assert!(relation_equal(&a, &b), "seed {seed}");
    }
    pass(3, "200 verified instances per rewrite rule, plus the projection/minus property");
}

#[test]
fn criterion_04_selection_pushdown_needs_the_class_condition() {
    // outer events share a resource, the middle one differs: pushing the
    // selection through directly-follows changes the result
    let csv = "case,end_time,resource\n1,00:01,X\n1,00:02,Y\n1,00:03,X\n";
    let options = LoadOptions {
        case_attr: Some(AttrName::new("case")),
        time_attr: Some(AttrName::new("end_time")),
        ..LoadOptions::default()
    };
    let loaded = relog_core::catalog::load_csv_str(csv, "log.csv", &options).unwrap();
    let mut catalog = Catalog::new();
    catalog.insert("Log", loaded.relation, loaded.meta);
    let expr = parse("df(case, end_time, select(resource = 'X', Log))").unwrap();
    assert_eq!(
        verify_rule_on_instance(RuleId::P17, RewriteDirection::Forward, &expr, &[], &catalog),
        Ok(false)
    );
    pass(4, "a resource-style attribute falsifies the selection pushdown");
}

fn worked_example_params() -> CostParams {
    CostParams::new(10_000, 500, 50, 200)
        .unwrap()
        .with_selectivity(Ratio::new(1, 10))
}

#[test]
fn criterion_05_cost_orders_are_exact() {
    let p = worked_example_params();
    assert_eq!(
        table5_order(ExecutionSequence::SelectFirst, Residency::InMemory, &p),
        blocks(20)
    );
    assert_eq!(
        table5_order(ExecutionSequence::SelectLast, Residency::OnDisk, &p),
        blocks(80_000)
    );
    // M = N/F = 200
    assert_eq!(order_of_cost(&p), blocks(80_000));
    pass(5, "order formulas give 20 and 8e4 exactly");
}

fn worked_example_catalog() -> Catalog {
    let spec = LogSpec::new(500, EventsPerCase::Fixed(20), 424_242).with_attribute(
        AttrSpec::new(
            "amount",
            AttrClass::Case,
            vec![Value::Integer(1), Value::Integer(5), Value::Integer(7)],
        ),
    );
    let (log, meta) = generate_log(&spec);
    assert_eq!(meta.stats.events, 10_000);
    assert_eq!(meta.stats.cases, Some(500));
    let mut catalog = Catalog::new();
    catalog.insert("Log", log, meta);
    catalog
}

#[test]
fn criterion_06_computed_costs_match_the_worked_example() {
    // documented memory choice: M = B_Log = 200 blocks, the low end of the
    // [B_Log, 2*B_Log] window
    let p = worked_example_params();
    let catalog = worked_example_catalog();
    let opts = EstimateOptions {
        df_pricing: DfStrategy::Composite,
        measure_selectivity: false,
    };

    let select_first = parse("df(case, end_time, select(amount = 5, Log))").unwrap();
    let est = estimate_plan(&select_first, &catalog, &p, &opts).unwrap();
    assert_eq!(est.total(), blocks(21), "select-first plan");

    let select_last = parse("select(d.amount = 5 & u.amount = 5, df(case, end_time, Log))").unwrap();
    let est = estimate_plan(&select_last, &catalog, &p, &opts).unwrap();
    let total = est.total();
    let target = blocks(95_000);
    let tolerance = target / blocks(4);
    assert!(
        (total - target).abs() <= tolerance,
        "select-last plan {total} not within 25% of {target}"
    );
    pass(6, "computed costs: 21 exactly and ~9.5e4 within 25% at M=200");
}

#[test]
fn criterion_07_sweep_shows_two_memory_thresholds() {
    // figure parameters: 80-byte tuples, block factor 50, one million
    // memory blocks; cases fixed at 1000
    let base = CostParams::new(2_000, 1_000, 50, 1_000_000).unwrap();
    let curve = sweep(
        &base,
        SweepAxis::EventsPerCase,
        (2i128..=400).map(blocks),
    )
    .unwrap();
    let jumps = detect_jumps(&curve, blocks(2));
    assert_eq!(jumps.len(), 2, "expected exactly two upward jumps");

    let jump_positions: Vec<Blocks> = jumps.iter().map(|i| curve[*i].0).collect();
    let expected1 = blocks(result1_threshold(&base) as i128);
    let expected2 = blocks(result2_threshold(&base) as i128);
    let step = Blocks::one();
    assert!(
        (jump_positions[0] - expected1).abs() <= step,
        "first jump at {} expected {expected1}",
        jump_positions[0]
    );
    assert!(
        (jump_positions[1] - expected2).abs() <= step,
        "second jump at {} expected {expected2}",
        jump_positions[1]
    );
    pass(7, "cost curve jumps exactly where the fit thresholds predict");
}

#[test]
fn criterion_08_strategy_comparison() {
    for b in [1u64, 200, 1234] {
        let p = CostParams::new(b * 50, b.max(1), 50, 1_000_000).unwrap();
        let table = strategy_costs(&p);
        let b_log = p.b_log();
        assert_eq!(table[0].strategy, Strategy::IntermediateStorage);
        assert_eq!(table[0].blocks, blocks(3) * b_log);
        assert_eq!(table[1].blocks, b_log);
        assert_eq!(table[2].blocks, b_log);
        assert_eq!(table[3].blocks, composite_df_cost(&p).total());
    }
    pass(8, "strategy table reads 3B / B / B / composite");
}

#[test]
fn criterion_09_optimizer_chooses_the_pushdown_deterministically() {
    let p = worked_example_params();
    let catalog = worked_example_catalog();
    let opts = EstimateOptions {
        df_pricing: DfStrategy::Composite,
        measure_selectivity: false,
    };
    let expr = parse("select(d.amount = 5 & u.amount = 5, df(case, end_time, Log))").unwrap();
    let expected_chosen = parse("df(case, end_time, select(amount = 5, Log))").unwrap();

    let run = || {
        optimize(
            &expr,
            &catalog,
            &p,
            &opts,
            OptimizeMode::Heuristic,
            10_000,
        )
        .unwrap()
    };
    let first = run();
    assert_eq!(first.chosen, expected_chosen);
    let est_chosen = first.est_chosen.as_ref().unwrap().total();
    let est_original = first.est_original.as_ref().unwrap().total();
    assert_eq!(est_chosen, blocks(21));
    let target = blocks(95_000);
    assert!((est_original - target).abs() <= target / blocks(4));

    let second = run();
    assert_eq!(render(&first.chosen), render(&second.chosen));
    assert_eq!(first.applied_rules, second.applied_rules);
    assert_eq!(
        first.est_chosen.as_ref().unwrap().total(),
        second.est_chosen.as_ref().unwrap().total()
    );
    pass(9, "pushdown chosen with 21 vs ~9.5e4 blocks, deterministic");
}

#[test]
fn criterion_10_parser_roundtrip() {
    for seed in 0..1000u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let depth = (seed % 5) as usize + 1;
        let expr = random_expr(&mut rng, depth);
        let text = render(&expr);
        let parsed = parse(&text).unwrap_or_else(|e| panic!("seed {seed}: {e} in {text:?}"));
        assert_eq!(parsed, expr, "seed {seed}");
    }
    let examples = [
        "project(d.d.activity, d.u.activity, select(u.u.activity = 'reject', \
         df(u.case, u.end_time, df(case, end_time, Log))))",
        "select(u.amount != d.amount, df(case, end_time, Log))",
        "project(u.resource, select(u.amount != d.amount, df(case, end_time, Log)))",
    ];
    for q in examples {
        let expr = parse(q).unwrap();
        assert_eq!(parse(&render(&expr)).unwrap(), expr, "{q}");
    }
    pass(10, "1000 random trees and the example queries round-trip");
}

#[test]
fn criterion_11_intermediate_cardinalities_match_the_formulas() {
    let catalog = worked_example_catalog();
    let p = worked_example_params();
    let expr = parse("df(case, end_time, Log)").unwrap();
    let composite = expand_df(&expr, &catalog).unwrap();
    let AlgebraExpr::Minus { left, right } = &composite else {
        panic!("expansion is a set minus");
    };

    let first_join = eval_expr(left, &catalog, EvalConfig::default()).unwrap();
    assert_eq!(first_join.len() as i128, 95_000);
    assert_eq!(
        blocks(first_join.len() as i128),
        relog_core::cost::following_pairs(&p)
    );

    let middle_projected = eval_expr(right, &catalog, EvalConfig::default()).unwrap();
    assert_eq!(middle_projected.len() as i128, 85_500);
    assert_eq!(
        blocks(middle_projected.len() as i128),
        relog_core::cost::indirect_pairs(&p)
    );
    pass(11, "measured join cardinalities equal 95000 and 85500");
}
