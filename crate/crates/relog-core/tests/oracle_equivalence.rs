//! Cross-strategy equivalence: the brute-force oracle, the native sorted
//! scan, and the composite expansion must agree on every log.

use relog_core::catalog::{Catalog, RelationMeta};
use relog_core::eval::{evaluate, evaluate_df_composite, evaluate_df_native, EvalConfig, DfStrategy};
use relog_core::optimizer::RuleId;
use relog_core::relation::{relation_equal, AttrName, Value};
use relog_core::testkit::{
    brute_force_df, generate_log, instance_for, AttrSpec, EventsPerCase, LogSpec,
};
use relog_core::{desugar_join, AlgebraExpr, AttrClass};

fn case() -> AttrName {
    AttrName::new("case")
}

fn end_time() -> AttrName {
    AttrName::new("end_time")
}

fn spec_for_seed(seed: u64) -> LogSpec {
    LogSpec::new(
        (seed % 8 + 1) as usize,
        EventsPerCase::Range(1, 12),
        seed,
    )
    .with_duplicate_rate(0.1)
    .with_attribute(AttrSpec::new(
        "amount",
        AttrClass::Case,
        vec![Value::Integer(1), Value::Integer(2), Value::Integer(5)],
    ))
    .with_attribute(AttrSpec::new(
        "resource",
        AttrClass::Other,
        vec![Value::text("X"), Value::text("Y")],
    ))
}

#[test]
fn strategies_agree_with_the_oracle_on_random_logs() {
    for seed in 0..200 {
        let (log, _) = generate_log(&spec_for_seed(seed));
        let oracle = brute_force_df(&log, &case(), &end_time());
        let native = evaluate_df_native(&log, &case(), &end_time()).unwrap();
        let composite = evaluate_df_composite(&log, &case(), &end_time()).unwrap();
        assert!(
            relation_equal(&oracle, &native),
            "native disagrees with oracle at seed {seed}"
        );
        assert!(
            relation_equal(&oracle, &composite),
            "composite disagrees with oracle at seed {seed}"
        );
    }
}

#[test]
fn every_pair_is_adjacent_in_its_case() {
    // pairs satisfy d.case = u.case, d.t < u.t, and no event of the case
    // falls strictly between
    for seed in 0..50 {
        let (log, _) = generate_log(&spec_for_seed(seed));
        let df = evaluate_df_native(&log, &case(), &end_time()).unwrap();
        for pair in df.tuples() {
            let d_case = pair.get(&AttrName::new("d.case")).unwrap();
            let u_case = pair.get(&AttrName::new("u.case")).unwrap();
            let d_t = pair.get(&AttrName::new("d.end_time")).unwrap();
            let u_t = pair.get(&AttrName::new("u.end_time")).unwrap();
            assert_eq!(d_case, u_case);
            assert!(d_t < u_t);
            for event in log.tuples() {
                if event.get(&case()) == Some(d_case) {
                    let t = event.get(&end_time()).unwrap();
                    assert!(
                        !(d_t < t && t < u_t),
                        "seed {seed}: an event lies between a directly-follows pair"
                    );
                }
            }
        }
    }
}

#[test]
fn pair_count_is_the_sum_of_group_products() {
    // per-case group sizes g1..gk contribute sum(g_i * g_(i+1)) pairs
    let spec = LogSpec::new(3, EventsPerCase::Fixed(7), 5).with_group_sizes(vec![3, 2, 2]);
    let (log, _) = generate_log(&spec);
    let df = evaluate_df_native(&log, &case(), &end_time()).unwrap();
    assert_eq!(df.len(), 3 * (3 * 2 + 2 * 2));
}

#[test]
fn nested_df_agrees_across_strategies() {
    for seed in 0..25 {
        let (log, meta) = generate_log(&spec_for_seed(seed));
        let mut catalog = Catalog::new();
        catalog.insert("Log", log.clone(), meta);
        let expr = AlgebraExpr::df(
            "u.case",
            "u.end_time",
            AlgebraExpr::df("case", "end_time", AlgebraExpr::base("Log")),
        );
        let native = evaluate(
            &expr,
            &catalog,
            EvalConfig {
                df_strategy: DfStrategy::Native,
                collect_metrics: false,
            },
        )
        .unwrap();
        let composite = evaluate(
            &expr,
            &catalog,
            EvalConfig {
                df_strategy: DfStrategy::Composite,
                collect_metrics: false,
            },
        )
        .unwrap();
        // the oracle composes too: run it over its own output
        let inner = brute_force_df(&log, &case(), &end_time());
        let oracle = brute_force_df(
            &inner,
            &AttrName::new("u.case"),
            &AttrName::new("u.end_time"),
        );
        assert!(relation_equal(&native, &composite), "seed {seed}");
        assert!(relation_equal(&native, &oracle), "seed {seed}");
    }
}

#[test]
fn desugared_joins_evaluate_identically_on_random_trees() {
    // rule instances double as a supply of random join-bearing trees
    let mut checked = 0;
    for seed in 0..10 {
        for rule in RuleId::ALL {
            let instance = instance_for(rule, seed);
            let plain = evaluate(&instance.expr, &instance.catalog, EvalConfig::default());
            let desugared = evaluate(
                &desugar_join(&instance.expr),
                &instance.catalog,
                EvalConfig::default(),
            );
            match (plain, desugared) {
                (Ok(a), Ok(b)) => {
                    assert!(relation_equal(&a, &b), "{rule} seed {seed}");
                    checked += 1;
                }
                (a, b) => panic!("{rule} seed {seed}: {a:?} vs {b:?}"),
            }
        }
    }
    assert!(checked >= 100);
}

#[test]
fn absent_cases_pair_with_nothing() {
    use relog_core::relation::{Domain, Relation, Schema, Tuple};
    let schema = Schema::of(&[("case", Domain::Integer), ("end_time", Domain::Timestamp)]);
    let minute = 60_000;
    let tuples = vec![
        Tuple::of(vec![("case", Value::Integer(1)), ("end_time", Value::Timestamp(minute))]),
        Tuple::of(vec![("case", Value::Integer(1)), ("end_time", Value::Timestamp(2 * minute))]),
        Tuple::of(vec![("case", Value::Absent), ("end_time", Value::Timestamp(minute))]),
        Tuple::of(vec![("case", Value::Absent), ("end_time", Value::Timestamp(3 * minute))]),
    ];
    let log = Relation::new(schema, tuples).unwrap();
    let native = evaluate_df_native(&log, &case(), &end_time()).unwrap();
    let composite = evaluate_df_composite(&log, &case(), &end_time()).unwrap();
    let oracle = brute_force_df(&log, &case(), &end_time());
    assert_eq!(native.len(), 1);
    assert!(relation_equal(&native, &composite));
    assert!(relation_equal(&native, &oracle));
}

#[test]
fn composite_dispatch_matches_standalone_composite() {
    let (log, meta) = generate_log(&spec_for_seed(9));
    let mut catalog = Catalog::new();
    catalog.insert("Log", log.clone(), meta);
    // stray unrelated relation in the catalog must not interfere
    catalog.insert(
        "Other",
        log.clone(),
        RelationMeta::default(),
    );
    let expr = AlgebraExpr::df("case", "end_time", AlgebraExpr::base("Log"));
    let via_dispatch = evaluate(
        &expr,
        &catalog,
        EvalConfig {
            df_strategy: DfStrategy::Composite,
            collect_metrics: false,
        },
    )
    .unwrap();
    let standalone = evaluate_df_composite(&log, &case(), &end_time()).unwrap();
    assert!(relation_equal(&via_dispatch, &standalone));
}
