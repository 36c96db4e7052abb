//! Execute expression trees against a catalog.
//!
//! The `directly follows` operator runs under one of two interchangeable
//! strategies: a native single-pass sorted scan, or literal evaluation of
//! the composite expansion. Both produce the same relation.
//!
//! Joins with conjunctive equality atoms are bucketed by key so that the
//! composite expansion stays usable on logs with tens of thousands of
//! events; the result is still exactly the selection over the product.

use std::collections::BTreeSet;
use std::collections::HashMap;

use thiserror::Error;

use crate::algebra::{
    expand_df, AlgebraExpr, Condition, ExpandError, Operand, SchemaError, SchemaErrorKind,
};
use crate::catalog::Catalog;
use crate::relation::{
    AttrName, CompareOp, CompareTypeError, Relation, Schema, Tuple, Value,
};

/// Strategy for `directly follows` nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DfStrategy {
    #[default]
    Native,
    Composite,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalConfig {
    pub df_strategy: DfStrategy,
    pub collect_metrics: bool,
}

/// Counters gathered during evaluation when `collect_metrics` is on;
/// all zero otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalMetrics {
    /// Tuples read from base relations (per scan occurrence).
    pub tuples_read: u64,
    /// Largest materialized node result.
    pub intermediate_tuples_peak: u64,
    /// Binary comparisons performed while evaluating conditions.
    pub comparisons: u64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("type error: {0}")]
    Type(#[from] CompareTypeError),
    #[error("directly-follows time attribute '{0}' has an absent value")]
    AbsentTime(AttrName),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

/// Evaluate `expr` against the catalog and also return metrics.
pub fn evaluate_full(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    config: EvalConfig,
) -> Result<(Relation, EvalMetrics), EvalError> {
    // reject ill-formed trees up front
    crate::algebra::infer_schema(expr, catalog)?;
    let mut state = EvalState {
        catalog,
        config,
        metrics: EvalMetrics::default(),
    };
    let relation = state.eval(expr)?;
    Ok((relation, state.metrics))
}

/// Evaluate `expr` against the catalog.
pub fn evaluate(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    config: EvalConfig,
) -> Result<Relation, EvalError> {
    evaluate_full(expr, catalog, config).map(|(r, _)| r)
}

struct EvalState<'a> {
    catalog: &'a Catalog,
    config: EvalConfig,
    metrics: EvalMetrics,
}

impl<'a> EvalState<'a> {
    fn note_result(&mut self, relation: &Relation) {
        if self.config.collect_metrics {
            self.metrics.intermediate_tuples_peak = self
                .metrics
                .intermediate_tuples_peak
                .max(relation.len() as u64);
        }
    }

    fn eval_condition<'v, F>(&mut self, condition: &Condition, lookup: &F) -> Result<bool, EvalError>
    where
        F: Fn(&AttrName) -> Option<&'v Value>,
    {
        if self.config.collect_metrics {
            self.metrics.comparisons += condition_comparison_count(condition);
        }
        Ok(condition.eval_with(lookup)?)
    }

    fn eval(&mut self, expr: &AlgebraExpr) -> Result<Relation, EvalError> {
        let result = match expr {
            AlgebraExpr::BaseRel(name) => {
                let relation = self
                    .catalog
                    .relation(name)
                    .ok_or_else(|| SchemaError {
                        kind: SchemaErrorKind::UnknownRelation,
                        location: vec![],
                        message: format!("unknown relation '{name}'"),
                    })?
                    .clone();
                if self.config.collect_metrics {
                    self.metrics.tuples_read += relation.len() as u64;
                }
                relation
            }
            AlgebraExpr::Select { condition, input } => {
                let input = self.eval(input)?;
                let mut out = BTreeSet::new();
                for t in input.tuples() {
                    if self.eval_condition(condition, &|n| t.get(n))? {
                        out.insert(t.clone());
                    }
                }
                Relation::from_parts_unchecked(input.schema().clone(), out)
            }
            AlgebraExpr::Project { attrs, input } => match input.as_ref() {
                // fuse the projection into join/product output so wide
                // intermediate tuples are never materialized; the result is
                // identical under set semantics
                AlgebraExpr::Join {
                    condition,
                    left,
                    right,
                } => {
                    let l = self.eval(left)?;
                    let r = self.eval(right)?;
                    self.join(condition, &l, &r, Some(attrs))?
                }
                AlgebraExpr::Product { left, right } => {
                    let l = self.eval(left)?;
                    let r = self.eval(right)?;
                    self.product(&l, &r, Some(attrs))?
                }
                _ => {
                    let input = self.eval(input)?;
                    let schema = input.schema().restricted(attrs);
                    let tuples = input.tuples().map(|t| t.projected(attrs)).collect();
                    Relation::from_parts_unchecked(schema, tuples)
                }
            },
            AlgebraExpr::RenameAttr { from, to, input } => {
                let input = self.eval(input)?;
                let schema = input.schema().renamed(from, to);
                let tuples = input.tuples().map(|t| t.renamed(from, to)).collect();
                Relation::from_parts_unchecked(schema, tuples)
            }
            AlgebraExpr::RenamePrefix { prefix, input } => {
                let input = self.eval(input)?;
                let schema = input.schema().prefixed(prefix);
                let tuples = input.tuples().map(|t| t.prefixed(prefix)).collect();
                Relation::from_parts_unchecked(schema, tuples)
            }
            AlgebraExpr::Product { left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                self.product(&l, &r, None)?
            }
            AlgebraExpr::Join {
                condition,
                left,
                right,
            } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                self.join(condition, &l, &r, None)?
            }
            AlgebraExpr::Union { left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                let tuples = l.tuples().chain(r.tuples()).cloned().collect();
                Relation::from_parts_unchecked(l.schema().clone(), tuples)
            }
            AlgebraExpr::Intersect { left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                let tuples = l.tuples().filter(|t| r.contains(t)).cloned().collect();
                Relation::from_parts_unchecked(l.schema().clone(), tuples)
            }
            AlgebraExpr::Minus { left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                let tuples = l.tuples().filter(|t| !r.contains(t)).cloned().collect();
                Relation::from_parts_unchecked(l.schema().clone(), tuples)
            }
            AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } => {
                let log = self.eval(input)?;
                check_time_attr(&log, time_attr)?;
                match self.config.df_strategy {
                    DfStrategy::Native => evaluate_df_native(&log, case_attr, time_attr)?,
                    DfStrategy::Composite => {
                        // evaluate the defining composite tree over the
                        // materialized input
                        let mut catalog = Catalog::new();
                        catalog.insert("__df_input", log, Default::default());
                        let composite = expand_df(
                            &AlgebraExpr::df(
                                case_attr.clone(),
                                time_attr.clone(),
                                AlgebraExpr::base("__df_input"),
                            ),
                            &catalog,
                        )?;
                        let mut inner = EvalState {
                            catalog: &catalog,
                            config: self.config,
                            metrics: self.metrics,
                        };
                        let out = inner.eval(&composite)?;
                        self.metrics = inner.metrics;
                        out
                    }
                }
            }
        };
        self.note_result(&result);
        Ok(result)
    }

    /// Join as selection over the product, bucketed by conjunctive equality
    /// atoms when the condition shape allows it. With `project` set, each
    /// matching pair is narrowed to those attributes before deduplication.
    fn join(
        &mut self,
        condition: &Condition,
        left: &Relation,
        right: &Relation,
        project: Option<&[AttrName]>,
    ) -> Result<Relation, EvalError> {
        let full_schema = left
            .schema()
            .concat(right.schema())
            .expect("checked by schema inference");
        let schema = match project {
            Some(attrs) => full_schema.restricted(attrs),
            None => full_schema,
        };
        let keys = equi_keys(condition, left.schema(), right.schema());
        let mut out = BTreeSet::new();

        if keys.is_empty() {
            for a in left.tuples() {
                for b in right.tuples() {
                    let lookup = |n: &AttrName| a.get(n).or_else(|| b.get(n));
                    if self.eval_condition(condition, &lookup)? {
                        out.insert(emit_pair(a, b, project));
                    }
                }
            }
        } else {
            // bucket the left side by key values; tuples with an absent key
            // can never satisfy the equality conjunct
            let mut buckets: HashMap<Vec<&Value>, Vec<&Tuple>> = HashMap::new();
            'left: for a in left.tuples() {
                let mut key = Vec::with_capacity(keys.len());
                for (l, _) in &keys {
                    match a.get(l) {
                        Some(v) if !v.is_absent() => key.push(v),
                        _ => continue 'left,
                    }
                }
                buckets.entry(key).or_default().push(a);
            }
            'right: for b in right.tuples() {
                let mut key = Vec::with_capacity(keys.len());
                for (_, r) in &keys {
                    match b.get(r) {
                        Some(v) if !v.is_absent() => key.push(v),
                        _ => continue 'right,
                    }
                }
                let Some(candidates) = buckets.get(&key) else {
                    continue;
                };
                for a in candidates {
                    let lookup = |n: &AttrName| a.get(n).or_else(|| b.get(n));
                    if self.eval_condition(condition, &lookup)? {
                        out.insert(emit_pair(a, b, project));
                    }
                }
            }
        }
        Ok(Relation::from_parts_unchecked(schema, out))
    }

    fn product(
        &mut self,
        left: &Relation,
        right: &Relation,
        project: Option<&[AttrName]>,
    ) -> Result<Relation, EvalError> {
        let full_schema = left
            .schema()
            .concat(right.schema())
            .expect("checked by schema inference");
        let schema = match project {
            Some(attrs) => full_schema.restricted(attrs),
            None => full_schema,
        };
        let mut out = BTreeSet::new();
        for a in left.tuples() {
            for b in right.tuples() {
                out.insert(emit_pair(a, b, project));
            }
        }
        Ok(Relation::from_parts_unchecked(schema, out))
    }
}

fn emit_pair(a: &Tuple, b: &Tuple, project: Option<&[AttrName]>) -> Tuple {
    match project {
        None => a.concat(b),
        Some(attrs) => Tuple::new(
            attrs
                .iter()
                .map(|n| {
                    let v = a
                        .get(n)
                        .or_else(|| b.get(n))
                        .expect("projection attributes checked by schema inference");
                    (n.clone(), v.clone())
                })
                .collect(),
        ),
    }
}

fn condition_comparison_count(condition: &Condition) -> u64 {
    match condition {
        Condition::Compare { .. } => 1,
        Condition::And(a, b) | Condition::Or(a, b) => {
            condition_comparison_count(a) + condition_comparison_count(b)
        }
        Condition::Not(a) => condition_comparison_count(a),
    }
}

/// Equality atoms `l = r` usable as hash-join keys: the condition must be a
/// pure conjunction, `l` from the left schema and `r` from the right.
fn equi_keys(
    condition: &Condition,
    left: &Schema,
    right: &Schema,
) -> Vec<(AttrName, AttrName)> {
    let mut atoms = Vec::new();
    if collect_conjuncts(condition, &mut atoms) {
        atoms
            .iter()
            .filter_map(|c| {
                let Condition::Compare {
                    lhs: Operand::Attr(a),
                    op: CompareOp::Eq,
                    rhs: Operand::Attr(b),
                } = c
                else {
                    return None;
                };
                if left.contains(a) && right.contains(b) {
                    Some((a.clone(), b.clone()))
                } else if left.contains(b) && right.contains(a) {
                    Some((b.clone(), a.clone()))
                } else {
                    None
                }
            })
            .collect()
    } else {
        Vec::new()
    }
}

/// Collect comparison atoms of a pure conjunction; false if the formula
/// contains Or/Not anywhere.
fn collect_conjuncts<'c>(condition: &'c Condition, out: &mut Vec<&'c Condition>) -> bool {
    match condition {
        Condition::Compare { .. } => {
            out.push(condition);
            true
        }
        Condition::And(a, b) => collect_conjuncts(a, out) && collect_conjuncts(b, out),
        Condition::Or(..) | Condition::Not(..) => false,
    }
}

fn check_time_attr(log: &Relation, time_attr: &AttrName) -> Result<(), EvalError> {
    for t in log.tuples() {
        if t.get(time_attr).is_none_or(|v| v.is_absent()) {
            return Err(EvalError::AbsentTime(time_attr.clone()));
        }
    }
    Ok(())
}

/// Native `directly follows`: sort by (case, time), group events of a case
/// that share a timestamp, and pair each event of a group with each event of
/// the next group. The earlier event's attributes are `d.`-prefixed, the
/// later `u.`-prefixed.
///
/// Events whose case identifier is absent pair with nothing. The grouping
/// (rather than plain row adjacency) is what makes the result equal to the
/// composite expansion when timestamps tie.
pub fn evaluate_df_native(
    log: &Relation,
    case_attr: &AttrName,
    time_attr: &AttrName,
) -> Result<Relation, EvalError> {
    for a in [case_attr, time_attr] {
        if !log.schema().contains(a) {
            return Err(EvalError::Schema(SchemaError {
                kind: SchemaErrorKind::UnknownAttribute,
                location: vec![],
                message: format!("directly-follows attribute '{a}' is not in the schema"),
            }));
        }
    }
    check_time_attr(log, time_attr)?;

    let schema = log
        .schema()
        .prefixed("d")
        .concat(&log.schema().prefixed("u"))
        .expect("prefixing keeps names disjoint");

    // sort by (case, time); BTreeMap gives us the grouping directly
    let mut by_case: std::collections::BTreeMap<&Value, Vec<&Tuple>> =
        std::collections::BTreeMap::new();
    for t in log.tuples() {
        let case = t.get(case_attr).expect("schema checked");
        if case.is_absent() {
            continue;
        }
        by_case.entry(case).or_default().push(t);
    }

    let mut out = BTreeSet::new();
    for (_, mut events) in by_case {
        events.sort_by_key(|t| t.get(time_attr).expect("schema checked"));
        // runs of equal timestamps
        let mut groups: Vec<&[&Tuple]> = Vec::new();
        let mut start = 0;
        for i in 1..=events.len() {
            if i == events.len()
                || events[i].get(time_attr) != events[start].get(time_attr)
            {
                groups.push(&events[start..i]);
                start = i;
            }
        }
        for pair in groups.windows(2) {
            for earlier in pair[0] {
                for later in pair[1] {
                    out.insert(earlier.prefixed("d").concat(&later.prefixed("u")));
                }
            }
        }
    }
    Ok(Relation::from_parts_unchecked(schema, out))
}

/// `directly follows` via literal evaluation of the composite tree; the
/// oracle counterpart for the native path.
pub fn evaluate_df_composite(
    log: &Relation,
    case_attr: &AttrName,
    time_attr: &AttrName,
) -> Result<Relation, EvalError> {
    let mut catalog = Catalog::new();
    catalog.insert("__df_input", log.clone(), Default::default());
    let composite = expand_df(
        &AlgebraExpr::df(
            case_attr.clone(),
            time_attr.clone(),
            AlgebraExpr::base("__df_input"),
        ),
        &catalog,
    )?;
    evaluate(&composite, &catalog, EvalConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_csv_str, LoadOptions};
    use crate::parser::parse;
    use crate::relation::{relation_equal, Domain};
    use crate::testkit::{table1_expected_df, TABLE1_CSV};

    fn table1_catalog() -> Catalog {
        let loaded = load_csv_str(TABLE1_CSV, "table1.csv", &LoadOptions::default()).unwrap();
        let mut catalog = Catalog::new();
        catalog.insert("Log", loaded.relation, loaded.meta);
        catalog
    }

    fn run(query: &str, catalog: &Catalog) -> Relation {
        evaluate(&parse(query).unwrap(), catalog, EvalConfig::default()).unwrap()
    }

    #[test]
    fn select_case_one_keeps_three_rows() {
        let catalog = table1_catalog();
        let out = run("select(case = 1, Log)", &catalog);
        assert_eq!(out.len(), 3);
        let acts: BTreeSet<_> = out
            .tuples()
            .map(|t| t.get(&AttrName::new("activity")).unwrap().clone())
            .collect();
        assert_eq!(
            acts,
            BTreeSet::from([Value::text("A"), Value::text("B"), Value::text("E")])
        );
    }

    #[test]
    fn project_case_deduplicates() {
        let catalog = table1_catalog();
        let out = run("project(case, Log)", &catalog);
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn df_on_table1_gives_the_twelve_pairs() {
        let catalog = table1_catalog();
        let expected = table1_expected_df();
        for strategy in [DfStrategy::Native, DfStrategy::Composite] {
            let out = evaluate(
                &parse("df(case, end_time, Log)").unwrap(),
                &catalog,
                EvalConfig {
                    df_strategy: strategy,
                    collect_metrics: false,
                },
            )
            .unwrap();
            assert_eq!(out.len(), 12);
            assert!(relation_equal(&out, &expected), "strategy {strategy:?}");
        }
    }

    #[test]
    fn single_event_case_contributes_no_pairs() {
        let csv = "case,end_time\n1,00:01\n";
        let loaded = load_csv_str(csv, "x.csv", &LoadOptions::default()).unwrap();
        let out =
            evaluate_df_native(&loaded.relation, &"case".into(), &"end_time".into()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn tied_timestamps_pair_group_to_group() {
        // times t1 < t2 = t2' < t3
        let csv = "case,activity,end_time\n1,a,00:01\n1,b,00:02\n1,c,00:02\n1,d,00:03\n";
        let loaded = load_csv_str(csv, "x.csv", &LoadOptions::default()).unwrap();
        let native =
            evaluate_df_native(&loaded.relation, &"case".into(), &"end_time".into()).unwrap();
        let composite =
            evaluate_df_composite(&loaded.relation, &"case".into(), &"end_time".into()).unwrap();
        assert!(relation_equal(&native, &composite));
        assert_eq!(native.len(), 4);
        let pairs: BTreeSet<(String, String)> = native
            .tuples()
            .map(|t| {
                let get = |n: &str| match t.get(&AttrName::new(n)).unwrap() {
                    Value::Text(s) => s.to_string(),
                    _ => panic!(),
                };
                (get("d.activity"), get("u.activity"))
            })
            .collect();
        let want: BTreeSet<(String, String)> = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(pairs, want);
    }

    #[test]
    fn empty_log_yields_empty_df_with_prefixed_schema() {
        let loaded =
            load_csv_str("case,end_time\n", "x.csv", &LoadOptions::default()).unwrap();
        let out =
            evaluate_df_composite(&loaded.relation, &"case".into(), &"end_time".into()).unwrap();
        assert!(out.is_empty());
        assert!(out.schema().contains(&AttrName::new("d.case")));
        assert!(out.schema().contains(&AttrName::new("u.end_time")));
    }

    #[test]
    fn absent_time_is_an_error() {
        let csv = "case,end_time\n1,00:01\n1,\n";
        let mut options = LoadOptions::default();
        options
            .type_overrides
            .insert(AttrName::new("end_time"), Domain::Timestamp);
        let loaded = load_csv_str(csv, "x.csv", &options).unwrap();
        let err = evaluate_df_native(&loaded.relation, &"case".into(), &"end_time".into());
        assert!(matches!(err, Err(EvalError::AbsentTime(_))));
    }

    #[test]
    fn desugared_joins_evaluate_identically() {
        let catalog = table1_catalog();
        let query = "df(case, end_time, Log)";
        let expr = crate::algebra::expand_df(&parse(query).unwrap(), &catalog).unwrap();
        let plain = evaluate(&expr, &catalog, EvalConfig::default()).unwrap();
        let desugared = evaluate(
            &crate::algebra::desugar_join(&expr),
            &catalog,
            EvalConfig::default(),
        )
        .unwrap();
        assert!(relation_equal(&plain, &desugared));
    }

    #[test]
    fn metrics_are_zero_when_disabled() {
        let catalog = table1_catalog();
        let (_, metrics) = evaluate_full(
            &parse("df(case, end_time, Log)").unwrap(),
            &catalog,
            EvalConfig::default(),
        )
        .unwrap();
        assert_eq!(metrics, EvalMetrics::default());
    }

    #[test]
    fn metrics_count_reads_and_peaks() {
        let catalog = table1_catalog();
        let (out, metrics) = evaluate_full(
            &parse("select(case = 1, Log)").unwrap(),
            &catalog,
            EvalConfig {
                df_strategy: DfStrategy::Native,
                collect_metrics: true,
            },
        )
        .unwrap();
        assert_eq!(metrics.tuples_read, 18);
        assert_eq!(metrics.intermediate_tuples_peak, 18);
        assert_eq!(metrics.comparisons, 18);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn successor_activities_of_a() {
        let catalog = table1_catalog();
        let out = run(
            "project(u.activity, select(d.activity = 'A', df(case, end_time, Log)))",
            &catalog,
        );
        let acts: BTreeSet<_> = out
            .tuples()
            .map(|t| t.get(&AttrName::new("u.activity")).unwrap().clone())
            .collect();
        assert_eq!(
            acts,
            BTreeSet::from([Value::text("B"), Value::text("C"), Value::text("D")])
        );
    }
}
