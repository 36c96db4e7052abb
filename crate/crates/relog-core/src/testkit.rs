//! Test support: seeded random log generation with controlled attribute
//! classes, the brute-force directly-follows oracle, random expression trees
//! for parser round-trips, and per-rule instance builders for both-sides
//! verification.
//!
//! The oracle here follows the plain "no event strictly in between"
//! formulation with three nested loops, independently of the composite
//! expansion; agreement between them is evidence for both.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraExpr, Condition, Operand};
use crate::catalog::{
    AttrClass, Catalog, RelationMeta, RelationStats, TotalityFact,
};
use crate::optimizer::{RewriteDirection, RuleId};
use crate::relation::{AttrName, CompareOp, Domain, Relation, Schema, Tuple, Value};

/// The 18-row sample log used throughout the docs and tests.
pub const TABLE1_CSV: &str = "\
case,activity,start_time,end_time
1,A,00:20,00:22
1,B,02:04,02:08
1,E,02:32,02:32
2,A,02:15,02:20
2,D,03:14,03:19
2,E,05:06,05:07
3,A,02:27,02:29
3,D,04:17,04:20
3,E,06:51,06:53
4,A,03:06,03:10
4,B,05:04,05:09
4,E,07:26,07:29
5,A,03:40,03:44
5,B,05:59,06:06
5,E,07:49,07:52
6,A,04:18,04:20
6,C,07:08,07:12
6,E,09:05,09:07
";

const TABLE1_ROWS: [(i64, &str, i64, i64); 18] = [
    (1, "A", 20, 22),
    (1, "B", 124, 128),
    (1, "E", 152, 152),
    (2, "A", 135, 140),
    (2, "D", 194, 199),
    (2, "E", 306, 307),
    (3, "A", 147, 149),
    (3, "D", 257, 260),
    (3, "E", 411, 413),
    (4, "A", 186, 190),
    (4, "B", 304, 309),
    (4, "E", 446, 449),
    (5, "A", 220, 224),
    (5, "B", 359, 366),
    (5, "E", 469, 472),
    (6, "A", 258, 260),
    (6, "C", 428, 432),
    (6, "E", 545, 547),
];

fn table1_schema() -> Schema {
    Schema::of(&[
        ("case", Domain::Integer),
        ("activity", Domain::Text),
        ("start_time", Domain::Timestamp),
        ("end_time", Domain::Timestamp),
    ])
}

fn table1_tuple(case: i64, activity: &str, start_min: i64, end_min: i64) -> Tuple {
    Tuple::of(vec![
        ("case", Value::Integer(case)),
        ("activity", Value::text(activity)),
        ("start_time", Value::Timestamp(start_min * 60_000)),
        ("end_time", Value::Timestamp(end_min * 60_000)),
    ])
}

/// The sample log as a relation.
pub fn table1_log() -> Relation {
    Relation::new(
        table1_schema(),
        TABLE1_ROWS
            .iter()
            .map(|(c, a, s, e)| table1_tuple(*c, a, *s, *e)),
    )
    .expect("fixture conforms to its schema")
}

/// The twelve directly-follows pairs of the sample log.
pub fn table1_expected_df() -> Relation {
    let schema = table1_schema()
        .prefixed("d")
        .concat(&table1_schema().prefixed("u"))
        .expect("prefixes are disjoint");
    let mut tuples = Vec::new();
    for rows in TABLE1_ROWS.chunks(3) {
        for pair in rows.windows(2) {
            let (c1, a1, s1, e1) = pair[0];
            let (c2, a2, s2, e2) = pair[1];
            tuples.push(
                table1_tuple(c1, a1, s1, e1)
                    .prefixed("d")
                    .concat(&table1_tuple(c2, a2, s2, e2).prefixed("u")),
            );
        }
    }
    Relation::new(schema, tuples).expect("fixture conforms")
}

/// Number of events per generated case.
#[derive(Clone, Debug)]
pub enum EventsPerCase {
    Fixed(usize),
    Range(usize, usize),
}

/// Declared extra attribute of a generated log.
#[derive(Clone, Debug)]
pub struct AttrSpec {
    pub name: String,
    pub class: AttrClass,
    pub pool: Vec<Value>,
}

impl AttrSpec {
    pub fn new(name: impl Into<String>, class: AttrClass, pool: Vec<Value>) -> Self {
        AttrSpec {
            name: name.into(),
            class,
            pool,
        }
    }
}

/// Specification for a generated event log.
#[derive(Clone, Debug)]
pub struct LogSpec {
    pub cases: usize,
    pub events_per_case: EventsPerCase,
    /// Probability that an event shares its timestamp with the previous
    /// event of the case.
    pub duplicate_timestamp_rate: f64,
    /// Exact distinct-timestamp group sizes per case; overrides
    /// `events_per_case` and the duplicate rate when set.
    pub group_sizes: Option<Vec<usize>>,
    pub attributes: Vec<AttrSpec>,
    pub seed: u64,
}

impl LogSpec {
    pub fn new(cases: usize, events_per_case: EventsPerCase, seed: u64) -> Self {
        LogSpec {
            cases,
            events_per_case,
            duplicate_timestamp_rate: 0.0,
            group_sizes: None,
            attributes: Vec::new(),
            seed,
        }
    }

    pub fn with_duplicate_rate(mut self, rate: f64) -> Self {
        self.duplicate_timestamp_rate = rate;
        self
    }

    pub fn with_group_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.group_sizes = Some(sizes);
        self
    }

    pub fn with_attribute(mut self, spec: AttrSpec) -> Self {
        self.attributes.push(spec);
        self
    }
}

/// Generate a log honoring the declared attribute classes: case attributes
/// are constant from the moment they get a value, event attributes are
/// non-absent at most once per case. Deterministic in the seed.
pub fn generate_log(spec: &LogSpec) -> (Relation, RelationMeta) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut columns = vec![
        (AttrName::new("case"), Domain::Integer),
        (AttrName::new("activity"), Domain::Text),
        (AttrName::new("start_time"), Domain::Timestamp),
        (AttrName::new("end_time"), Domain::Timestamp),
    ];
    for attr in &spec.attributes {
        let domain = attr
            .pool
            .first()
            .and_then(|v| v.domain())
            .unwrap_or(Domain::Text);
        columns.push((AttrName::new(attr.name.clone()), domain));
    }
    let schema = Schema::new(columns).expect("generator attribute names are unique");

    let activities = ["A", "B", "C", "D", "E"];
    let mut tuples = Vec::new();
    let minute = 60_000i64;

    for case_idx in 0..spec.cases {
        let n = match (&spec.group_sizes, &spec.events_per_case) {
            (Some(sizes), _) => sizes.iter().sum::<usize>(),
            (None, EventsPerCase::Fixed(n)) => *n,
            (None, EventsPerCase::Range(lo, hi)) => rng.gen_range(*lo..=*hi),
        };
        if n == 0 {
            continue;
        }

        // end times, possibly with tied groups
        let mut end_times = Vec::with_capacity(n);
        let mut t = rng.gen_range(0..600) * minute;
        match &spec.group_sizes {
            Some(sizes) => {
                for size in sizes {
                    for _ in 0..*size {
                        end_times.push(t);
                    }
                    t += rng.gen_range(1..=7) * minute;
                }
            }
            None => {
                for i in 0..n {
                    if i > 0 && !rng.gen_bool(spec.duplicate_timestamp_rate.clamp(0.0, 1.0)) {
                        t += rng.gen_range(1..=7) * minute;
                    }
                    end_times.push(t);
                }
            }
        }

        // per-attribute value plans
        let mut plans: Vec<(AttrName, Vec<Value>)> = Vec::new();
        for attr in &spec.attributes {
            let pick = |rng: &mut ChaCha8Rng| {
                attr.pool[rng.gen_range(0..attr.pool.len())].clone()
            };
            let values = match attr.class {
                AttrClass::Case => {
                    let switch = rng.gen_range(0..=n);
                    let v = pick(&mut rng);
                    (0..n)
                        .map(|i| if i < switch { Value::Absent } else { v.clone() })
                        .collect()
                }
                AttrClass::Event => {
                    let slot = if rng.gen_bool(0.8) {
                        Some(rng.gen_range(0..n))
                    } else {
                        None
                    };
                    let v = pick(&mut rng);
                    (0..n)
                        .map(|i| {
                            if Some(i) == slot {
                                v.clone()
                            } else {
                                Value::Absent
                            }
                        })
                        .collect()
                }
                AttrClass::Other => (0..n).map(|_| pick(&mut rng)).collect::<Vec<_>>(),
            };
            plans.push((AttrName::new(attr.name.clone()), values));
        }

        for (i, end) in end_times.iter().enumerate() {
            let mut values = BTreeMap::new();
            values.insert(AttrName::new("case"), Value::Integer(case_idx as i64 + 1));
            values.insert(
                AttrName::new("activity"),
                Value::text(activities[rng.gen_range(0..activities.len())]),
            );
            // start times are a per-case sequence, so every event is unique
            // even when end times tie
            values.insert(
                AttrName::new("start_time"),
                Value::Timestamp((case_idx as i64) * 100_000 * minute + (i as i64) * minute),
            );
            values.insert(AttrName::new("end_time"), Value::Timestamp(*end));
            for (name, plan) in &plans {
                values.insert(name.clone(), plan[i].clone());
            }
            tuples.push(Tuple::new(values));
        }
    }

    let relation = Relation::new(schema, tuples).expect("generated tuples conform");
    let mut attr_classes: BTreeMap<AttrName, AttrClass> =
        BTreeMap::from([(AttrName::new("case"), AttrClass::Case)]);
    for attr in &spec.attributes {
        attr_classes.insert(AttrName::new(attr.name.clone()), attr.class);
    }
    let cases = relation
        .tuples()
        .map(|t| t.get(&AttrName::new("case")).cloned())
        .collect::<BTreeSet<_>>()
        .len() as u64;
    let meta = RelationMeta {
        attr_classes,
        case_attr: Some(AttrName::new("case")),
        time_attr: Some(AttrName::new("end_time")),
        stats: RelationStats {
            events: relation.len() as u64,
            cases: Some(cases),
            selectivity_samples: BTreeMap::new(),
        },
        totality_facts: BTreeSet::new(),
    };
    (relation, meta)
}

/// Triple-nested-loop directly-follows oracle: pairs of same-case events
/// with no event of that case strictly between them in time.
pub fn brute_force_df(log: &Relation, case_attr: &AttrName, time_attr: &AttrName) -> Relation {
    let schema = log
        .schema()
        .prefixed("d")
        .concat(&log.schema().prefixed("u"))
        .expect("prefixes are disjoint");
    let tuples: Vec<&Tuple> = log.tuples().collect();
    let mut out = Vec::new();
    for e in &tuples {
        let e_case = e.get(case_attr).expect("case attribute present");
        if e_case.is_absent() {
            continue;
        }
        let e_time = e.get(time_attr).expect("time attribute present");
        for f in &tuples {
            if f.get(case_attr) != Some(e_case) {
                continue;
            }
            let f_time = f.get(time_attr).expect("time attribute present");
            if e_time >= f_time {
                continue;
            }
            let mut witnessed = false;
            for g in &tuples {
                if g.get(case_attr) != Some(e_case) {
                    continue;
                }
                let g_time = g.get(time_attr).expect("time attribute present");
                if e_time < g_time && g_time < f_time {
                    witnessed = true;
                    break;
                }
            }
            if !witnessed {
                out.push(e.prefixed("d").concat(&f.prefixed("u")));
            }
        }
    }
    Relation::new(schema, out).expect("pairs conform")
}

// ---------------------------------------------------------------------------
// random expression trees for parser round-trips
// ---------------------------------------------------------------------------

const REL_NAMES: [&str; 4] = ["Log", "R", "S", "Events"];
const ATTR_NAMES: [&str; 8] = [
    "case",
    "activity",
    "amount",
    "resource",
    "start_time",
    "end_time",
    "a",
    "b",
];
const TEXT_POOL: [&str; 5] = ["A", "B", "reject", "x y", "hello"];

fn random_attr(rng: &mut StdRng) -> AttrName {
    let base = ATTR_NAMES[rng.gen_range(0..ATTR_NAMES.len())];
    match rng.gen_range(0..4) {
        0 => AttrName::new(base).prefixed("d"),
        1 => AttrName::new(base).prefixed("u"),
        2 => AttrName::new(base).prefixed("d").prefixed("u"),
        _ => AttrName::new(base),
    }
}

fn random_value(rng: &mut StdRng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Integer(rng.gen_range(-1000..1000)),
        1 => Value::decimal(f64::from(rng.gen_range(-8000i32..8000)) / 8.0),
        2 => {
            if rng.gen_bool(0.5) {
                Value::Timestamp(rng.gen_range(0..1440) * 60_000)
            } else {
                Value::Timestamp(rng.gen_range(0..4_000_000_000_000i64))
            }
        }
        _ => Value::text(TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())]),
    }
}

fn random_operand(rng: &mut StdRng) -> Operand {
    if rng.gen_bool(0.5) {
        Operand::Attr(random_attr(rng))
    } else {
        Operand::Const(random_value(rng))
    }
}

fn random_condition(rng: &mut StdRng, depth: usize) -> Condition {
    let ops = CompareOp::ALL;
    if depth == 0 || rng.gen_bool(0.5) {
        return Condition::compare(
            random_operand(rng),
            ops[rng.gen_range(0..ops.len())],
            random_operand(rng),
        );
    }
    match rng.gen_range(0..3) {
        0 => Condition::and(
            random_condition(rng, depth - 1),
            random_condition(rng, depth - 1),
        ),
        1 => Condition::or(
            random_condition(rng, depth - 1),
            random_condition(rng, depth - 1),
        ),
        _ => Condition::not(random_condition(rng, depth - 1)),
    }
}

/// Random well-formed (grammar-wise) expression tree; pair with
/// [`crate::parser::render`] and [`crate::parser::parse`] for round-trip
/// checks.
pub fn random_expr(rng: &mut StdRng, depth: usize) -> AlgebraExpr {
    if depth == 0 {
        return AlgebraExpr::base(REL_NAMES[rng.gen_range(0..REL_NAMES.len())]);
    }
    let child = |rng: &mut StdRng| random_expr(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => AlgebraExpr::select(random_condition(rng, 2), child(rng)),
        1 => {
            let mut attrs = Vec::new();
            let mut seen = BTreeSet::new();
            for _ in 0..rng.gen_range(1..=3) {
                let a = random_attr(rng);
                if seen.insert(a.clone()) {
                    attrs.push(a);
                }
            }
            AlgebraExpr::project(attrs, child(rng))
        }
        2 => {
            let from = random_attr(rng);
            let mut to = random_attr(rng);
            while to == from {
                to = random_attr(rng);
            }
            AlgebraExpr::rename(from, to, child(rng))
        }
        3 => {
            let prefixes = ["d", "u", "x", "s2"];
            AlgebraExpr::prefix(prefixes[rng.gen_range(0..prefixes.len())], child(rng))
        }
        4 => AlgebraExpr::product(child(rng), child(rng)),
        5 => AlgebraExpr::join(random_condition(rng, 2), child(rng), child(rng)),
        6 => AlgebraExpr::union(child(rng), child(rng)),
        7 => AlgebraExpr::intersect(child(rng), child(rng)),
        8 => AlgebraExpr::minus(child(rng), child(rng)),
        _ => AlgebraExpr::df(random_attr(rng), random_attr(rng), child(rng)),
    }
}

// ---------------------------------------------------------------------------
// per-rule instances for both-sides verification
// ---------------------------------------------------------------------------

/// A rule application whose side conditions hold on its catalog.
#[derive(Clone, Debug)]
pub struct RuleInstance {
    pub rule: RuleId,
    pub direction: RewriteDirection,
    pub expr: AlgebraExpr,
    pub path: Vec<usize>,
    pub catalog: Catalog,
}

const INT_POOL: [i64; 4] = [1, 2, 5, 7];
const TEXT_VALS: [&str; 3] = ["X", "Y", "Z"];

fn random_base_relation(rng: &mut StdRng, columns: &[(&str, Domain)], rows: usize) -> Relation {
    let schema = Schema::of(columns);
    let mut tuples = Vec::new();
    for _ in 0..rows {
        let mut values = BTreeMap::new();
        for (name, domain) in columns {
            let v = match domain {
                Domain::Integer => Value::Integer(INT_POOL[rng.gen_range(0..INT_POOL.len())]),
                Domain::Decimal => {
                    Value::decimal(f64::from(rng.gen_range(0i32..40)) / 4.0)
                }
                Domain::Timestamp => Value::Timestamp(rng.gen_range(0..240) * 60_000),
                Domain::Text => Value::text(TEXT_VALS[rng.gen_range(0..TEXT_VALS.len())]),
            };
            values.insert(AttrName::new(*name), v);
        }
        tuples.push(Tuple::new(values));
    }
    Relation::new(schema, tuples).expect("generated tuples conform")
}

fn meta_with_stats(relation: &Relation) -> RelationMeta {
    RelationMeta {
        stats: RelationStats {
            events: relation.len() as u64,
            cases: Some(relation.len().max(1) as u64),
            ..RelationStats::default()
        },
        ..RelationMeta::default()
    }
}

/// Comparison over integer attributes/constants available in `attrs`.
fn int_condition(rng: &mut StdRng, attrs: &[&str]) -> Condition {
    let attr = attrs[rng.gen_range(0..attrs.len())];
    let op = CompareOp::ALL[rng.gen_range(0..6)];
    Condition::attr_op_value(
        attr,
        op,
        Value::Integer(INT_POOL[rng.gen_range(0..INT_POOL.len())]),
    )
}

fn class_log_catalog(rng: &mut StdRng, seed: u64) -> Catalog {
    let spec = LogSpec::new(
        rng.gen_range(2..6),
        EventsPerCase::Range(1, 6),
        seed,
    )
    .with_duplicate_rate(0.1)
    .with_attribute(AttrSpec::new(
        "amount",
        AttrClass::Case,
        INT_POOL.iter().map(|v| Value::Integer(*v)).collect(),
    ))
    .with_attribute(AttrSpec::new(
        "bonus",
        AttrClass::Case,
        INT_POOL.iter().map(|v| Value::Integer(*v)).collect(),
    ))
    .with_attribute(AttrSpec::new(
        "marker",
        AttrClass::Event,
        INT_POOL.iter().map(|v| Value::Integer(*v)).collect(),
    ));
    let (relation, meta) = generate_log(&spec);
    let mut catalog = Catalog::new();
    catalog.insert("Log", relation, meta);
    catalog
}

fn plain_rule_instance(rule: RuleId, seed: u64) -> RuleInstance {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed_0000);
    let rows = |rng: &mut StdRng| rng.gen_range(0..10);

    let r_cols: &[(&str, Domain)] = &[
        ("r1", Domain::Integer),
        ("r2", Domain::Integer),
        ("r3", Domain::Text),
    ];
    let s_cols: &[(&str, Domain)] = &[("s1", Domain::Integer), ("s2", Domain::Text)];
    let t_cols: &[(&str, Domain)] = &[("t1", Domain::Integer), ("t2", Domain::Text)];

    let mut catalog = Catalog::new();
    let n_r = rows(&mut rng);
    let r_rel = random_base_relation(&mut rng, r_cols, n_r);
    let n_s = rows(&mut rng);
    let s_rel = random_base_relation(&mut rng, s_cols, n_s);
    let n_t = rows(&mut rng);
    let t_rel = random_base_relation(&mut rng, t_cols, n_t);
    let n_r2 = rows(&mut rng);
    let r2_rel = random_base_relation(&mut rng, r_cols, n_r2);
    let r_meta = meta_with_stats(&r_rel);
    catalog.insert("R", r_rel.clone(), r_meta);
    catalog.insert("S", s_rel.clone(), meta_with_stats(&s_rel));
    catalog.insert("T", t_rel.clone(), meta_with_stats(&t_rel));
    catalog.insert("R2", r2_rel.clone(), meta_with_stats(&r2_rel));

    let base = AlgebraExpr::base;
    let r_attrs = ["r1", "r2"];
    let join_rs = || {
        AlgebraExpr::join(
            Condition::attr_op_attr("r1", CompareOp::Eq, "s1"),
            base("R"),
            base("S"),
        )
    };

    let expr = match rule {
        RuleId::E1 => AlgebraExpr::select(
            Condition::and(
                int_condition(&mut rng, &r_attrs),
                int_condition(&mut rng, &r_attrs),
            ),
            base("R"),
        ),
        RuleId::E2 => AlgebraExpr::select(
            int_condition(&mut rng, &r_attrs),
            AlgebraExpr::select(int_condition(&mut rng, &r_attrs), base("R")),
        ),
        RuleId::E3 => AlgebraExpr::join(
            Condition::attr_op_attr("r1", CompareOp::ALL[rng.gen_range(0..6)], "s1"),
            base("R"),
            base("S"),
        ),
        RuleId::E4 => AlgebraExpr::join(
            Condition::attr_op_attr("s1", CompareOp::Le, "t1"),
            join_rs(),
            base("T"),
        ),
        RuleId::E5 => AlgebraExpr::select(int_condition(&mut rng, &r_attrs), join_rs()),
        RuleId::E6 => AlgebraExpr::select(
            int_condition(&mut rng, &r_attrs),
            AlgebraExpr::minus(base("R"), base("R2")),
        ),
        RuleId::E7 => AlgebraExpr::select(
            int_condition(&mut rng, &["z", "r2"]),
            AlgebraExpr::rename("r1", "z", base("R")),
        ),
        RuleId::E8 => AlgebraExpr::project(
            vec!["z".into(), "r3".into()],
            AlgebraExpr::rename("r1", "z", base("R")),
        ),
        RuleId::E9 => AlgebraExpr::project(
            vec!["r1".into(), "r3".into()],
            AlgebraExpr::select(int_condition(&mut rng, &["r1"]), base("R")),
        ),
        RuleId::E10 => AlgebraExpr::project(
            vec!["r1".into(), "s1".into()],
            AlgebraExpr::join(
                Condition::attr_op_attr("r1", CompareOp::Eq, "s1"),
                base("R"),
                base("S"),
            ),
        ),
        RuleId::E11 => AlgebraExpr::project(
            vec!["r1".into()],
            AlgebraExpr::project(vec!["r1".into(), "r3".into()], base("R")),
        ),
        RuleId::E12 => AlgebraExpr::project(
            vec!["r3".into(), "r1".into()],
            AlgebraExpr::project(vec!["r1".into(), "r3".into()], base("R")),
        ),
        RuleId::E13 => AlgebraExpr::rename(
            "r1",
            "z",
            AlgebraExpr::join(
                Condition::attr_op_attr("r1", CompareOp::ALL[rng.gen_range(0..6)], "s1"),
                base("R"),
                base("S"),
            ),
        ),
        RuleId::E14 => AlgebraExpr::project(
            vec!["r3".into(), "r1".into(), "r2".into()],
            base("R"),
        ),
        RuleId::E15 | RuleId::P20 => {
            // built below with a catalog that actually satisfies totality
            unreachable!("handled before the match")
        }
        RuleId::E16 => AlgebraExpr::join(
            Condition::attr_op_attr("r1", CompareOp::Ge, "s1"),
            AlgebraExpr::minus(base("R"), base("R2")),
            base("S"),
        ),
        RuleId::P17 | RuleId::P18 | RuleId::P19 => {
            unreachable!("handled before the match")
        }
    };

    RuleInstance {
        rule,
        direction: RewriteDirection::Forward,
        expr,
        path: vec![],
        catalog,
    }
}

/// Like [`rule_instance`] but for the rules needing class declarations or
/// totality facts; exposed through the same entry point.
fn class_rule_instance(rule: RuleId, seed: u64) -> RuleInstance {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x0bad_5eed);
    match rule {
        RuleId::P17 => {
            let catalog = class_log_catalog(&mut rng, seed);
            let attr = if rng.gen_bool(0.7) { "amount" } else { "marker" };
            let expr = AlgebraExpr::df(
                "case",
                "end_time",
                AlgebraExpr::select(int_condition(&mut rng, &[attr]), AlgebraExpr::base("Log")),
            );
            RuleInstance {
                rule,
                direction: RewriteDirection::Forward,
                expr,
                path: vec![],
                catalog,
            }
        }
        RuleId::P18 => {
            let catalog = class_log_catalog(&mut rng, seed);
            let pairs = [("amount", "bonus"), ("amount", "marker"), ("marker", "bonus")];
            let (a, b) = pairs[rng.gen_range(0..pairs.len())];
            let op = CompareOp::ALL[rng.gen_range(0..6)];
            let expr = AlgebraExpr::df(
                "case",
                "end_time",
                AlgebraExpr::select(
                    Condition::attr_op_attr(a, op, b),
                    AlgebraExpr::base("Log"),
                ),
            );
            RuleInstance {
                rule,
                direction: RewriteDirection::Forward,
                expr,
                path: vec![],
                catalog,
            }
        }
        RuleId::P19 => {
            let catalog = class_log_catalog(&mut rng, seed);
            let mut attrs: Vec<AttrName> = vec!["case".into(), "end_time".into()];
            for extra in ["amount", "activity"] {
                if rng.gen_bool(0.6) {
                    attrs.push(extra.into());
                }
            }
            let expr = AlgebraExpr::df(
                "case",
                "end_time",
                AlgebraExpr::project(attrs, AlgebraExpr::base("Log")),
            );
            RuleInstance {
                rule,
                direction: RewriteDirection::Forward,
                expr,
                path: vec![],
                catalog,
            }
        }
        RuleId::E15 | RuleId::P20 => {
            // Log joined to a dimension table on resource = name; the
            // dimension holds every pool value, so the join keeps every
            // log tuple, and the fact is declared.
            let pool: Vec<Value> = TEXT_VALS.iter().map(|v| Value::text(*v)).collect();
            let spec = LogSpec::new(rng.gen_range(2..6), EventsPerCase::Range(1, 6), seed)
                .with_duplicate_rate(0.1)
                .with_attribute(AttrSpec::new("resource", AttrClass::Other, pool.clone()));
            let (log, mut log_meta) = generate_log(&spec);

            let dim_schema = Schema::of(&[("name", Domain::Text), ("team", Domain::Text)]);
            let dim_tuples: Vec<Tuple> = pool
                .iter()
                .map(|v| {
                    Tuple::of(vec![
                        ("name", v.clone()),
                        (
                            "team",
                            Value::text(TEXT_VALS[rng.gen_range(0..TEXT_VALS.len())]),
                        ),
                    ])
                })
                .collect();
            let dim = Relation::new(dim_schema, dim_tuples).expect("dimension conforms");

            let condition = Condition::attr_op_attr("resource", CompareOp::Eq, "name");
            log_meta
                .totality_facts
                .insert(TotalityFact::new("Log", "Res", &condition));

            let mut catalog = Catalog::new();
            catalog.insert("Log", log, log_meta);
            let dim_meta = meta_with_stats(&dim);
            catalog.insert("Res", dim, dim_meta);

            let join = AlgebraExpr::join(
                condition,
                AlgebraExpr::base("Log"),
                AlgebraExpr::base("Res"),
            );
            let expr = match rule {
                RuleId::E15 => AlgebraExpr::project(
                    vec![
                        "case".into(),
                        "activity".into(),
                        "start_time".into(),
                        "end_time".into(),
                        "resource".into(),
                    ],
                    join,
                ),
                _ => AlgebraExpr::df("case", "end_time", join),
            };
            RuleInstance {
                rule,
                direction: RewriteDirection::Forward,
                expr,
                path: vec![],
                catalog,
            }
        }
        other => plain_rule_instance(other, seed),
    }
}

/// Build a seeded instance of `rule` (applied left-to-right at the root)
/// whose side conditions hold on the returned catalog.
pub fn instance_for(rule: RuleId, seed: u64) -> RuleInstance {
    match rule {
        RuleId::P17 | RuleId::P18 | RuleId::P19 | RuleId::E15 | RuleId::P20 => {
            class_rule_instance(rule, seed)
        }
        other => plain_rule_instance(other, seed),
    }
}

/// Relations for the restricted projection/set-minus property: `R` with a
/// key column that uniquely identifies tuples, and `S` a subset of `R`.
pub fn projection_minus_instance(seed: u64) -> (Relation, Relation, Vec<AttrName>) {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x7e57_0000);
    let schema = Schema::of(&[("k", Domain::Integer), ("v", Domain::Text)]);
    let n = rng.gen_range(0..12);
    let tuples: Vec<Tuple> = (0..n)
        .map(|i| {
            Tuple::of(vec![
                ("k", Value::Integer(i)),
                (
                    "v",
                    Value::text(TEXT_VALS[rng.gen_range(0..TEXT_VALS.len())]),
                ),
            ])
        })
        .collect();
    let r = Relation::new(schema.clone(), tuples.clone()).expect("conforms");
    let subset: Vec<Tuple> = tuples
        .into_iter()
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    let s = Relation::new(schema, subset).expect("conforms");
    (r, s, vec![AttrName::new("k")])
}
