//! Schemas, typed values, tuples, and set-semantics relations.
//!
//! Everything here is immutable after construction: operations that "modify"
//! a relation return a new one, so relations can be shared across threads
//! freely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use ordered_float::OrderedFloat;
use thiserror::Error;

/// Attribute name. Unique within a schema. Cheap to clone; tuples carry many
/// copies of each name.
///
/// Prefixed forms like `d.case` / `u.case` are ordinary names with dots in
/// them; the `d.` / `u.` prefixes are reserved for the engine and rejected in
/// user-supplied base schemas.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrName(Arc<str>);

impl AttrName {
    pub fn new(name: impl AsRef<str>) -> Self {
        let name = name.as_ref();
        assert!(!name.is_empty(), "attribute names must be non-empty");
        AttrName(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Name with `prefix.` prepended, e.g. `case` with prefix `d` gives
    /// `d.case`.
    pub fn prefixed(&self, prefix: &str) -> AttrName {
        AttrName(Arc::from(format!("{prefix}.{}", self.0)))
    }

    /// True if this name starts with one of the reserved engine prefixes.
    pub fn has_reserved_prefix(&self) -> bool {
        self.0.starts_with("d.") || self.0.starts_with("u.")
    }
}

impl fmt::Display for AttrName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AttrName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AttrName({})", self.0)
    }
}

impl From<&str> for AttrName {
    fn from(s: &str) -> Self {
        AttrName::new(s)
    }
}

impl From<String> for AttrName {
    fn from(s: String) -> Self {
        AttrName::new(s)
    }
}

/// Domain tag for a schema attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Integer,
    Decimal,
    Timestamp,
    Text,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::Integer => "integer",
            Domain::Decimal => "decimal",
            Domain::Timestamp => "timestamp",
            Domain::Text => "text",
        };
        f.write_str(s)
    }
}

/// A single attribute value.
///
/// Timestamps are milliseconds since the Unix epoch, UTC. `Absent` encodes
/// "no value for this event"; it conforms to every domain.
///
/// The derived `Ord` is a *structural* total order (variant rank, then value
/// within the variant) used for canonical storage and deterministic display.
/// Condition semantics live in [`theta_compare`], which treats cross-variant
/// comparisons as type errors and makes `Absent` fail every comparison.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Integer(i64),
    Decimal(OrderedFloat<f64>),
    Timestamp(i64),
    Text(Arc<str>),
    Absent,
}

impl Value {
    pub fn decimal(v: f64) -> Value {
        Value::Decimal(OrderedFloat(v))
    }

    pub fn text(v: impl AsRef<str>) -> Value {
        Value::Text(Arc::from(v.as_ref()))
    }

    /// Domain of the value; `None` for `Absent`.
    pub fn domain(&self) -> Option<Domain> {
        match self {
            Value::Integer(_) => Some(Domain::Integer),
            Value::Decimal(_) => Some(Domain::Decimal),
            Value::Timestamp(_) => Some(Domain::Timestamp),
            Value::Text(_) => Some(Domain::Text),
            Value::Absent => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Value::Absent)
    }

    /// Whether the value may appear in a column of the given domain.
    pub fn conforms_to(&self, domain: Domain) -> bool {
        match self.domain() {
            None => true,
            Some(d) => d == domain,
        }
    }
}

/// Binary comparison operator of a condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Gt,
    Ge,
    Eq,
    Ne,
    Le,
    Lt,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Gt,
        CompareOp::Ge,
        CompareOp::Eq,
        CompareOp::Ne,
        CompareOp::Le,
        CompareOp::Lt,
    ];

    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Le => "<=",
            CompareOp::Lt => "<",
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Cross-variant comparison attempted at evaluation time.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("cannot compare {left} with {right}")]
pub struct CompareTypeError {
    pub left: Domain,
    pub right: Domain,
}

/// Evaluate `a θ b` with the engine's value semantics: `Absent` compared to
/// anything (including `Absent`) is false for every operator, and comparing
/// two different concrete variants is a type error rather than false.
pub fn theta_compare(op: CompareOp, a: &Value, b: &Value) -> Result<bool, CompareTypeError> {
    let (da, db) = match (a.domain(), b.domain()) {
        (Some(da), Some(db)) => (da, db),
        _ => return Ok(false),
    };
    if da != db {
        return Err(CompareTypeError {
            left: da,
            right: db,
        });
    }
    let ord = a.cmp(b);
    Ok(match op {
        CompareOp::Gt => ord.is_gt(),
        CompareOp::Ge => ord.is_ge(),
        CompareOp::Eq => ord.is_eq(),
        CompareOp::Ne => ord.is_ne(),
        CompareOp::Le => ord.is_le(),
        CompareOp::Lt => ord.is_lt(),
    })
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("duplicate attribute name '{0}' in schema")]
    DuplicateAttribute(AttrName),
    #[error("tuple is missing attribute '{0}'")]
    MissingAttribute(AttrName),
    #[error("tuple has attribute '{0}' that is not in the schema")]
    UnexpectedAttribute(AttrName),
    #[error("value for '{attr}' has domain {found}, schema requires {expected}")]
    DomainMismatch {
        attr: AttrName,
        expected: Domain,
        found: Domain,
    },
}

/// A schema: a set of named, typed attributes. The stored order is only used
/// for display; equality is set equality of `(name, domain)` pairs.
#[derive(Clone, Debug, Eq)]
pub struct Schema {
    attrs: Vec<(AttrName, Domain)>,
}

impl Schema {
    pub fn new(attrs: Vec<(AttrName, Domain)>) -> Result<Schema, RelationError> {
        let mut seen = BTreeSet::new();
        for (name, _) in &attrs {
            if !seen.insert(name.clone()) {
                return Err(RelationError::DuplicateAttribute(name.clone()));
            }
        }
        Ok(Schema { attrs })
    }

    /// Convenience constructor from `(&str, Domain)` pairs; panics on
    /// duplicates, so only use with literals.
    pub fn of(attrs: &[(&str, Domain)]) -> Schema {
        Schema::new(
            attrs
                .iter()
                .map(|(n, d)| (AttrName::new(*n), *d))
                .collect(),
        )
        .expect("schema literal has duplicate attributes")
    }

    pub fn attrs(&self) -> &[(AttrName, Domain)] {
        &self.attrs
    }

    pub fn names(&self) -> impl Iterator<Item = &AttrName> {
        self.attrs.iter().map(|(n, _)| n)
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn contains(&self, name: &AttrName) -> bool {
        self.attrs.iter().any(|(n, _)| n == name)
    }

    pub fn domain_of(&self, name: &AttrName) -> Option<Domain> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, d)| *d)
    }

    pub fn name_set(&self) -> BTreeSet<AttrName> {
        self.names().cloned().collect()
    }

    /// Schema with every attribute name prefixed (`case` -> `d.case`).
    pub fn prefixed(&self, prefix: &str) -> Schema {
        Schema {
            attrs: self
                .attrs
                .iter()
                .map(|(n, d)| (n.prefixed(prefix), *d))
                .collect(),
        }
    }

    /// Schema restricted to `names`, in the order of `names`.
    /// Callers must have checked that every name exists.
    pub fn restricted(&self, names: &[AttrName]) -> Schema {
        Schema {
            attrs: names
                .iter()
                .map(|n| {
                    let d = self
                        .domain_of(n)
                        .expect("restricted: attribute not in schema");
                    (n.clone(), d)
                })
                .collect(),
        }
    }

    /// Schema with attribute `from` renamed to `to`, order preserved.
    pub fn renamed(&self, from: &AttrName, to: &AttrName) -> Schema {
        Schema {
            attrs: self
                .attrs
                .iter()
                .map(|(n, d)| {
                    if n == from {
                        (to.clone(), *d)
                    } else {
                        (n.clone(), *d)
                    }
                })
                .collect(),
        }
    }

    /// Concatenation of two schemas with disjoint names.
    pub fn concat(&self, other: &Schema) -> Result<Schema, RelationError> {
        let mut attrs = self.attrs.clone();
        attrs.extend(other.attrs.iter().cloned());
        Schema::new(attrs)
    }
}

impl PartialEq for Schema {
    fn eq(&self, other: &Schema) -> bool {
        if self.attrs.len() != other.attrs.len() {
            return false;
        }
        let a: BTreeSet<_> = self.attrs.iter().collect();
        let b: BTreeSet<_> = other.attrs.iter().collect();
        a == b
    }
}

/// A tuple: a total mapping from the schema's attribute names to values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tuple {
    values: BTreeMap<AttrName, Value>,
}

impl Tuple {
    pub fn new(values: BTreeMap<AttrName, Value>) -> Tuple {
        Tuple { values }
    }

    /// Build from `(&str, Value)` pairs, for fixtures and tests.
    pub fn of(pairs: Vec<(&str, Value)>) -> Tuple {
        Tuple {
            values: pairs
                .into_iter()
                .map(|(n, v)| (AttrName::new(n), v))
                .collect(),
        }
    }

    pub fn get(&self, name: &AttrName) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AttrName, &Value)> {
        self.values.iter()
    }

    /// Tuple with every attribute name prefixed.
    pub fn prefixed(&self, prefix: &str) -> Tuple {
        Tuple {
            values: self
                .values
                .iter()
                .map(|(n, v)| (n.prefixed(prefix), v.clone()))
                .collect(),
        }
    }

    /// Tuple restricted to the given attribute names.
    pub fn projected(&self, names: &[AttrName]) -> Tuple {
        Tuple {
            values: names
                .iter()
                .map(|n| {
                    (
                        n.clone(),
                        self.values
                            .get(n)
                            .expect("projected: attribute not in tuple")
                            .clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn renamed(&self, from: &AttrName, to: &AttrName) -> Tuple {
        Tuple {
            values: self
                .values
                .iter()
                .map(|(n, v)| {
                    if n == from {
                        (to.clone(), v.clone())
                    } else {
                        (n.clone(), v.clone())
                    }
                })
                .collect(),
        }
    }

    /// Concatenation of two tuples with disjoint attribute names.
    pub fn concat(&self, other: &Tuple) -> Tuple {
        let mut values = self.values.clone();
        for (n, v) in &other.values {
            values.insert(n.clone(), v.clone());
        }
        Tuple { values }
    }

    fn check_against(&self, schema: &Schema) -> Result<(), RelationError> {
        for (name, domain) in schema.attrs() {
            match self.values.get(name) {
                None => return Err(RelationError::MissingAttribute(name.clone())),
                Some(v) => {
                    if !v.conforms_to(*domain) {
                        return Err(RelationError::DomainMismatch {
                            attr: name.clone(),
                            expected: *domain,
                            found: v.domain().expect("absent conforms to everything"),
                        });
                    }
                }
            }
        }
        if self.values.len() != schema.len() {
            let extra = self
                .values
                .keys()
                .find(|n| !schema.contains(n))
                .expect("length mismatch implies an extra key");
            return Err(RelationError::UnexpectedAttribute(extra.clone()));
        }
        Ok(())
    }
}

/// A relation: a schema plus a set of conforming tuples. Duplicate
/// elimination is eager on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    schema: Schema,
    tuples: BTreeSet<Tuple>,
}

impl Relation {
    pub fn empty(schema: Schema) -> Relation {
        Relation {
            schema,
            tuples: BTreeSet::new(),
        }
    }

    pub fn new(
        schema: Schema,
        tuples: impl IntoIterator<Item = Tuple>,
    ) -> Result<Relation, RelationError> {
        let mut set = BTreeSet::new();
        for t in tuples {
            t.check_against(&schema)?;
            set.insert(t);
        }
        Ok(Relation {
            schema,
            tuples: set,
        })
    }

    /// Like [`Relation::new`] but skips conformance checks. Only for code
    /// paths that construct tuples directly from a known schema.
    pub(crate) fn from_parts_unchecked(schema: Schema, tuples: BTreeSet<Tuple>) -> Relation {
        Relation { schema, tuples }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tuples(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.tuples.contains(t)
    }
}

/// True iff the schemas are equal as sets and the tuple sets are equal.
pub fn relation_equal(a: &Relation, b: &Relation) -> bool {
    a.schema == b.schema && a.tuples == b.tuples
}

/// Returns a new relation containing `t`. Inserting a duplicate is a no-op.
pub fn insert_tuple(r: &Relation, t: Tuple) -> Result<Relation, RelationError> {
    t.check_against(&r.schema)?;
    let mut tuples = r.tuples.clone();
    tuples.insert(t);
    Ok(Relation {
        schema: r.schema.clone(),
        tuples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minutes(m: i64) -> Value {
        Value::Timestamp(m * 60_000)
    }

    fn log_schema() -> Schema {
        Schema::of(&[
            ("case", Domain::Integer),
            ("activity", Domain::Text),
            ("start_time", Domain::Timestamp),
            ("end_time", Domain::Timestamp),
        ])
    }

    fn row(case: i64, act: &str, start: i64, end: i64) -> Tuple {
        Tuple::of(vec![
            ("case", Value::Integer(case)),
            ("activity", Value::text(act)),
            ("start_time", minutes(start)),
            ("end_time", minutes(end)),
        ])
    }

    #[test]
    fn insert_is_idempotent() {
        let r = Relation::empty(log_schema());
        let t = row(1, "A", 20, 22);
        let once = insert_tuple(&r, t.clone()).unwrap();
        assert_eq!(once.len(), 1);
        let twice = insert_tuple(&once, t).unwrap();
        assert!(relation_equal(&once, &twice));
    }

    #[test]
    fn insert_rejects_missing_attribute() {
        let r = Relation::empty(log_schema());
        let t = Tuple::of(vec![
            ("case", Value::Integer(1)),
            ("activity", Value::text("A")),
            ("start_time", minutes(20)),
        ]);
        assert_eq!(
            insert_tuple(&r, t),
            Err(RelationError::MissingAttribute(AttrName::new("end_time")))
        );
    }

    #[test]
    fn insert_rejects_wrong_domain() {
        let r = Relation::empty(log_schema());
        let t = Tuple::of(vec![
            ("case", Value::text("one")),
            ("activity", Value::text("A")),
            ("start_time", minutes(20)),
            ("end_time", minutes(22)),
        ]);
        assert!(matches!(
            insert_tuple(&r, t),
            Err(RelationError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn absent_conforms_to_any_domain() {
        let r = Relation::empty(log_schema());
        let t = Tuple::of(vec![
            ("case", Value::Integer(1)),
            ("activity", Value::Absent),
            ("start_time", minutes(20)),
            ("end_time", minutes(22)),
        ]);
        assert!(insert_tuple(&r, t).is_ok());
    }

    #[test]
    fn relation_equality_ignores_row_and_column_order() {
        let rows = vec![row(1, "A", 20, 22), row(1, "B", 124, 128)];
        let a = Relation::new(log_schema(), rows.clone()).unwrap();
        let reordered_schema = Schema::of(&[
            ("end_time", Domain::Timestamp),
            ("case", Domain::Integer),
            ("activity", Domain::Text),
            ("start_time", Domain::Timestamp),
        ]);
        let b = Relation::new(reordered_schema, rows.into_iter().rev().collect::<Vec<_>>()).unwrap();
        assert!(relation_equal(&a, &b));
    }

    #[test]
    fn subset_is_not_equal() {
        let a = Relation::new(log_schema(), vec![row(1, "A", 20, 22), row(2, "A", 135, 140)])
            .unwrap();
        let b = Relation::new(log_schema(), vec![row(1, "A", 20, 22)]).unwrap();
        assert!(!relation_equal(&a, &b));
    }

    #[test]
    fn schema_rejects_duplicates() {
        let err = Schema::new(vec![
            (AttrName::new("a"), Domain::Integer),
            (AttrName::new("a"), Domain::Text),
        ]);
        assert_eq!(err, Err(RelationError::DuplicateAttribute(AttrName::new("a"))));
    }

    #[test]
    fn absent_fails_every_comparison() {
        let samples = [
            Value::Integer(1),
            Value::decimal(2.5),
            Value::Timestamp(0),
            Value::text("x"),
            Value::Absent,
        ];
        for op in CompareOp::ALL {
            for v in &samples {
                assert_eq!(theta_compare(op, &Value::Absent, v), Ok(false));
                assert_eq!(theta_compare(op, v, &Value::Absent), Ok(false));
            }
        }
    }

    #[test]
    fn cross_variant_comparison_is_a_type_error() {
        for op in CompareOp::ALL {
            assert!(theta_compare(op, &Value::Integer(1), &Value::text("1")).is_err());
            assert!(theta_compare(op, &Value::Timestamp(1), &Value::Integer(1)).is_err());
        }
    }

    fn arb_value_pair() -> impl Strategy<Value = (Value, Value)> {
        prop_oneof![
            (any::<i64>(), any::<i64>()).prop_map(|(a, b)| (Value::Integer(a), Value::Integer(b))),
            (-1e12f64..1e12, -1e12f64..1e12)
                .prop_map(|(a, b)| (Value::decimal(a), Value::decimal(b))),
            (any::<i64>(), any::<i64>())
                .prop_map(|(a, b)| (Value::Timestamp(a), Value::Timestamp(b))),
            ("[a-z]{0,6}", "[a-z]{0,6}").prop_map(|(a, b)| (Value::text(a), Value::text(b))),
        ]
    }

    proptest! {
        #[test]
        fn ordering_is_antisymmetric((a, b) in arb_value_pair()) {
            let lt = theta_compare(CompareOp::Lt, &a, &b).unwrap();
            let gt = theta_compare(CompareOp::Gt, &a, &b).unwrap();
            let eq = theta_compare(CompareOp::Eq, &a, &b).unwrap();
            // exactly one of <, =, > holds
            prop_assert_eq!([lt, eq, gt].iter().filter(|x| **x).count(), 1);
            // symmetry of = and duality of < / >
            prop_assert_eq!(eq, theta_compare(CompareOp::Eq, &b, &a).unwrap());
            prop_assert_eq!(lt, theta_compare(CompareOp::Gt, &b, &a).unwrap());
        }

        #[test]
        fn ordering_is_transitive(
            ((a, b), (_, c)) in (arb_value_pair(), arb_value_pair())
        ) {
            // keep all three in one variant: reuse a's variant for c when they differ
            let c = match (&a, &c) {
                (Value::Integer(_), Value::Integer(_))
                | (Value::Decimal(_), Value::Decimal(_))
                | (Value::Timestamp(_), Value::Timestamp(_))
                | (Value::Text(_), Value::Text(_)) => c,
                _ => a.clone(),
            };
            let ab = theta_compare(CompareOp::Le, &a, &b).unwrap();
            let bc = theta_compare(CompareOp::Le, &b, &c).unwrap();
            if ab && bc {
                prop_assert!(theta_compare(CompareOp::Le, &a, &c).unwrap());
            }
        }
    }
}
