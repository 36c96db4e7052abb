//! The immutable expression tree for queries: selection, projection,
//! renaming, products, joins, the set operators, and the composite
//! `directly follows` operator, plus condition formulas and schema
//! inference over whole trees.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::relation::{theta_compare, AttrName, CompareOp, CompareTypeError, Domain, Schema, Value};

/// One side of a binary comparison: an attribute reference or a constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Attr(AttrName),
    Const(Value),
}

impl Operand {
    pub fn attr(name: impl Into<AttrName>) -> Operand {
        Operand::Attr(name.into())
    }
}

/// Boolean condition formula over binary comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Compare {
        lhs: Operand,
        op: CompareOp,
        rhs: Operand,
    },
    And(Arc<Condition>, Arc<Condition>),
    Or(Arc<Condition>, Arc<Condition>),
    Not(Arc<Condition>),
}

impl Condition {
    pub fn compare(lhs: Operand, op: CompareOp, rhs: Operand) -> Condition {
        Condition::Compare { lhs, op, rhs }
    }

    /// `attr θ constant`, the shape used throughout the rewrite rules.
    pub fn attr_op_value(attr: impl Into<AttrName>, op: CompareOp, value: Value) -> Condition {
        Condition::Compare {
            lhs: Operand::Attr(attr.into()),
            op,
            rhs: Operand::Const(value),
        }
    }

    /// `attr θ attr`.
    pub fn attr_op_attr(
        lhs: impl Into<AttrName>,
        op: CompareOp,
        rhs: impl Into<AttrName>,
    ) -> Condition {
        Condition::Compare {
            lhs: Operand::Attr(lhs.into()),
            op,
            rhs: Operand::Attr(rhs.into()),
        }
    }

    pub fn and(a: Condition, b: Condition) -> Condition {
        Condition::And(Arc::new(a), Arc::new(b))
    }

    pub fn or(a: Condition, b: Condition) -> Condition {
        Condition::Or(Arc::new(a), Arc::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Condition) -> Condition {
        Condition::Not(Arc::new(a))
    }

    /// Left-associative conjunction of all given conditions.
    pub fn conjunction(parts: Vec<Condition>) -> Condition {
        let mut iter = parts.into_iter();
        let first = iter.next().expect("conjunction of no conditions");
        iter.fold(first, Condition::and)
    }

    /// The set of attribute names mentioned anywhere in the formula.
    pub fn attrs(&self) -> BTreeSet<AttrName> {
        let mut out = BTreeSet::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs(&self, out: &mut BTreeSet<AttrName>) {
        match self {
            Condition::Compare { lhs, rhs, .. } => {
                if let Operand::Attr(a) = lhs {
                    out.insert(a.clone());
                }
                if let Operand::Attr(a) = rhs {
                    out.insert(a.clone());
                }
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
            Condition::Not(a) => a.collect_attrs(out),
        }
    }

    /// Condition with every occurrence of attribute `from` replaced by `to`.
    pub fn rename_attr(&self, from: &AttrName, to: &AttrName) -> Condition {
        let sub = |o: &Operand| match o {
            Operand::Attr(a) if a == from => Operand::Attr(to.clone()),
            other => other.clone(),
        };
        match self {
            Condition::Compare { lhs, op, rhs } => Condition::Compare {
                lhs: sub(lhs),
                op: *op,
                rhs: sub(rhs),
            },
            Condition::And(a, b) => {
                Condition::and(a.rename_attr(from, to), b.rename_attr(from, to))
            }
            Condition::Or(a, b) => Condition::or(a.rename_attr(from, to), b.rename_attr(from, to)),
            Condition::Not(a) => Condition::not(a.rename_attr(from, to)),
        }
    }

    /// Evaluate against an attribute lookup. Two-valued logic: comparisons
    /// involving `Absent` are false, negation flips the result.
    pub fn eval_with<'a, F>(&self, lookup: &F) -> Result<bool, CompareTypeError>
    where
        F: Fn(&AttrName) -> Option<&'a Value>,
    {
        match self {
            Condition::Compare { lhs, op, rhs } => {
                let resolve = |o: &Operand| -> Value {
                    match o {
                        Operand::Const(v) => v.clone(),
                        Operand::Attr(a) => lookup(a).cloned().unwrap_or(Value::Absent),
                    }
                };
                theta_compare(*op, &resolve(lhs), &resolve(rhs))
            }
            Condition::And(a, b) => Ok(a.eval_with(lookup)? && b.eval_with(lookup)?),
            Condition::Or(a, b) => Ok(a.eval_with(lookup)? || b.eval_with(lookup)?),
            Condition::Not(a) => Ok(!a.eval_with(lookup)?),
        }
    }

    /// Evaluate against a tuple.
    pub fn eval(&self, tuple: &crate::relation::Tuple) -> Result<bool, CompareTypeError> {
        self.eval_with(&|name| tuple.get(name))
    }
}

/// Infix rendering with minimal parentheses: `|` binds loosest, then `&`,
/// then `!`.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Condition {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = match self {
            Condition::Or(..) => 1,
            Condition::And(..) => 2,
            Condition::Not(..) => 3,
            Condition::Compare { .. } => 4,
        };
        let parens = prec < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Condition::Compare { lhs, op, rhs } => {
                write!(f, "{} {} {}", render_operand(lhs), op, render_operand(rhs))?;
            }
            Condition::And(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" & ")?;
                b.fmt_prec(f, 3)?;
            }
            Condition::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" | ")?;
                b.fmt_prec(f, 2)?;
            }
            Condition::Not(a) => {
                f.write_str("!")?;
                a.fmt_prec(f, 4)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn render_operand(o: &Operand) -> String {
    match o {
        Operand::Attr(a) => a.to_string(),
        Operand::Const(v) => render_value_literal(v),
    }
}

/// Literal syntax for a value, as accepted by the query parser.
pub fn render_value_literal(v: &Value) -> String {
    match v {
        Value::Integer(i) => i.to_string(),
        Value::Decimal(d) => {
            let s = d.0.to_string();
            if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
                s
            } else {
                format!("{s}.0")
            }
        }
        Value::Timestamp(ms) => render_timestamp(*ms),
        Value::Text(s) => {
            if s.contains('\'') {
                format!("\"{s}\"")
            } else {
                format!("'{s}'")
            }
        }
        Value::Absent => "''".to_string(), // unreachable from the parser
    }
}

/// `HH:MM` for whole minutes within the anchor day, ISO-8601 otherwise.
pub fn render_timestamp(ms: i64) -> String {
    const DAY: i64 = 86_400_000;
    const MINUTE: i64 = 60_000;
    if (0..DAY).contains(&ms) && ms % MINUTE == 0 {
        let minutes = ms / MINUTE;
        return format!("{:02}:{:02}", minutes / 60, minutes % 60);
    }
    let secs = ms.div_euclid(1000);
    let millis = (ms.rem_euclid(1000)) as u32;
    let dt = chrono::DateTime::from_timestamp(secs, millis * 1_000_000)
        .expect("timestamp out of chrono range");
    if millis == 0 {
        dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
    }
}

/// A relational algebra expression. Children are reference-counted so
/// rewrites can share unchanged subtrees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraExpr {
    /// Named base relation, resolved through a catalog.
    BaseRel(String),
    Select {
        condition: Condition,
        input: Arc<AlgebraExpr>,
    },
    Project {
        attrs: Vec<AttrName>,
        input: Arc<AlgebraExpr>,
    },
    RenameAttr {
        from: AttrName,
        to: AttrName,
        input: Arc<AlgebraExpr>,
    },
    /// Prefix every attribute name with `prefix.`.
    RenamePrefix {
        prefix: String,
        input: Arc<AlgebraExpr>,
    },
    Product {
        left: Arc<AlgebraExpr>,
        right: Arc<AlgebraExpr>,
    },
    Join {
        condition: Condition,
        left: Arc<AlgebraExpr>,
        right: Arc<AlgebraExpr>,
    },
    Union {
        left: Arc<AlgebraExpr>,
        right: Arc<AlgebraExpr>,
    },
    Intersect {
        left: Arc<AlgebraExpr>,
        right: Arc<AlgebraExpr>,
    },
    Minus {
        left: Arc<AlgebraExpr>,
        right: Arc<AlgebraExpr>,
    },
    /// Pairs of events that directly follow each other per case, with the
    /// earlier event's attributes `d.`-prefixed and the later `u.`-prefixed.
    DirectlyFollows {
        case_attr: AttrName,
        time_attr: AttrName,
        input: Arc<AlgebraExpr>,
    },
}

impl AlgebraExpr {
    pub fn base(name: impl Into<String>) -> AlgebraExpr {
        AlgebraExpr::BaseRel(name.into())
    }

    pub fn select(condition: Condition, input: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Select {
            condition,
            input: Arc::new(input),
        }
    }

    pub fn project(attrs: Vec<AttrName>, input: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Project {
            attrs,
            input: Arc::new(input),
        }
    }

    pub fn rename(
        from: impl Into<AttrName>,
        to: impl Into<AttrName>,
        input: AlgebraExpr,
    ) -> AlgebraExpr {
        AlgebraExpr::RenameAttr {
            from: from.into(),
            to: to.into(),
            input: Arc::new(input),
        }
    }

    pub fn prefix(prefix: impl Into<String>, input: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::RenamePrefix {
            prefix: prefix.into(),
            input: Arc::new(input),
        }
    }

    pub fn product(left: AlgebraExpr, right: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Product {
            left: Arc::new(left),
            right: Arc::new(right),
        }
    }

    pub fn join(condition: Condition, left: AlgebraExpr, right: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Join {
            condition,
            left: Arc::new(left),
            right: Arc::new(right),
        }
    }

    pub fn union(left: AlgebraExpr, right: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Union {
            left: Arc::new(left),
            right: Arc::new(right),
        }
    }

    pub fn intersect(left: AlgebraExpr, right: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Intersect {
            left: Arc::new(left),
            right: Arc::new(right),
        }
    }

    pub fn minus(left: AlgebraExpr, right: AlgebraExpr) -> AlgebraExpr {
        AlgebraExpr::Minus {
            left: Arc::new(left),
            right: Arc::new(right),
        }
    }

    pub fn df(
        case_attr: impl Into<AttrName>,
        time_attr: impl Into<AttrName>,
        input: AlgebraExpr,
    ) -> AlgebraExpr {
        AlgebraExpr::DirectlyFollows {
            case_attr: case_attr.into(),
            time_attr: time_attr.into(),
            input: Arc::new(input),
        }
    }

    pub fn children(&self) -> Vec<&Arc<AlgebraExpr>> {
        match self {
            AlgebraExpr::BaseRel(_) => vec![],
            AlgebraExpr::Select { input, .. }
            | AlgebraExpr::Project { input, .. }
            | AlgebraExpr::RenameAttr { input, .. }
            | AlgebraExpr::RenamePrefix { input, .. }
            | AlgebraExpr::DirectlyFollows { input, .. } => vec![input],
            AlgebraExpr::Product { left, right }
            | AlgebraExpr::Join { left, right, .. }
            | AlgebraExpr::Union { left, right }
            | AlgebraExpr::Intersect { left, right }
            | AlgebraExpr::Minus { left, right } => vec![left, right],
        }
    }

    /// Node at `path` (child indices from the root), if it exists.
    pub fn node_at(&self, path: &[usize]) -> Option<&AlgebraExpr> {
        let mut node = self;
        for &idx in path {
            node = node.children().get(idx).copied()?.as_ref();
        }
        Some(node)
    }

    /// New tree with the node at `path` replaced.
    pub fn with_node_at(&self, path: &[usize], replacement: AlgebraExpr) -> Option<AlgebraExpr> {
        if path.is_empty() {
            return Some(replacement);
        }
        let (idx, rest) = (path[0], &path[1..]);
        let rebuild = |node: &Arc<AlgebraExpr>| -> Option<Arc<AlgebraExpr>> {
            Some(Arc::new(node.with_node_at(rest, replacement.clone())?))
        };
        let out = match self {
            AlgebraExpr::BaseRel(_) => return None,
            AlgebraExpr::Select { condition, input } if idx == 0 => AlgebraExpr::Select {
                condition: condition.clone(),
                input: rebuild(input)?,
            },
            AlgebraExpr::Project { attrs, input } if idx == 0 => AlgebraExpr::Project {
                attrs: attrs.clone(),
                input: rebuild(input)?,
            },
            AlgebraExpr::RenameAttr { from, to, input } if idx == 0 => AlgebraExpr::RenameAttr {
                from: from.clone(),
                to: to.clone(),
                input: rebuild(input)?,
            },
            AlgebraExpr::RenamePrefix { prefix, input } if idx == 0 => AlgebraExpr::RenamePrefix {
                prefix: prefix.clone(),
                input: rebuild(input)?,
            },
            AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } if idx == 0 => AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: rebuild(input)?,
            },
            AlgebraExpr::Product { left, right } if idx < 2 => AlgebraExpr::Product {
                left: if idx == 0 { rebuild(left)? } else { left.clone() },
                right: if idx == 1 { rebuild(right)? } else { right.clone() },
            },
            AlgebraExpr::Join {
                condition,
                left,
                right,
            } if idx < 2 => AlgebraExpr::Join {
                condition: condition.clone(),
                left: if idx == 0 { rebuild(left)? } else { left.clone() },
                right: if idx == 1 { rebuild(right)? } else { right.clone() },
            },
            AlgebraExpr::Union { left, right } if idx < 2 => AlgebraExpr::Union {
                left: if idx == 0 { rebuild(left)? } else { left.clone() },
                right: if idx == 1 { rebuild(right)? } else { right.clone() },
            },
            AlgebraExpr::Intersect { left, right } if idx < 2 => AlgebraExpr::Intersect {
                left: if idx == 0 { rebuild(left)? } else { left.clone() },
                right: if idx == 1 { rebuild(right)? } else { right.clone() },
            },
            AlgebraExpr::Minus { left, right } if idx < 2 => AlgebraExpr::Minus {
                left: if idx == 0 { rebuild(left)? } else { left.clone() },
                right: if idx == 1 { rebuild(right)? } else { right.clone() },
            },
            _ => return None,
        };
        Some(out)
    }

    /// All node paths in pre-order.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn walk(node: &AlgebraExpr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(path.clone());
            for (i, child) in node.children().into_iter().enumerate() {
                path.push(i);
                walk(child, path, out);
                path.pop();
            }
        }
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(|c| c.node_count())
            .sum::<usize>()
    }

    pub fn contains_df(&self) -> bool {
        matches!(self, AlgebraExpr::DirectlyFollows { .. })
            || self.children().into_iter().any(|c| c.contains_df())
    }

    /// Canonical multi-line rendering: one node per line, children indented
    /// two spaces, conditions in infix notation.
    pub fn render_tree(&self) -> String {
        let mut out = String::new();
        self.render_tree_into(&mut out, 0);
        out
    }

    fn render_tree_into(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&self.node_label());
        out.push('\n');
        for child in self.children() {
            child.render_tree_into(out, depth + 1);
        }
    }

    /// One-line label for this node (without children).
    pub fn node_label(&self) -> String {
        match self {
            AlgebraExpr::BaseRel(name) => name.clone(),
            AlgebraExpr::Select { condition, .. } => format!("select {condition}"),
            AlgebraExpr::Project { attrs, .. } => {
                let names: Vec<_> = attrs.iter().map(|a| a.to_string()).collect();
                format!("project {}", names.join(", "))
            }
            AlgebraExpr::RenameAttr { from, to, .. } => format!("rename {from} -> {to}"),
            AlgebraExpr::RenamePrefix { prefix, .. } => format!("prefix {prefix}"),
            AlgebraExpr::Product { .. } => "product".to_string(),
            AlgebraExpr::Join { condition, .. } => format!("join {condition}"),
            AlgebraExpr::Union { .. } => "union".to_string(),
            AlgebraExpr::Intersect { .. } => "intersect".to_string(),
            AlgebraExpr::Minus { .. } => "minus".to_string(),
            AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                ..
            } => format!("df {case_attr}, {time_attr}"),
        }
    }
}

/// Path into an expression tree: child indices from the root.
pub type NodePath = Vec<usize>;

pub fn render_path(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaErrorKind {
    UnknownRelation,
    UnknownAttribute,
    DuplicateAttribute,
    SchemaMismatch,
    TypeMismatch,
}

/// Schema inference failure, pointing at exactly one node of the tree.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{kind:?} at {}: {message}", render_path(.location))]
pub struct SchemaError {
    pub kind: SchemaErrorKind,
    pub location: NodePath,
    pub message: String,
}

impl SchemaError {
    fn new(kind: SchemaErrorKind, location: &[usize], message: impl Into<String>) -> SchemaError {
        SchemaError {
            kind,
            location: location.to_vec(),
            message: message.into(),
        }
    }
}

/// Source of base relation schemas; implemented by the catalog and by plain
/// maps in tests.
pub trait SchemaSource {
    fn schema_of(&self, name: &str) -> Option<Schema>;
}

impl SchemaSource for std::collections::BTreeMap<String, Schema> {
    fn schema_of(&self, name: &str) -> Option<Schema> {
        self.get(name).cloned()
    }
}

/// Infer the output schema of `expr`, rejecting ill-formed trees.
pub fn infer_schema(expr: &AlgebraExpr, source: &dyn SchemaSource) -> Result<Schema, SchemaError> {
    infer_at(expr, source, &mut Vec::new())
}

fn infer_at(
    expr: &AlgebraExpr,
    source: &dyn SchemaSource,
    path: &mut NodePath,
) -> Result<Schema, SchemaError> {
    match expr {
        AlgebraExpr::BaseRel(name) => source.schema_of(name).ok_or_else(|| {
            SchemaError::new(
                SchemaErrorKind::UnknownRelation,
                path,
                format!("unknown relation '{name}'"),
            )
        }),
        AlgebraExpr::Select { condition, input } => {
            let schema = infer_child(input, source, path, 0)?;
            check_condition(condition, &schema, path)?;
            Ok(schema)
        }
        AlgebraExpr::Project { attrs, input } => {
            let schema = infer_child(input, source, path, 0)?;
            let mut seen = BTreeSet::new();
            for a in attrs {
                if !schema.contains(a) {
                    return Err(SchemaError::new(
                        SchemaErrorKind::UnknownAttribute,
                        path,
                        format!("projection references unknown attribute '{a}'"),
                    ));
                }
                if !seen.insert(a.clone()) {
                    return Err(SchemaError::new(
                        SchemaErrorKind::DuplicateAttribute,
                        path,
                        format!("projection lists attribute '{a}' twice"),
                    ));
                }
            }
            Ok(schema.restricted(attrs))
        }
        AlgebraExpr::RenameAttr { from, to, input } => {
            let schema = infer_child(input, source, path, 0)?;
            if !schema.contains(from) {
                return Err(SchemaError::new(
                    SchemaErrorKind::UnknownAttribute,
                    path,
                    format!("rename source '{from}' is not in the schema"),
                ));
            }
            if from != to && schema.contains(to) {
                return Err(SchemaError::new(
                    SchemaErrorKind::DuplicateAttribute,
                    path,
                    format!("rename target '{to}' already exists"),
                ));
            }
            Ok(schema.renamed(from, to))
        }
        AlgebraExpr::RenamePrefix { prefix, input } => {
            let schema = infer_child(input, source, path, 0)?;
            Ok(schema.prefixed(prefix))
        }
        AlgebraExpr::Product { left, right } => {
            let l = infer_child(left, source, path, 0)?;
            let r = infer_child(right, source, path, 1)?;
            l.concat(&r).map_err(|e| {
                SchemaError::new(SchemaErrorKind::DuplicateAttribute, path, e.to_string())
            })
        }
        AlgebraExpr::Join {
            condition,
            left,
            right,
        } => {
            let l = infer_child(left, source, path, 0)?;
            let r = infer_child(right, source, path, 1)?;
            let combined = l.concat(&r).map_err(|e| {
                SchemaError::new(SchemaErrorKind::DuplicateAttribute, path, e.to_string())
            })?;
            check_condition(condition, &combined, path)?;
            Ok(combined)
        }
        AlgebraExpr::Union { left, right }
        | AlgebraExpr::Intersect { left, right }
        | AlgebraExpr::Minus { left, right } => {
            let l = infer_child(left, source, path, 0)?;
            let r = infer_child(right, source, path, 1)?;
            if l != r {
                return Err(SchemaError::new(
                    SchemaErrorKind::SchemaMismatch,
                    path,
                    "set operation requires identical schemas",
                ));
            }
            Ok(l)
        }
        AlgebraExpr::DirectlyFollows {
            case_attr,
            time_attr,
            input,
        } => {
            let schema = infer_child(input, source, path, 0)?;
            for a in [case_attr, time_attr] {
                if !schema.contains(a) {
                    return Err(SchemaError::new(
                        SchemaErrorKind::UnknownAttribute,
                        path,
                        format!("directly-follows attribute '{a}' is not in the schema"),
                    ));
                }
            }
            schema
                .prefixed("d")
                .concat(&schema.prefixed("u"))
                .map_err(|e| {
                    SchemaError::new(SchemaErrorKind::DuplicateAttribute, path, e.to_string())
                })
        }
    }
}

fn infer_child(
    child: &AlgebraExpr,
    source: &dyn SchemaSource,
    path: &mut NodePath,
    idx: usize,
) -> Result<Schema, SchemaError> {
    path.push(idx);
    let out = infer_at(child, source, path);
    path.pop();
    out
}

fn check_condition(
    condition: &Condition,
    schema: &Schema,
    path: &[usize],
) -> Result<(), SchemaError> {
    match condition {
        Condition::Compare { lhs, op: _, rhs } => {
            let domain_of = |o: &Operand| -> Result<Domain, SchemaError> {
                match o {
                    Operand::Attr(a) => schema.domain_of(a).ok_or_else(|| {
                        SchemaError::new(
                            SchemaErrorKind::UnknownAttribute,
                            path,
                            format!("condition references unknown attribute '{a}'"),
                        )
                    }),
                    Operand::Const(v) => v.domain().ok_or_else(|| {
                        SchemaError::new(
                            SchemaErrorKind::TypeMismatch,
                            path,
                            "condition literal has no domain",
                        )
                    }),
                }
            };
            let dl = domain_of(lhs)?;
            let dr = domain_of(rhs)?;
            if dl != dr {
                return Err(SchemaError::new(
                    SchemaErrorKind::TypeMismatch,
                    path,
                    format!("comparison mixes {dl} and {dr}"),
                ));
            }
            Ok(())
        }
        Condition::And(a, b) | Condition::Or(a, b) => {
            check_condition(a, schema, path)?;
            check_condition(b, schema, path)
        }
        Condition::Not(a) => check_condition(a, schema, path),
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExpandError {
    #[error("expand_df requires a directly-follows node at the root")]
    NotDirectlyFollows,
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Expand a `DirectlyFollows` node into its defining composite tree:
///
/// ```text
/// minus(
///   join(d.t < u.t & d.c = u.c, prefix(d, L), prefix(u, L)),
///   project(As, join(d.t < t & t < u.t & d.c = c,
///                    join(d.t < u.t & d.c = u.c, prefix(d, L), prefix(u, L)),
///                    L)))
/// ```
///
/// where `As` is the set of `d.`/`u.`-prefixed attribute names. Nested
/// directly-follows nodes inside the input are expanded too, so the result
/// contains no `DirectlyFollows` node. The first join is shared between the
/// two sides of the minus.
pub fn expand_df(expr: &AlgebraExpr, source: &dyn SchemaSource) -> Result<AlgebraExpr, ExpandError> {
    let AlgebraExpr::DirectlyFollows {
        case_attr,
        time_attr,
        input,
    } = expr
    else {
        return Err(ExpandError::NotDirectlyFollows);
    };
    let input = expand_all(input, source)?;
    let input_schema = infer_schema(&input, source)?;

    let down_c = case_attr.prefixed("d");
    let down_t = time_attr.prefixed("d");
    let up_c = case_attr.prefixed("u");
    let up_t = time_attr.prefixed("u");

    let first_join_cond = Condition::and(
        Condition::attr_op_attr(down_t.clone(), CompareOp::Lt, up_t.clone()),
        Condition::attr_op_attr(down_c.clone(), CompareOp::Eq, up_c.clone()),
    );
    let first_join = Arc::new(AlgebraExpr::Join {
        condition: first_join_cond,
        left: Arc::new(AlgebraExpr::prefix("d", input.clone())),
        right: Arc::new(AlgebraExpr::prefix("u", input.clone())),
    });

    // d.t < t & t < u.t & d.c = c, exactly as the operator is defined;
    // c = u.c is implied by d.c = u.c & d.c = c.
    let middle_cond = Condition::conjunction(vec![
        Condition::attr_op_attr(down_t, CompareOp::Lt, time_attr.clone()),
        Condition::attr_op_attr(time_attr.clone(), CompareOp::Lt, up_t),
        Condition::attr_op_attr(down_c, CompareOp::Eq, case_attr.clone()),
    ]);
    let middle_join = AlgebraExpr::Join {
        condition: middle_cond,
        left: Arc::clone(&first_join),
        right: Arc::new(input.clone()),
    };

    // As: all prefixed attributes, d-block then u-block in input order.
    let prefixed_attrs: Vec<AttrName> = input_schema
        .names()
        .map(|n| n.prefixed("d"))
        .chain(input_schema.names().map(|n| n.prefixed("u")))
        .collect();

    Ok(AlgebraExpr::Minus {
        left: first_join,
        right: Arc::new(AlgebraExpr::project(prefixed_attrs, middle_join)),
    })
}

/// Expand every `DirectlyFollows` node in the tree, leaving other nodes
/// untouched.
pub fn expand_all(expr: &AlgebraExpr, source: &dyn SchemaSource) -> Result<AlgebraExpr, ExpandError> {
    if let AlgebraExpr::DirectlyFollows { .. } = expr {
        return expand_df(expr, source);
    }
    let mut out = expr.clone();
    for (i, child) in expr.children().into_iter().enumerate() {
        if child.contains_df() {
            let expanded = expand_all(child, source)?;
            out = out
                .with_node_at(&[i], expanded)
                .expect("child index is valid");
        }
    }
    Ok(out)
}

/// Replace every join with a selection over a product.
pub fn desugar_join(expr: &AlgebraExpr) -> AlgebraExpr {
    let desugared_children: Vec<AlgebraExpr> = expr
        .children()
        .iter()
        .map(|c| desugar_join(c))
        .collect();
    let mut out = expr.clone();
    for (i, child) in desugared_children.into_iter().enumerate() {
        out = out.with_node_at(&[i], child).expect("child index is valid");
    }
    if let AlgebraExpr::Join {
        condition,
        left,
        right,
    } = out
    {
        AlgebraExpr::Select {
            condition,
            input: Arc::new(AlgebraExpr::Product { left, right }),
        }
    } else {
        out
    }
}
