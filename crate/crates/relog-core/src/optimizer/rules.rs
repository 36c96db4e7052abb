//! The rewrite rules: sixteen classic relational-algebra equivalences plus
//! the four directly-follows propositions. Each rule is a pattern over a
//! node of the tree; applying one never changes the inferred schema of the
//! rewritten subtree.
//!
//! Structural side conditions (attribute containment, computed from inferred
//! schemas) are always enforced; semantic side conditions (attribute classes
//! for P17/P18, join-totality facts for E15/P20) are enforced by
//! [`apply_rule`] and deliberately skipped by [`rewrite_unchecked`], which
//! exists so tests can demonstrate that the semantic conditions are
//! necessary.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{infer_schema, AlgebraExpr, Condition, NodePath, Operand, SchemaError};
use crate::catalog::{AttrClass, Catalog, TotalityFact};
use crate::relation::{AttrName, CompareOp, Schema, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[allow(clippy::upper_case_acronyms)]
pub enum RuleId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
    E11,
    E12,
    E13,
    E14,
    E15,
    E16,
    P17,
    P18,
    P19,
    P20,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Directions a rule may be applied in. The printed equation reads left to
/// right.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
    Both,
}

/// A concrete application direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RewriteDirection {
    Forward,
    Backward,
}

impl fmt::Display for RewriteDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteDirection::Forward => f.write_str("left-to-right"),
            RewriteDirection::Backward => f.write_str("right-to-left"),
        }
    }
}

impl Direction {
    pub fn permits(&self, dir: RewriteDirection) -> bool {
        match self {
            Direction::Both => true,
            Direction::LeftToRight => dir == RewriteDirection::Forward,
            Direction::RightToLeft => dir == RewriteDirection::Backward,
        }
    }
}

/// Rule descriptor as registered in the catalog of rules.
#[derive(Clone, Copy, Debug)]
pub struct RewriteRule {
    pub id: RuleId,
    pub direction: Direction,
    pub name: &'static str,
}

impl RuleId {
    pub const ALL: [RuleId; 20] = [
        RuleId::E1,
        RuleId::E2,
        RuleId::E3,
        RuleId::E4,
        RuleId::E5,
        RuleId::E6,
        RuleId::E7,
        RuleId::E8,
        RuleId::E9,
        RuleId::E10,
        RuleId::E11,
        RuleId::E12,
        RuleId::E13,
        RuleId::E14,
        RuleId::E15,
        RuleId::E16,
        RuleId::P17,
        RuleId::P18,
        RuleId::P19,
        RuleId::P20,
    ];

    pub fn rule(&self) -> RewriteRule {
        let (direction, name) = match self {
            RuleId::E1 => (Direction::Both, "selection splits over conjunction"),
            RuleId::E2 => (Direction::Both, "selections commute"),
            RuleId::E3 => (Direction::Both, "join commutes"),
            RuleId::E4 => (Direction::Both, "join associates"),
            RuleId::E5 => (Direction::Both, "selection pushes into join"),
            RuleId::E6 => (Direction::Both, "selection distributes over set minus"),
            RuleId::E7 => (Direction::Both, "selection and renaming commute"),
            RuleId::E8 => (Direction::Both, "projection and renaming commute"),
            RuleId::E9 => (Direction::Both, "projection and selection commute"),
            RuleId::E10 => (Direction::Both, "projection distributes over join"),
            RuleId::E11 => (Direction::LeftToRight, "projections collapse"),
            RuleId::E12 => (Direction::Both, "projections commute"),
            RuleId::E13 => (Direction::Both, "renaming pushes into join"),
            RuleId::E14 => (Direction::LeftToRight, "identity projection drops"),
            RuleId::E15 => (Direction::LeftToRight, "projection drops a total join"),
            RuleId::E16 => (Direction::Both, "join distributes over set minus"),
            RuleId::P17 => (Direction::Both, "directly follows and selection commute"),
            RuleId::P18 => (Direction::Both, "directly follows and selection commute 2"),
            RuleId::P19 => (
                Direction::Both,
                "directly follows and restricted projection commute",
            ),
            RuleId::P20 => (Direction::Both, "directly follows and theta join commute"),
        };
        RewriteRule {
            id: *self,
            direction,
            name,
        }
    }

    pub fn name(&self) -> &'static str {
        self.rule().name
    }
}

/// All rules with their permitted directions and names.
pub fn rule_catalog() -> Vec<RewriteRule> {
    RuleId::ALL.iter().map(|r| r.rule()).collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("rule {rule} ({direction}) does not match the node at {path:?}")]
    PatternMismatch {
        rule: RuleId,
        direction: RewriteDirection,
        path: NodePath,
    },
    #[error("side condition unverified for {rule} at {path:?}: {missing}")]
    SideConditionUnverified {
        rule: RuleId,
        path: NodePath,
        missing: String,
    },
    #[error("no node at path {path:?}")]
    BadPath { path: NodePath },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Apply `rule` in `direction` to the node at `path`, enforcing all side
/// conditions, and return the rewritten tree.
pub fn apply_rule(
    rule: RuleId,
    direction: RewriteDirection,
    expr: &AlgebraExpr,
    path: &[usize],
    catalog: &Catalog,
) -> Result<AlgebraExpr, RuleError> {
    rewrite(rule, direction, expr, path, catalog, true)
}

/// Apply the structural rewrite without verifying semantic side conditions
/// (attribute classes, totality facts). Structural conditions still hold, so
/// the result is well-formed, but it may not be equivalent; this is the
/// entry point for demonstrating that a side condition is necessary.
pub fn rewrite_unchecked(
    rule: RuleId,
    direction: RewriteDirection,
    expr: &AlgebraExpr,
    path: &[usize],
    catalog: &Catalog,
) -> Result<AlgebraExpr, RuleError> {
    rewrite(rule, direction, expr, path, catalog, false)
}

fn rewrite(
    rule: RuleId,
    direction: RewriteDirection,
    expr: &AlgebraExpr,
    path: &[usize],
    catalog: &Catalog,
    check_semantic: bool,
) -> Result<AlgebraExpr, RuleError> {
    if !rule.rule().direction.permits(direction) {
        return Err(RuleError::PatternMismatch {
            rule,
            direction,
            path: path.to_vec(),
        });
    }
    let node = expr.node_at(path).ok_or(RuleError::BadPath {
        path: path.to_vec(),
    })?;
    let ctx = Ctx {
        rule,
        direction,
        path,
        catalog,
        check_semantic,
    };
    let replacement = rewrite_node(node, &ctx)?;

    // safety net: a rewrite must never change the inferred schema
    let before = infer_schema(node, catalog)?;
    let after = infer_schema(&replacement, catalog)?;
    if before != after {
        return Err(RuleError::SideConditionUnverified {
            rule,
            path: path.to_vec(),
            missing: "rewrite would change the inferred schema".to_string(),
        });
    }

    expr.with_node_at(path, replacement)
        .ok_or(RuleError::BadPath {
            path: path.to_vec(),
        })
}

struct Ctx<'a> {
    rule: RuleId,
    direction: RewriteDirection,
    path: &'a [usize],
    catalog: &'a Catalog,
    check_semantic: bool,
}

impl Ctx<'_> {
    fn mismatch(&self) -> RuleError {
        RuleError::PatternMismatch {
            rule: self.rule,
            direction: self.direction,
            path: self.path.to_vec(),
        }
    }

    fn unverified(&self, missing: impl Into<String>) -> RuleError {
        RuleError::SideConditionUnverified {
            rule: self.rule,
            path: self.path.to_vec(),
            missing: missing.into(),
        }
    }

    fn schema(&self, e: &AlgebraExpr) -> Result<Schema, RuleError> {
        Ok(infer_schema(e, self.catalog)?)
    }

    /// P17/P18 grounding: the selection sits over a base relation whose
    /// declared case/time attributes are the ones the operator uses, and the
    /// selected attributes are declared case or event attributes.
    fn check_class_conditions(
        &self,
        child: &AlgebraExpr,
        case_attr: &AttrName,
        time_attr: &AttrName,
        attrs: &[&AttrName],
    ) -> Result<(), RuleError> {
        if !self.check_semantic {
            return Ok(());
        }
        let AlgebraExpr::BaseRel(name) = child else {
            return Err(self.unverified(
                "attribute classes are only declared for base relations".to_string(),
            ));
        };
        let meta = self
            .catalog
            .meta(name)
            .ok_or_else(|| self.unverified(format!("no metadata for relation '{name}'")))?;
        if meta.case_attr.as_ref() != Some(case_attr) || meta.time_attr.as_ref() != Some(time_attr)
        {
            return Err(self.unverified(format!(
                "'{name}' does not declare ({case_attr}, {time_attr}) as its case/time attributes"
            )));
        }
        for a in attrs {
            match meta.class_of(a) {
                AttrClass::Case | AttrClass::Event => {}
                AttrClass::Other => {
                    return Err(self.unverified(format!(
                        "attribute '{a}' of '{name}' is not declared as a case or event attribute"
                    )));
                }
            }
        }
        Ok(())
    }

    /// E15/P20 totality: a declared fact that the join loses no tuple of the
    /// left relation.
    fn check_totality(
        &self,
        left: &str,
        right: &str,
        condition: &Condition,
    ) -> Result<(), RuleError> {
        if !self.check_semantic {
            return Ok(());
        }
        let fact = TotalityFact::new(left, right, condition);
        if self.catalog.has_totality_fact(&fact) {
            Ok(())
        } else {
            Err(self.unverified(format!(
                "no declared totality fact for {left} joined to {right} on {condition}"
            )))
        }
    }
}

fn names(schema: &Schema) -> BTreeSet<AttrName> {
    schema.name_set()
}

fn attr_value_comparison(c: &Condition) -> Option<(&AttrName, CompareOp, &Value)> {
    match c {
        Condition::Compare {
            lhs: Operand::Attr(a),
            op,
            rhs: Operand::Const(x),
        } => Some((a, *op, x)),
        _ => None,
    }
}

fn attr_attr_comparison(c: &Condition) -> Option<(&AttrName, CompareOp, &AttrName)> {
    match c {
        Condition::Compare {
            lhs: Operand::Attr(a),
            op,
            rhs: Operand::Attr(b),
        } => Some((a, *op, b)),
        _ => None,
    }
}

fn strip_prefix(name: &AttrName, prefix: &str) -> Option<AttrName> {
    name.as_str()
        .strip_prefix(prefix)
        .and_then(|rest| rest.strip_prefix('.'))
        .map(AttrName::new)
}

fn rewrite_node(node: &AlgebraExpr, ctx: &Ctx) -> Result<AlgebraExpr, RuleError> {
    use RewriteDirection::{Backward, Forward};
    let m = || ctx.mismatch();

    match (ctx.rule, ctx.direction) {
        // --- selections ---------------------------------------------------
        (RuleId::E1, Forward) => {
            // select(f & g, R) -> select(f, select(g, R))
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let Condition::And(f, g) = condition else {
                return Err(m());
            };
            Ok(AlgebraExpr::Select {
                condition: (**f).clone(),
                input: Arc::new(AlgebraExpr::Select {
                    condition: (**g).clone(),
                    input: input.clone(),
                }),
            })
        }
        (RuleId::E1, Backward) => {
            // select(f, select(g, R)) -> select(f & g, R)
            let AlgebraExpr::Select { condition: f, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Select {
                condition: g,
                input: inner,
            } = input.as_ref()
            else {
                return Err(m());
            };
            Ok(AlgebraExpr::Select {
                condition: Condition::and(f.clone(), g.clone()),
                input: inner.clone(),
            })
        }
        (RuleId::E2, _) => {
            // select(f, select(g, R)) -> select(g, select(f, R))
            let AlgebraExpr::Select { condition: f, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Select {
                condition: g,
                input: inner,
            } = input.as_ref()
            else {
                return Err(m());
            };
            Ok(AlgebraExpr::select(
                g.clone(),
                AlgebraExpr::Select {
                    condition: f.clone(),
                    input: inner.clone(),
                },
            ))
        }
        // --- joins ---------------------------------------------------------
        (RuleId::E3, _) => {
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            Ok(AlgebraExpr::Join {
                condition: condition.clone(),
                left: right.clone(),
                right: left.clone(),
            })
        }
        (RuleId::E4, Forward) => {
            // join(g, join(f, R, S), T) -> join(f, R, join(g, S, T))
            //   needs attrs(g) within S, T
            let AlgebraExpr::Join {
                condition: g,
                left,
                right: t,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition: f,
                left: r,
                right: s,
            } = left.as_ref()
            else {
                return Err(m());
            };
            let available: BTreeSet<AttrName> = names(&ctx.schema(s)?)
                .union(&names(&ctx.schema(t)?))
                .cloned()
                .collect();
            if !g.attrs().is_subset(&available) {
                return Err(ctx.unverified(
                    "outer join condition uses attributes outside the reassociated operands",
                ));
            }
            Ok(AlgebraExpr::Join {
                condition: f.clone(),
                left: r.clone(),
                right: Arc::new(AlgebraExpr::Join {
                    condition: g.clone(),
                    left: s.clone(),
                    right: t.clone(),
                }),
            })
        }
        (RuleId::E4, Backward) => {
            // join(f, R, join(g, S, T)) -> join(g, join(f, R, S), T)
            //   needs attrs(f) within R, S
            let AlgebraExpr::Join {
                condition: f,
                left: r,
                right,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition: g,
                left: s,
                right: t,
            } = right.as_ref()
            else {
                return Err(m());
            };
            let available: BTreeSet<AttrName> = names(&ctx.schema(r)?)
                .union(&names(&ctx.schema(s)?))
                .cloned()
                .collect();
            if !f.attrs().is_subset(&available) {
                return Err(ctx.unverified(
                    "outer join condition uses attributes outside the reassociated operands",
                ));
            }
            Ok(AlgebraExpr::Join {
                condition: g.clone(),
                left: Arc::new(AlgebraExpr::Join {
                    condition: f.clone(),
                    left: r.clone(),
                    right: s.clone(),
                }),
                right: t.clone(),
            })
        }
        (RuleId::E5, Forward) => {
            // select(g, join(f, L, R)) -> join(f, select(g, L), R)
            //   if g only has attributes from L
            let AlgebraExpr::Select { condition: g, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition: f,
                left,
                right,
            } = input.as_ref()
            else {
                return Err(m());
            };
            if !g.attrs().is_subset(&names(&ctx.schema(left)?)) {
                return Err(ctx.unverified(
                    "selection condition uses attributes outside the left join operand",
                ));
            }
            Ok(AlgebraExpr::Join {
                condition: f.clone(),
                left: Arc::new(AlgebraExpr::Select {
                    condition: g.clone(),
                    input: left.clone(),
                }),
                right: right.clone(),
            })
        }
        (RuleId::E5, Backward) => {
            // join(f, select(g, L), R) -> select(g, join(f, L, R))
            let AlgebraExpr::Join {
                condition: f,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Select { condition: g, input } = left.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::select(
                g.clone(),
                AlgebraExpr::Join {
                    condition: f.clone(),
                    left: input.clone(),
                    right: right.clone(),
                },
            ))
        }
        (RuleId::E6, Forward) => {
            // select(f, minus(L, R)) -> minus(select(f, L), select(f, R))
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Minus { left, right } = input.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::Minus {
                left: Arc::new(AlgebraExpr::Select {
                    condition: condition.clone(),
                    input: left.clone(),
                }),
                right: Arc::new(AlgebraExpr::Select {
                    condition: condition.clone(),
                    input: right.clone(),
                }),
            })
        }
        (RuleId::E6, Backward) => {
            let AlgebraExpr::Minus { left, right } = node else {
                return Err(m());
            };
            let (
                AlgebraExpr::Select {
                    condition: f,
                    input: l,
                },
                AlgebraExpr::Select {
                    condition: g,
                    input: r,
                },
            ) = (left.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            if f != g {
                return Err(m());
            }
            Ok(AlgebraExpr::select(
                f.clone(),
                AlgebraExpr::Minus {
                    left: l.clone(),
                    right: r.clone(),
                },
            ))
        }
        // --- renaming -------------------------------------------------------
        (RuleId::E7, Forward) => {
            // select(f, rename(b -> a, R)) -> rename(b -> a, select(f[a := b], R))
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::RenameAttr { from, to, input: inner } = input.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::RenameAttr {
                from: from.clone(),
                to: to.clone(),
                input: Arc::new(AlgebraExpr::Select {
                    condition: condition.rename_attr(to, from),
                    input: inner.clone(),
                }),
            })
        }
        (RuleId::E7, Backward) => {
            let AlgebraExpr::RenameAttr { from, to, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Select { condition, input: inner } = input.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::select(
                condition.rename_attr(from, to),
                AlgebraExpr::RenameAttr {
                    from: from.clone(),
                    to: to.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::E8, Forward) => {
            // project(A, rename(b -> a, R)) -> rename(b -> a, project(A[a := b], R))
            //   requires a in A
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::RenameAttr { from, to, input: inner } = input.as_ref() else {
                return Err(m());
            };
            if !attrs.contains(to) {
                return Err(m());
            }
            let renamed: Vec<AttrName> = attrs
                .iter()
                .map(|a| if a == to { from.clone() } else { a.clone() })
                .collect();
            Ok(AlgebraExpr::RenameAttr {
                from: from.clone(),
                to: to.clone(),
                input: Arc::new(AlgebraExpr::Project {
                    attrs: renamed,
                    input: inner.clone(),
                }),
            })
        }
        (RuleId::E8, Backward) => {
            let AlgebraExpr::RenameAttr { from, to, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Project { attrs, input: inner } = input.as_ref() else {
                return Err(m());
            };
            if !attrs.contains(from) {
                return Err(m());
            }
            let renamed: Vec<AttrName> = attrs
                .iter()
                .map(|a| if a == from { to.clone() } else { a.clone() })
                .collect();
            Ok(AlgebraExpr::Project {
                attrs: renamed,
                input: Arc::new(AlgebraExpr::RenameAttr {
                    from: from.clone(),
                    to: to.clone(),
                    input: inner.clone(),
                }),
            })
        }
        // --- projections ----------------------------------------------------
        (RuleId::E9, Forward) => {
            // project(A, select(f, R)) -> select(f, project(A, R))
            //   if f only has attributes from A
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Select { condition, input: inner } = input.as_ref() else {
                return Err(m());
            };
            let kept: BTreeSet<AttrName> = attrs.iter().cloned().collect();
            if !condition.attrs().is_subset(&kept) {
                return Err(ctx.unverified(
                    "selection condition uses attributes dropped by the projection",
                ));
            }
            Ok(AlgebraExpr::select(
                condition.clone(),
                AlgebraExpr::Project {
                    attrs: attrs.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::E9, Backward) => {
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Project { attrs, input: inner } = input.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::Project {
                attrs: attrs.clone(),
                input: Arc::new(AlgebraExpr::Select {
                    condition: condition.clone(),
                    input: inner.clone(),
                }),
            })
        }
        (RuleId::E10, Forward) => {
            // project(A, join(f, L, R)) ->
            //   join(f, project(A within L, L), project(A within R, R))
            //   if f's attributes survive and both splits are non-empty
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = input.as_ref()
            else {
                return Err(m());
            };
            let l_names = names(&ctx.schema(left)?);
            let kept: BTreeSet<AttrName> = attrs.iter().cloned().collect();
            if !condition.attrs().is_subset(&kept) {
                return Err(ctx.unverified(
                    "join condition uses attributes dropped by the projection",
                ));
            }
            let (l_attrs, r_attrs): (Vec<AttrName>, Vec<AttrName>) =
                attrs.iter().cloned().partition(|a| l_names.contains(a));
            if l_attrs.is_empty() || r_attrs.is_empty() {
                return Err(ctx.unverified("projection does not split across both operands"));
            }
            Ok(AlgebraExpr::Join {
                condition: condition.clone(),
                left: Arc::new(AlgebraExpr::Project {
                    attrs: l_attrs,
                    input: left.clone(),
                }),
                right: Arc::new(AlgebraExpr::Project {
                    attrs: r_attrs,
                    input: right.clone(),
                }),
            })
        }
        (RuleId::E10, Backward) => {
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            let (
                AlgebraExpr::Project {
                    attrs: l_attrs,
                    input: l,
                },
                AlgebraExpr::Project {
                    attrs: r_attrs,
                    input: r,
                },
            ) = (left.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            let attrs: Vec<AttrName> = l_attrs.iter().chain(r_attrs.iter()).cloned().collect();
            Ok(AlgebraExpr::project(
                attrs,
                AlgebraExpr::Join {
                    condition: condition.clone(),
                    left: l.clone(),
                    right: r.clone(),
                },
            ))
        }
        (RuleId::E11, Forward) => {
            // project(A, project(B, R)) -> project(A, R); A is within B by
            // well-formedness
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Project { input: inner, .. } = input.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::Project {
                attrs: attrs.clone(),
                input: inner.clone(),
            })
        }
        (RuleId::E12, _) => {
            // project(A, project(B, R)) -> project(B, project(A, R))
            //   when A and B name the same attribute set
            let AlgebraExpr::Project { attrs: a, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Project { attrs: b, input: inner } = input.as_ref() else {
                return Err(m());
            };
            let sa: BTreeSet<&AttrName> = a.iter().collect();
            let sb: BTreeSet<&AttrName> = b.iter().collect();
            if sa != sb {
                return Err(m());
            }
            Ok(AlgebraExpr::project(
                b.clone(),
                AlgebraExpr::Project {
                    attrs: a.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::E13, Forward) => {
            // rename(b -> a, join(f, L, R)) -> join(f[b := a], rename(b -> a, L), R)
            //   if b only in L and a fresh on both sides
            let AlgebraExpr::RenameAttr { from, to, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = input.as_ref()
            else {
                return Err(m());
            };
            let l_names = names(&ctx.schema(left)?);
            let r_names = names(&ctx.schema(right)?);
            if !l_names.contains(from) || r_names.contains(from) {
                return Err(ctx.unverified("renamed attribute is not exclusive to the left operand"));
            }
            if l_names.contains(to) || r_names.contains(to) {
                return Err(ctx.unverified("rename target collides with an operand attribute"));
            }
            Ok(AlgebraExpr::Join {
                condition: condition.rename_attr(from, to),
                left: Arc::new(AlgebraExpr::RenameAttr {
                    from: from.clone(),
                    to: to.clone(),
                    input: left.clone(),
                }),
                right: right.clone(),
            })
        }
        (RuleId::E13, Backward) => {
            // join(f, rename(b -> a, L), R) -> rename(b -> a, join(f[a := b], L, R))
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::RenameAttr { from, to, input } = left.as_ref() else {
                return Err(m());
            };
            let r_names = names(&ctx.schema(right)?);
            if r_names.contains(from) || r_names.contains(to) {
                return Err(ctx.unverified("rename attributes appear in the right operand"));
            }
            Ok(AlgebraExpr::RenameAttr {
                from: from.clone(),
                to: to.clone(),
                input: Arc::new(AlgebraExpr::Join {
                    condition: condition.rename_attr(to, from),
                    left: input.clone(),
                    right: right.clone(),
                }),
            })
        }
        (RuleId::E14, Forward) => {
            // project over exactly the input's attributes drops
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let kept: BTreeSet<AttrName> = attrs.iter().cloned().collect();
            if kept != names(&ctx.schema(input)?) {
                return Err(m());
            }
            Ok(input.as_ref().clone())
        }
        (RuleId::E15, Forward) => {
            // project(A, join(f, R, S)) -> R
            //   if A is exactly R's attributes and the join keeps every R tuple
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = input.as_ref()
            else {
                return Err(m());
            };
            let (AlgebraExpr::BaseRel(l_name), AlgebraExpr::BaseRel(r_name)) =
                (left.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            let kept: BTreeSet<AttrName> = attrs.iter().cloned().collect();
            if kept != names(&ctx.schema(left)?) {
                return Err(m());
            }
            ctx.check_totality(l_name, r_name, condition)?;
            Ok(left.as_ref().clone())
        }
        (RuleId::E16, Forward) => {
            // join(f, minus(R, T), S) -> minus(join(f, R, S), join(f, T, S))
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Minus { left: r, right: t } = left.as_ref() else {
                return Err(m());
            };
            Ok(AlgebraExpr::Minus {
                left: Arc::new(AlgebraExpr::Join {
                    condition: condition.clone(),
                    left: r.clone(),
                    right: right.clone(),
                }),
                right: Arc::new(AlgebraExpr::Join {
                    condition: condition.clone(),
                    left: t.clone(),
                    right: right.clone(),
                }),
            })
        }
        (RuleId::E16, Backward) => {
            let AlgebraExpr::Minus { left, right } = node else {
                return Err(m());
            };
            let (
                AlgebraExpr::Join {
                    condition: f,
                    left: r,
                    right: s,
                },
                AlgebraExpr::Join {
                    condition: g,
                    left: t,
                    right: s2,
                },
            ) = (left.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            if f != g || s != s2 {
                return Err(m());
            }
            Ok(AlgebraExpr::Join {
                condition: f.clone(),
                left: Arc::new(AlgebraExpr::Minus {
                    left: r.clone(),
                    right: t.clone(),
                }),
                right: s.clone(),
            })
        }
        // --- directly follows ------------------------------------------------
        (RuleId::P17, Forward) => {
            // df(c, t, select(a ~ x, L)) -> select(d.a ~ x & u.a ~ x, df(c, t, L))
            //   if a is a case or event attribute
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Select { condition, input: inner } = input.as_ref() else {
                return Err(m());
            };
            let Some((a, op, x)) = attr_value_comparison(condition) else {
                return Err(m());
            };
            ctx.check_class_conditions(inner, case_attr, time_attr, &[a])?;
            let pushed = Condition::and(
                Condition::attr_op_value(a.prefixed("d"), op, x.clone()),
                Condition::attr_op_value(a.prefixed("u"), op, x.clone()),
            );
            Ok(AlgebraExpr::select(
                pushed,
                AlgebraExpr::DirectlyFollows {
                    case_attr: case_attr.clone(),
                    time_attr: time_attr.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::P17, Backward) => {
            // select(d.a ~ x & u.a ~ x, df(c, t, L)) -> df(c, t, select(a ~ x, L))
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input: inner,
            } = input.as_ref()
            else {
                return Err(m());
            };
            let Condition::And(lhs, rhs) = condition else {
                return Err(m());
            };
            let (Some((da, op1, x1)), Some((ua, op2, x2))) = (
                attr_value_comparison(lhs),
                attr_value_comparison(rhs),
            ) else {
                return Err(m());
            };
            let (Some(a1), Some(a2)) = (strip_prefix(da, "d"), strip_prefix(ua, "u")) else {
                return Err(m());
            };
            if a1 != a2 || op1 != op2 || x1 != x2 {
                return Err(m());
            }
            ctx.check_class_conditions(inner, case_attr, time_attr, &[&a1])?;
            Ok(AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: Arc::new(AlgebraExpr::select(
                    Condition::attr_op_value(a1, op1, x1.clone()),
                    inner.as_ref().clone(),
                )),
            })
        }
        (RuleId::P18, Forward) => {
            // df(c, t, select(a ~ b, L)) ->
            //   select(d.a ~ d.b & d.a ~ u.b & u.a ~ d.b & u.a ~ u.b, df(c, t, L))
            //   if a and b are case or event attributes
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Select { condition, input: inner } = input.as_ref() else {
                return Err(m());
            };
            let Some((a, op, b)) = attr_attr_comparison(condition) else {
                return Err(m());
            };
            ctx.check_class_conditions(inner, case_attr, time_attr, &[a, b])?;
            let (da, ua) = (a.prefixed("d"), a.prefixed("u"));
            let (db, ub) = (b.prefixed("d"), b.prefixed("u"));
            let pushed = Condition::conjunction(vec![
                Condition::attr_op_attr(da.clone(), op, db.clone()),
                Condition::attr_op_attr(da, op, ub.clone()),
                Condition::attr_op_attr(ua.clone(), op, db),
                Condition::attr_op_attr(ua, op, ub),
            ]);
            Ok(AlgebraExpr::select(
                pushed,
                AlgebraExpr::DirectlyFollows {
                    case_attr: case_attr.clone(),
                    time_attr: time_attr.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::P18, Backward) => {
            let AlgebraExpr::Select { condition, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input: inner,
            } = input.as_ref()
            else {
                return Err(m());
            };
            // left-associated conjunction of four attr-attr comparisons
            let Condition::And(c123, c4) = condition else {
                return Err(m());
            };
            let Condition::And(c12, c3) = c123.as_ref() else {
                return Err(m());
            };
            let Condition::And(c1, c2) = c12.as_ref() else {
                return Err(m());
            };
            let (Some(p1), Some(p2), Some(p3), Some(p4)) = (
                attr_attr_comparison(c1),
                attr_attr_comparison(c2),
                attr_attr_comparison(c3),
                attr_attr_comparison(c4),
            ) else {
                return Err(m());
            };
            let op = p1.1;
            if p2.1 != op || p3.1 != op || p4.1 != op {
                return Err(m());
            }
            // d.a~d.b, d.a~u.b, u.a~d.b, u.a~u.b
            let (Some(a), Some(b)) = (strip_prefix(p1.0, "d"), strip_prefix(p1.2, "d")) else {
                return Err(m());
            };
            let ok = strip_prefix(p2.0, "d") == Some(a.clone())
                && strip_prefix(p2.2, "u") == Some(b.clone())
                && strip_prefix(p3.0, "u") == Some(a.clone())
                && strip_prefix(p3.2, "d") == Some(b.clone())
                && strip_prefix(p4.0, "u") == Some(a.clone())
                && strip_prefix(p4.2, "u") == Some(b.clone());
            if !ok {
                return Err(m());
            }
            ctx.check_class_conditions(inner, case_attr, time_attr, &[&a, &b])?;
            Ok(AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: Arc::new(AlgebraExpr::select(
                    Condition::attr_op_attr(a, op, b),
                    inner.as_ref().clone(),
                )),
            })
        }
        (RuleId::P19, Forward) => {
            // df(c, t, project(A, L)) -> project(d.A ++ u.A, df(c, t, L))
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Project { attrs, input: inner } = input.as_ref() else {
                return Err(m());
            };
            let doubled: Vec<AttrName> = attrs
                .iter()
                .map(|a| a.prefixed("d"))
                .chain(attrs.iter().map(|a| a.prefixed("u")))
                .collect();
            Ok(AlgebraExpr::project(
                doubled,
                AlgebraExpr::DirectlyFollows {
                    case_attr: case_attr.clone(),
                    time_attr: time_attr.clone(),
                    input: inner.clone(),
                },
            ))
        }
        (RuleId::P19, Backward) => {
            // project(d.A ++ u.A, df(c, t, L)) -> df(c, t, project(A, L))
            //   requires c and t among A
            let AlgebraExpr::Project { attrs, input } = node else {
                return Err(m());
            };
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input: inner,
            } = input.as_ref()
            else {
                return Err(m());
            };
            if attrs.len() % 2 != 0 {
                return Err(m());
            }
            let half = attrs.len() / 2;
            let mut base_attrs = Vec::with_capacity(half);
            for i in 0..half {
                let (Some(d), Some(u)) = (
                    strip_prefix(&attrs[i], "d"),
                    strip_prefix(&attrs[half + i], "u"),
                ) else {
                    return Err(m());
                };
                if d != u {
                    return Err(m());
                }
                base_attrs.push(d);
            }
            if !base_attrs.contains(case_attr) || !base_attrs.contains(time_attr) {
                return Err(m());
            }
            Ok(AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: Arc::new(AlgebraExpr::project(base_attrs, inner.as_ref().clone())),
            })
        }
        (RuleId::P20, Forward) => {
            // df(c, t, join(a ~ b, R, S)) ->
            //   join(u.a ~ u.b, join(d.a ~ d.b, df(c, t, R), prefix(d, S)), prefix(u, S))
            //   if every R tuple joins an S tuple; both S copies are prefixed
            //   apart to keep the schemas equal
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition,
                left,
                right,
            } = input.as_ref()
            else {
                return Err(m());
            };
            let (AlgebraExpr::BaseRel(r_name), AlgebraExpr::BaseRel(s_name)) =
                (left.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            let Some((a, op, b)) = attr_attr_comparison(condition) else {
                return Err(m());
            };
            let r_names = names(&ctx.schema(left)?);
            let s_names = names(&ctx.schema(right)?);
            if !r_names.contains(a) || !s_names.contains(b) {
                return Err(m());
            }
            if !r_names.contains(case_attr) || !r_names.contains(time_attr) {
                return Err(ctx.unverified(
                    "case/time attributes must come from the left join operand",
                ));
            }
            ctx.check_totality(r_name, s_name, condition)?;
            let df = AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: left.clone(),
            };
            Ok(AlgebraExpr::join(
                Condition::attr_op_attr(a.prefixed("u"), op, b.prefixed("u")),
                AlgebraExpr::join(
                    Condition::attr_op_attr(a.prefixed("d"), op, b.prefixed("d")),
                    df,
                    AlgebraExpr::prefix("d", right.as_ref().clone()),
                ),
                AlgebraExpr::prefix("u", right.as_ref().clone()),
            ))
        }
        (RuleId::P20, Backward) => {
            let AlgebraExpr::Join {
                condition: u_cond,
                left,
                right,
            } = node
            else {
                return Err(m());
            };
            let AlgebraExpr::Join {
                condition: d_cond,
                left: df_node,
                right: s_down,
            } = left.as_ref()
            else {
                return Err(m());
            };
            let AlgebraExpr::DirectlyFollows {
                case_attr,
                time_attr,
                input: r,
            } = df_node.as_ref()
            else {
                return Err(m());
            };
            let (
                AlgebraExpr::RenamePrefix {
                    prefix: pd,
                    input: s1,
                },
                AlgebraExpr::RenamePrefix {
                    prefix: pu,
                    input: s2,
                },
            ) = (s_down.as_ref(), right.as_ref())
            else {
                return Err(m());
            };
            if pd != "d" || pu != "u" || s1 != s2 {
                return Err(m());
            }
            let (AlgebraExpr::BaseRel(r_name), AlgebraExpr::BaseRel(s_name)) =
                (r.as_ref(), s1.as_ref())
            else {
                return Err(m());
            };
            let (Some(dp), Some(up)) = (
                attr_attr_comparison(d_cond),
                attr_attr_comparison(u_cond),
            ) else {
                return Err(m());
            };
            let (Some(a1), Some(b1)) = (strip_prefix(dp.0, "d"), strip_prefix(dp.2, "d")) else {
                return Err(m());
            };
            let (Some(a2), Some(b2)) = (strip_prefix(up.0, "u"), strip_prefix(up.2, "u")) else {
                return Err(m());
            };
            if a1 != a2 || b1 != b2 || dp.1 != up.1 {
                return Err(m());
            }
            let condition = Condition::attr_op_attr(a1, dp.1, b1);
            ctx.check_totality(r_name, s_name, &condition)?;
            Ok(AlgebraExpr::DirectlyFollows {
                case_attr: case_attr.clone(),
                time_attr: time_attr.clone(),
                input: Arc::new(AlgebraExpr::join(
                    condition,
                    r.as_ref().clone(),
                    s1.as_ref().clone(),
                )),
            })
        }
        // directions not permitted for E11/E14/E15 fall out here
        _ => Err(m()),
    }
}
