//! Rewrite-based plan optimization.
//!
//! Two passes are available: a greedy fixpoint that pushes selections and
//! projections towards the data (always-profitable rewrites), and a bounded
//! exhaustive exploration that memoizes every reachable tree and keeps the
//! cheapest. If the exhaustive space exceeds the node-visit budget the
//! optimizer falls back to the greedy pass.

mod rules;

pub use rules::{
    apply_rule, rewrite_unchecked, rule_catalog, Direction, RewriteDirection, RewriteRule,
    RuleError, RuleId,
};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::algebra::{infer_schema, AlgebraExpr, NodePath, SchemaError};
use crate::catalog::Catalog;
pub use crate::catalog::AttrClass;
use crate::cost::{estimate_plan, CostError, CostEstimate, CostParams, EstimateOptions};
use crate::eval::{evaluate, EvalConfig, EvalError};
use crate::parser::render;
use crate::relation::relation_equal;

/// One recorded rule application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppliedRewrite {
    pub rule: RuleId,
    pub direction: RewriteDirection,
    /// Path of the rewritten node in the tree the rule was applied to.
    pub path: NodePath,
}

/// A rule whose pattern matched but whose side conditions could not be
/// verified against the catalog.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockedRewrite {
    pub rule: RuleId,
    pub direction: RewriteDirection,
    pub path: NodePath,
    pub reason: String,
}

/// Result of optimizing a query.
#[derive(Clone, Debug)]
pub struct PlanChoice {
    pub original: AlgebraExpr,
    pub chosen: AlgebraExpr,
    pub applied_rules: Vec<AppliedRewrite>,
    /// Rewrites blocked by unverified side conditions, for reporting.
    pub blocked: Vec<BlockedRewrite>,
    /// Estimates are present when the catalog has the statistics to price
    /// the plans.
    pub est_original: Option<CostEstimate>,
    pub est_chosen: Option<CostEstimate>,
    /// True when exhaustive exploration ran out of budget and the greedy
    /// pass supplied the result instead.
    pub budget_exhausted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizeMode {
    Off,
    #[default]
    Heuristic,
    Exhaustive,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Evaluate both sides of a rule application on the catalog's actual data.
/// Semantic side conditions are not enforced, so this can demonstrate both
/// that a gated rewrite is sound on conforming data and that it breaks on
/// data violating the conditions.
pub fn verify_rule_on_instance(
    rule: RuleId,
    direction: RewriteDirection,
    expr: &AlgebraExpr,
    path: &[usize],
    catalog: &Catalog,
) -> Result<bool, VerifyError> {
    let rewritten = rewrite_unchecked(rule, direction, expr, path, catalog)?;
    let config = EvalConfig::default();
    let lhs = evaluate(expr, catalog, config)?;
    let rhs = evaluate(&rewritten, catalog, config)?;
    Ok(relation_equal(&lhs, &rhs))
}

/// Optimize `expr` under the given mode and node-visit budget.
///
/// The chosen tree always has an estimated cost no higher than the
/// original's (when estimates are available); ties break on fewer nodes,
/// then the lexicographically smaller rendering.
pub fn optimize(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    params: &CostParams,
    est_opts: &EstimateOptions,
    mode: OptimizeMode,
    budget: usize,
) -> Result<PlanChoice, OptimizeError> {
    infer_schema(expr, catalog)?;
    let estimate = |e: &AlgebraExpr| -> Result<Option<CostEstimate>, OptimizeError> {
        match estimate_plan(e, catalog, params, est_opts) {
            Ok(est) => Ok(Some(est)),
            Err(CostError::MissingStats { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let blocked = scan_blocked(expr, catalog);
    let est_original = estimate(expr)?;

    let (chosen, applied, budget_exhausted) = match mode {
        OptimizeMode::Off => (expr.clone(), Vec::new(), false),
        OptimizeMode::Heuristic => {
            let (chosen, applied) = greedy_pass(expr, catalog);
            (chosen, applied, false)
        }
        OptimizeMode::Exhaustive => {
            match exhaustive_pass(expr, catalog, params, est_opts, budget)? {
                Some(found) => (found.0, found.1, false),
                None => {
                    let (chosen, applied) = greedy_pass(expr, catalog);
                    (chosen, applied, true)
                }
            }
        }
    };

    let est_chosen = estimate(&chosen)?;
    // never pick a plan the estimates say is worse
    if let (Some(orig), Some(new)) = (&est_original, &est_chosen) {
        if new.total() > orig.total() {
            return Ok(PlanChoice {
                original: expr.clone(),
                chosen: expr.clone(),
                applied_rules: Vec::new(),
                blocked,
                est_chosen: est_original.clone(),
                est_original,
                budget_exhausted,
            });
        }
    }
    Ok(PlanChoice {
        original: expr.clone(),
        chosen,
        applied_rules: applied,
        blocked,
        est_original,
        est_chosen,
        budget_exhausted,
    })
}

/// Rules the greedy pass applies, in priority order: merge split selections
/// back through the directly-follows operator, push projections into it,
/// push selections into joins, and split conjunctive selections.
const GREEDY_STEPS: [(RuleId, RewriteDirection); 5] = [
    (RuleId::P17, RewriteDirection::Backward),
    (RuleId::P18, RewriteDirection::Backward),
    (RuleId::P19, RewriteDirection::Backward),
    (RuleId::E5, RewriteDirection::Forward),
    (RuleId::E1, RewriteDirection::Forward),
];

fn greedy_pass(expr: &AlgebraExpr, catalog: &Catalog) -> (AlgebraExpr, Vec<AppliedRewrite>) {
    let mut current = expr.clone();
    let mut applied = Vec::new();
    // every greedy step moves an operator strictly towards the leaves, so a
    // fixpoint exists; the cap is a safety valve
    'outer: for _ in 0..10_000 {
        for path in current.paths() {
            for (rule, direction) in GREEDY_STEPS {
                if let Ok(next) = apply_rule(rule, direction, &current, &path, catalog) {
                    applied.push(AppliedRewrite {
                        rule,
                        direction,
                        path,
                    });
                    current = next;
                    continue 'outer;
                }
            }
        }
        break;
    }
    (current, applied)
}

/// Side-condition failures over the original tree, for `explain` output.
fn scan_blocked(expr: &AlgebraExpr, catalog: &Catalog) -> Vec<BlockedRewrite> {
    let mut blocked = BTreeSet::new();
    for path in expr.paths() {
        for rule in RuleId::ALL {
            for direction in [RewriteDirection::Forward, RewriteDirection::Backward] {
                if let Err(RuleError::SideConditionUnverified { missing, .. }) =
                    apply_rule(rule, direction, expr, &path, catalog)
                {
                    blocked.insert(BlockedRewrite {
                        rule,
                        direction,
                        path: path.clone(),
                        reason: missing,
                    });
                }
            }
        }
    }
    blocked.into_iter().collect()
}

type Found = (AlgebraExpr, Vec<AppliedRewrite>);

/// Memoized breadth-first exploration of the rewrite space. Returns `None`
/// when the budget is exceeded before the space closes.
fn exhaustive_pass(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    params: &CostParams,
    est_opts: &EstimateOptions,
    budget: usize,
) -> Result<Option<Found>, OptimizeError> {
    struct SeenEntry {
        expr: AlgebraExpr,
        parent: Option<(String, AppliedRewrite)>,
    }

    let root_key = render(expr);
    let mut seen: BTreeMap<String, SeenEntry> = BTreeMap::new();
    seen.insert(
        root_key.clone(),
        SeenEntry {
            expr: expr.clone(),
            parent: None,
        },
    );
    let mut queue: VecDeque<String> = VecDeque::from([root_key.clone()]);
    let mut visits = 0usize;

    while let Some(key) = queue.pop_front() {
        visits += 1;
        if visits > budget {
            return Ok(None);
        }
        let current = seen[&key].expr.clone();
        for path in current.paths() {
            for rule in RuleId::ALL {
                for direction in [RewriteDirection::Forward, RewriteDirection::Backward] {
                    let Ok(next) = apply_rule(rule, direction, &current, &path, catalog) else {
                        continue;
                    };
                    let next_key = render(&next);
                    if seen.contains_key(&next_key) {
                        continue;
                    }
                    seen.insert(
                        next_key.clone(),
                        SeenEntry {
                            expr: next,
                            parent: Some((
                                key.clone(),
                                AppliedRewrite {
                                    rule,
                                    direction,
                                    path: path.clone(),
                                },
                            )),
                        },
                    );
                    queue.push_back(next_key);
                }
            }
        }
    }

    // rank every reachable tree; estimates must exist in exhaustive mode
    let mut best: Option<(&String, CostEstimate)> = None;
    for (key, entry) in &seen {
        let est = estimate_plan(&entry.expr, catalog, params, est_opts)?;
        let better = match &best {
            None => true,
            Some((best_key, best_est)) => {
                let (t, bt) = (est.total(), best_est.total());
                t < bt
                    || (t == bt && {
                        let (n, bn) = (
                            entry.expr.node_count(),
                            seen[*best_key].expr.node_count(),
                        );
                        n < bn || (n == bn && key < best_key)
                    })
            }
        };
        if better {
            best = Some((key, est));
        }
    }
    let (best_key, _) = best.expect("seen contains at least the original");

    // walk parents back to the root to recover the applied chain
    let mut chain = Vec::new();
    let mut cursor = best_key.clone();
    while let Some((parent, rewrite)) = &seen[&cursor].parent {
        chain.push(rewrite.clone());
        cursor = parent.clone();
    }
    chain.reverse();
    Ok(Some((seen[best_key].expr.clone(), chain)))
}
