//! In-memory relational algebra engine for process-mining event logs.
//!
//! The engine provides the usual operators (selection, projection, renaming,
//! product, theta join, union, intersection, set minus) plus a first-class
//! `directly follows` operator that pairs consecutive events of a case. On
//! top of that sit a small query language, a rewrite-rule optimizer with
//! side-condition gating, and an analytical disk-block cost model.

pub mod algebra;
pub mod catalog;
pub mod cost;
pub mod eval;
pub mod optimizer;
pub mod parser;
pub mod relation;
pub mod testkit;

pub use algebra::{
    desugar_join, expand_all, expand_df, infer_schema, AlgebraExpr, Condition, Operand,
    SchemaError, SchemaErrorKind,
};
pub use catalog::{
    collect_selectivity, load_csv, load_path, validate_classes, AttrClass, Catalog, LoadOptions,
    RelationMeta, TotalityFact,
};
pub use cost::{
    bnl_cost, composite_df_cost, estimate_plan, order_of_cost, sweep, table5_order, Blocks,
    CostEstimate, CostParams, EstimateOptions,
};
pub use eval::{
    evaluate, evaluate_df_composite, evaluate_df_native, DfStrategy, EvalConfig, EvalError,
    EvalMetrics,
};
pub use optimizer::{
    apply_rule, optimize, verify_rule_on_instance, OptimizeMode, PlanChoice, RewriteDirection,
    RuleId,
};
pub use parser::{parse, render, ParseError, SourceSpan};
pub use relation::{
    insert_tuple, relation_equal, theta_compare, AttrName, CompareOp, Domain, Relation, Schema,
    Tuple, Value,
};
