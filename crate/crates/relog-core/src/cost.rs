//! Analytical disk-block cost model.
//!
//! Costs are measured in disk blocks read or written, computed in exact
//! rational arithmetic and rounded up to whole blocks only for reporting.
//! The composite directly-follows cost splits into five components: the
//! self-join of the log, storing its result, the join against the log that
//! finds events in between, storing that result, and the set minus.
//!
//! Block accounting for whole plans: a base scan pays the blocks of the
//! relation (a selection directly over a base relation may use an index
//! instead, paying the matching fraction plus one block to load the index,
//! whichever is cheaper); operators over inputs resident in memory pay
//! nothing extra; non-resident inputs are re-read, block-nested when both
//! sides of a binary operator overflow memory; results that do not fit are
//! written out.

use std::collections::BTreeMap;
use std::fmt;

use num::rational::Ratio;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::algebra::{infer_schema, AlgebraExpr, NodePath, SchemaError};
use crate::catalog::{collect_selectivity, Catalog};
use crate::eval::DfStrategy;

/// Disk blocks as an exact rational.
pub type Blocks = Ratio<i128>;

pub fn blocks(n: i128) -> Blocks {
    Ratio::from_integer(n)
}

/// How "fits in memory" treats intermediate results while the log is still
/// needed: `Generous` compares against all of memory, `Strict` reserves the
/// blocks pinned by the log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MemoryAccounting {
    #[default]
    Generous,
    Strict,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CostError {
    #[error("invalid cost parameters: {0}")]
    InvalidParams(String),
    #[error("missing statistics for relation '{relation}': {what}")]
    MissingStats { relation: String, what: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Parameters of the cost formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams {
    /// Number of events in the log (N).
    pub events: u64,
    /// Number of cases (V).
    pub cases: u64,
    /// Tuples per disk block (F).
    pub block_factor: u64,
    /// Total memory in blocks (M).
    pub memory_blocks: u64,
    /// Default selection fraction (Q).
    pub selectivity: Blocks,
    /// Bytes per tuple; display only.
    pub tuple_bytes: u64,
    pub accounting: MemoryAccounting,
}

impl CostParams {
    pub fn new(events: u64, cases: u64, block_factor: u64, memory_blocks: u64) -> Result<Self, CostError> {
        let p = CostParams {
            events,
            cases,
            block_factor,
            memory_blocks,
            selectivity: Ratio::new(1, 10),
            tuple_bytes: 80,
            accounting: MemoryAccounting::Generous,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_selectivity(mut self, q: Blocks) -> Self {
        self.selectivity = q;
        self
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.cases < 1 || self.events < self.cases {
            return Err(CostError::InvalidParams(format!(
                "need events >= cases >= 1, got events={} cases={}",
                self.events, self.cases
            )));
        }
        if self.block_factor < 1 || self.memory_blocks < 1 {
            return Err(CostError::InvalidParams(
                "block factor and memory size must be at least 1".to_string(),
            ));
        }
        if self.selectivity.is_negative() || self.selectivity > Ratio::one() {
            return Err(CostError::InvalidParams(format!(
                "selectivity must be in [0, 1], got {}",
                self.selectivity
            )));
        }
        Ok(())
    }

    /// Blocks holding the log: N / F.
    pub fn b_log(&self) -> Blocks {
        Ratio::new(self.events as i128, self.block_factor as i128)
    }

    /// Average events per case: N / V.
    pub fn events_per_case(&self) -> Blocks {
        Ratio::new(self.events as i128, self.cases as i128)
    }

    fn memory(&self) -> Blocks {
        blocks(self.memory_blocks as i128)
    }

    fn fits_intermediate(&self, result_blocks: Blocks) -> bool {
        let available = match self.accounting {
            MemoryAccounting::Generous => self.memory(),
            MemoryAccounting::Strict => self.memory() - self.b_log(),
        };
        result_blocks <= available
    }
}

/// Cost components of an estimate. `Scan` covers base reads (including the
/// index block of an index-assisted selection, reported under `Other`);
/// the five composite components keep their roles; generic binary operators
/// accumulate under `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CostComponent {
    Scan,
    Join1,
    Result1,
    Join2,
    Result2,
    Minus,
    Other,
}

impl CostComponent {
    pub const ALL: [CostComponent; 7] = [
        CostComponent::Scan,
        CostComponent::Join1,
        CostComponent::Result1,
        CostComponent::Join2,
        CostComponent::Result2,
        CostComponent::Minus,
        CostComponent::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CostComponent::Scan => "scan",
            CostComponent::Join1 => "join1",
            CostComponent::Result1 => "result1",
            CostComponent::Join2 => "join2",
            CostComponent::Result2 => "result2",
            CostComponent::Minus => "minus",
            CostComponent::Other => "other",
        }
    }
}

/// Cost estimate as a map from component to exact blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostEstimate {
    components: BTreeMap<CostComponent, Blocks>,
}

impl CostEstimate {
    pub fn add(&mut self, component: CostComponent, amount: Blocks) {
        if !amount.is_zero() {
            *self.components.entry(component).or_insert_with(Blocks::zero) += amount;
        }
    }

    pub fn merge(&mut self, other: &CostEstimate) {
        for (c, v) in &other.components {
            self.add(*c, *v);
        }
    }

    pub fn component(&self, component: CostComponent) -> Blocks {
        self.components
            .get(&component)
            .copied()
            .unwrap_or_else(Blocks::zero)
    }

    /// Exact total: the sum of the components.
    pub fn total(&self) -> Blocks {
        self.components.values().copied().sum()
    }

    /// Per-component blocks rounded up, plus their sum.
    pub fn rounded(&self) -> RoundedCost {
        let per: Vec<(CostComponent, i128)> = CostComponent::ALL
            .iter()
            .map(|c| (*c, self.component(*c).ceil().to_integer()))
            .collect();
        let total = per.iter().map(|(_, v)| v).sum();
        RoundedCost {
            components: per,
            total,
        }
    }
}

/// Report view of a [`CostEstimate`]: whole blocks, rounded up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundedCost {
    pub components: Vec<(CostComponent, i128)>,
    pub total: i128,
}

impl fmt::Display for RoundedCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, v) in &self.components {
            if *v != 0 {
                writeln!(f, "{:<8} {v}", c.label())?;
            }
        }
        write!(f, "{:<8} {}", "total", self.total)
    }
}

/// Block-nested-loop join (or minus) cost over two relations of `b_r` and
/// `b_s` blocks with memory `m`: `b_r + b_s` when one side fits in memory,
/// `b_r + (b_s / m) * b_r` otherwise. The left operand plays the outer role;
/// swapping operands changes the total.
pub fn bnl_cost(b_r: Blocks, b_s: Blocks, m: Blocks) -> Blocks {
    if b_r.min(b_s) <= m {
        b_r + b_s
    } else {
        b_r + (b_s / m) * b_r
    }
}

/// Pairs of events that directly or indirectly follow each other in some
/// case: V * (n * (n - 1)) / 2 with n = N / V. This is the cardinality of
/// the first join of the composite operator.
pub fn following_pairs(p: &CostParams) -> Blocks {
    let v = blocks(p.cases as i128);
    let n = p.events_per_case();
    v * (n * (n - Blocks::one())) / blocks(2)
}

/// Pairs of events that indirectly follow each other: `following_pairs`
/// minus the V * (n - 1) directly-following pairs. This is the cardinality
/// of the projected middle join.
pub fn indirect_pairs(p: &CostParams) -> Blocks {
    let v = blocks(p.cases as i128);
    let n = p.events_per_case();
    following_pairs(p) - v * (n - Blocks::one())
}

/// The five-component cost of evaluating the composite directly-follows
/// operator over a log stored on disk.
pub fn composite_df_cost(p: &CostParams) -> CostEstimate {
    composite_df_components(p, p.b_log(), false)
}

/// Component breakdown with an explicit input size and residency; used by
/// whole-plan estimation where the operator may read an intermediate result
/// rather than the stored log. `input_resident` means the input is already
/// in memory, so no read is charged for it.
fn composite_df_components(p: &CostParams, b_in: Blocks, input_resident: bool) -> CostEstimate {
    let m = p.memory();
    let f = blocks(p.block_factor as i128);
    let two = blocks(2);

    let t1 = following_pairs(p).max(Blocks::zero());
    let r1_blocks = t1 * two / f;
    let t2 = indirect_pairs(p).max(Blocks::zero());
    let r2_blocks = t2 * two / f;

    let join1 = if input_resident {
        Blocks::zero()
    } else if b_in <= m {
        b_in
    } else {
        bnl_cost(b_in, b_in, m)
    };
    let result1 = if p.fits_intermediate(r1_blocks) {
        Blocks::zero()
    } else {
        r1_blocks
    };
    let join2 = if b_in <= m {
        Blocks::zero()
    } else {
        b_in + (r1_blocks / m) * b_in
    };
    let result2 = if p.fits_intermediate(r2_blocks) {
        Blocks::zero()
    } else {
        r2_blocks
    };
    let minus = if p.fits_intermediate(r2_blocks) {
        Blocks::zero()
    } else {
        result1 + (result1 / m) * result2
    };

    let mut est = CostEstimate::default();
    est.add(CostComponent::Join1, join1);
    est.add(CostComponent::Result1, result1);
    est.add(CostComponent::Join2, join2);
    est.add(CostComponent::Result2, result2);
    est.add(CostComponent::Minus, minus);
    est
}

/// Order of the composite cost: (N²/V / F / M) * (N²/V / F).
/// With M = N/F this simplifies to N³ / V² / F.
pub fn order_of_cost(p: &CostParams) -> Blocks {
    let n = blocks(p.events as i128);
    let v = blocks(p.cases as i128);
    let f = blocks(p.block_factor as i128);
    let m = blocks(p.memory_blocks as i128);
    let intermediate = n * n / v / f;
    (intermediate / m) * intermediate
}

/// Whether selection runs before or after the directly-follows operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecutionSequence {
    SelectFirst,
    SelectLast,
}

/// Whether intermediate results stay in memory or spill to disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Residency {
    InMemory,
    OnDisk,
}

/// Order-of-cost of running a selection and a directly-follows extraction in
/// either sequence:
///
/// | sequence      | in memory | on disk        |
/// |---------------|-----------|----------------|
/// | select last   | B         | B (N/V)²       |
/// | select first  | B Q       | Q B (N/V)²     |
pub fn table5_order(sequence: ExecutionSequence, residency: Residency, p: &CostParams) -> Blocks {
    let b = p.b_log();
    let npc = p.events_per_case();
    match (sequence, residency) {
        (ExecutionSequence::SelectLast, Residency::InMemory) => b,
        (ExecutionSequence::SelectLast, Residency::OnDisk) => b * npc * npc,
        (ExecutionSequence::SelectFirst, Residency::InMemory) => b * p.selectivity,
        (ExecutionSequence::SelectFirst, Residency::OnDisk) => p.selectivity * b * npc * npc,
    }
}

/// Ways of getting a directly-follows relation out of a stored log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Query, store to a flat file, load into the mining tool.
    IntermediateStorage,
    /// Stream the query result straight into the mining tool.
    DatabaseConnection,
    /// Native operator inside the engine: one pass over the log.
    NativeOperator,
    /// Composite expansion into joins, projection, and minus.
    CompositeOperator,
}

/// One row of the strategy comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyCost {
    pub strategy: Strategy,
    /// Order expression in terms of B, the blocks of the log.
    pub order: &'static str,
    pub blocks: Blocks,
}

/// Strategy comparison: intermediate storage reads/writes the log three
/// times, a direct connection and the native operator read it once, and the
/// composite operator is priced by its five components.
pub fn strategy_costs(p: &CostParams) -> Vec<StrategyCost> {
    let b = p.b_log();
    vec![
        StrategyCost {
            strategy: Strategy::IntermediateStorage,
            order: "3*B",
            blocks: blocks(3) * b,
        },
        StrategyCost {
            strategy: Strategy::DatabaseConnection,
            order: "B",
            blocks: b,
        },
        StrategyCost {
            strategy: Strategy::NativeOperator,
            order: "B",
            blocks: b,
        },
        StrategyCost {
            strategy: Strategy::CompositeOperator,
            order: "B up to B^3",
            blocks: composite_df_cost(p).total(),
        },
    ]
}

/// Options for whole-plan estimation.
#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateOptions {
    /// How directly-follows nodes are priced.
    pub df_pricing: DfStrategy,
    /// Measure the selectivity of selections over loaded base relations
    /// instead of using the default Q.
    pub measure_selectivity: bool,
}

/// Whole-plan estimate plus the cost attributed to each node.
#[derive(Clone, Debug)]
pub struct PlanCost {
    pub estimate: CostEstimate,
    pub node_costs: Vec<(NodePath, Blocks)>,
}

struct NodeShape {
    /// Estimated output tuples.
    tuples: Blocks,
    /// Estimated distinct cases in the output, when derivable.
    cases: Option<Blocks>,
    /// Output tuple width in base-tuple units.
    width: Blocks,
    /// Output blocks.
    out_blocks: Blocks,
    /// Output fits in memory.
    resident: bool,
}

/// Estimate the disk-block cost of evaluating a whole plan.
pub fn estimate_plan(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    p: &CostParams,
    opts: &EstimateOptions,
) -> Result<CostEstimate, CostError> {
    estimate_plan_detailed(expr, catalog, p, opts).map(|pc| pc.estimate)
}

/// Like [`estimate_plan`] but also returns per-node costs for reporting.
pub fn estimate_plan_detailed(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    p: &CostParams,
    opts: &EstimateOptions,
) -> Result<PlanCost, CostError> {
    p.validate()?;
    infer_schema(expr, catalog)?;
    let mut plan = PlanCost {
        estimate: CostEstimate::default(),
        node_costs: Vec::new(),
    };
    estimate_node(expr, catalog, p, opts, &mut Vec::new(), &mut plan)?;
    Ok(plan)
}

fn estimate_node(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    p: &CostParams,
    opts: &EstimateOptions,
    path: &mut NodePath,
    plan: &mut PlanCost,
) -> Result<NodeShape, CostError> {
    let m = blocks(p.memory_blocks as i128);
    let f = blocks(p.block_factor as i128);
    let mut local = CostEstimate::default();
    let child_at = |idx: usize,
                        child: &AlgebraExpr,
                        path: &mut NodePath,
                        plan: &mut PlanCost|
     -> Result<NodeShape, CostError> {
        path.push(idx);
        let shape = estimate_node(child, catalog, p, opts, path, plan);
        path.pop();
        shape
    };

    let shape = match expr {
        AlgebraExpr::BaseRel(name) => {
            let meta = catalog.meta(name).ok_or_else(|| CostError::MissingStats {
                relation: name.clone(),
                what: "relation is not in the catalog".to_string(),
            })?;
            let tuples = blocks(meta.stats.events as i128);
            let b = tuples / f;
            local.add(CostComponent::Scan, b);
            NodeShape {
                tuples,
                cases: meta.stats.cases.map(|v| blocks(v as i128)),
                width: Blocks::one(),
                out_blocks: b,
                resident: b <= m,
            }
        }
        AlgebraExpr::Select { condition, input } => {
            let q = selection_fraction(condition, input, catalog, p, opts)?;
            if let AlgebraExpr::BaseRel(name) = input.as_ref() {
                // selection directly over a stored relation: an index read of
                // the matching fraction plus one block for the index itself,
                // when cheaper than the full scan
                let meta = catalog.meta(name).ok_or_else(|| CostError::MissingStats {
                    relation: name.clone(),
                    what: "relation is not in the catalog".to_string(),
                })?;
                let tuples = blocks(meta.stats.events as i128);
                let b = tuples / f;
                let indexed = q * b + Blocks::one();
                if indexed < b {
                    local.add(CostComponent::Scan, q * b);
                    local.add(CostComponent::Other, Blocks::one());
                } else {
                    local.add(CostComponent::Scan, b);
                }
                let out_tuples = q * tuples;
                let out_blocks = out_tuples / f;
                NodeShape {
                    tuples: out_tuples,
                    cases: meta.stats.cases.map(|v| blocks(v as i128)),
                    width: Blocks::one(),
                    out_blocks,
                    resident: out_blocks <= m,
                }
            } else {
                let child = child_at(0, input, path, plan)?;
                let out_tuples = q * child.tuples;
                let out_blocks = out_tuples * child.width / f;
                NodeShape {
                    tuples: out_tuples,
                    cases: child.cases,
                    width: child.width,
                    out_blocks,
                    resident: out_blocks <= m,
                }
            }
        }
        AlgebraExpr::Project { input, .. }
        | AlgebraExpr::RenameAttr { input, .. }
        | AlgebraExpr::RenamePrefix { input, .. } => child_at(0, input, path, plan)?,
        AlgebraExpr::Product { left, right } | AlgebraExpr::Join { left, right, .. } => {
            let l = child_at(0, left, path, plan)?;
            let r = child_at(1, right, path, plan)?;
            local.add(CostComponent::Other, binary_read_cost(&l, &r, m));
            let tuples = l.tuples * r.tuples;
            let width = l.width + r.width;
            let out_blocks = tuples * width / f;
            let resident = out_blocks <= m;
            if !resident {
                local.add(CostComponent::Other, out_blocks); // spill
            }
            NodeShape {
                tuples,
                cases: l.cases,
                width,
                out_blocks,
                resident,
            }
        }
        AlgebraExpr::Union { left, right }
        | AlgebraExpr::Intersect { left, right }
        | AlgebraExpr::Minus { left, right } => {
            let l = child_at(0, left, path, plan)?;
            let r = child_at(1, right, path, plan)?;
            local.add(CostComponent::Other, binary_read_cost(&l, &r, m));
            let tuples = match expr {
                AlgebraExpr::Union { .. } => l.tuples + r.tuples,
                AlgebraExpr::Intersect { .. } => l.tuples.min(r.tuples),
                _ => l.tuples,
            };
            let out_blocks = tuples * l.width / f;
            NodeShape {
                tuples,
                cases: l.cases,
                width: l.width,
                out_blocks,
                resident: out_blocks <= m,
            }
        }
        AlgebraExpr::DirectlyFollows { input, .. } => {
            let child = child_at(0, input, path, plan)?;
            let cases = child.cases.ok_or_else(|| CostError::MissingStats {
                relation: base_name_of(input).unwrap_or_else(|| "<subquery>".to_string()),
                what: "case count (V) unknown; declare a case attribute".to_string(),
            })?;
            let width = child.width * blocks(2);
            if cases <= Blocks::zero() {
                // an empty log has an empty directly-follows relation
                NodeShape {
                    tuples: Blocks::zero(),
                    cases: Some(Blocks::zero()),
                    width,
                    out_blocks: Blocks::zero(),
                    resident: true,
                }
            } else {
                // params restated for this node's input
                let sub = CostParams {
                    events: ratio_to_u64_ceil(child.tuples),
                    cases: ratio_to_u64_ceil(cases).max(1),
                    ..*p
                };
                let n = child.tuples / cases;
                let direct_pairs = (cases * (n - Blocks::one())).max(Blocks::zero());
                let out_blocks = direct_pairs * width / f;
                match opts.df_pricing {
                    DfStrategy::Native => {
                        if !child.resident {
                            local.add(CostComponent::Scan, child.out_blocks);
                        }
                    }
                    DfStrategy::Composite => {
                        let components =
                            composite_df_components(&sub, child.out_blocks, child.resident);
                        local.merge(&components);
                    }
                }
                NodeShape {
                    tuples: direct_pairs,
                    cases: Some(cases),
                    width,
                    out_blocks,
                    resident: out_blocks <= m,
                }
            }
        }
    };

    plan.node_costs.push((path.clone(), local.total()));
    plan.estimate.merge(&local);
    Ok(shape)
}

fn base_name_of(expr: &AlgebraExpr) -> Option<String> {
    match expr {
        AlgebraExpr::BaseRel(name) => Some(name.clone()),
        _ => expr
            .children()
            .first()
            .and_then(|c| base_name_of(c)),
    }
}

fn ratio_to_u64_ceil(r: Blocks) -> u64 {
    r.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// Read cost of a binary operator over its two inputs.
fn binary_read_cost(l: &NodeShape, r: &NodeShape, m: Blocks) -> Blocks {
    match (l.resident, r.resident) {
        (true, true) => Blocks::zero(),
        (true, false) => r.out_blocks,
        (false, true) => l.out_blocks,
        (false, false) => bnl_cost(l.out_blocks, r.out_blocks, m),
    }
}

fn selection_fraction(
    condition: &crate::algebra::Condition,
    input: &AlgebraExpr,
    catalog: &Catalog,
    p: &CostParams,
    opts: &EstimateOptions,
) -> Result<Blocks, CostError> {
    if opts.measure_selectivity {
        if let AlgebraExpr::BaseRel(name) = input {
            if let Some(relation) = catalog.relation(name) {
                if let Ok(q) = collect_selectivity(relation, condition) {
                    return Ok(q);
                }
            }
        }
    }
    Ok(p.selectivity)
}

/// Axis of a cost sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Events per case; the event count becomes cases * x.
    EventsPerCase,
    Events,
    MemoryBlocks,
    Selectivity,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<SweepAxis> {
        match s {
            "events_per_case" => Some(SweepAxis::EventsPerCase),
            "N" | "events" => Some(SweepAxis::Events),
            "M" | "memory_blocks" => Some(SweepAxis::MemoryBlocks),
            "Q" | "selectivity" => Some(SweepAxis::Selectivity),
            _ => None,
        }
    }
}

/// Composite-operator cost at each point of the axis.
pub fn sweep(
    base: &CostParams,
    axis: SweepAxis,
    values: impl IntoIterator<Item = Blocks>,
) -> Result<Vec<(Blocks, CostEstimate)>, CostError> {
    let mut out = Vec::new();
    for x in values {
        let mut p = *base;
        match axis {
            SweepAxis::EventsPerCase => {
                p.events = ratio_to_u64_ceil(blocks(base.cases as i128) * x);
            }
            SweepAxis::Events => p.events = ratio_to_u64_ceil(x),
            SweepAxis::MemoryBlocks => p.memory_blocks = ratio_to_u64_ceil(x).max(1),
            SweepAxis::Selectivity => p.selectivity = x,
        }
        p.validate()?;
        out.push((x, composite_df_cost(&p)));
    }
    if out.is_empty() {
        return Err(CostError::InvalidParams("empty sweep range".to_string()));
    }
    Ok(out)
}

/// Indices of upward jumps in a cost curve: points whose total exceeds the
/// previous total by more than `factor`.
pub fn detect_jumps(curve: &[(Blocks, CostEstimate)], factor: Blocks) -> Vec<usize> {
    let mut jumps = Vec::new();
    for i in 1..curve.len() {
        let prev = curve[i - 1].1.total();
        let here = curve[i].1.total();
        if prev > Blocks::zero() && here > prev * factor {
            jumps.push(i);
        }
    }
    jumps
}

/// Smallest events-per-case value at which the first join's result stops
/// fitting in memory: least n with V * n * (n-1) / F > M.
pub fn result1_threshold(p: &CostParams) -> u64 {
    smallest_n(p, 0)
}

/// Smallest events-per-case value at which the middle join's projected
/// result stops fitting: least n with V * (n-1) * (n-2) / F > M.
pub fn result2_threshold(p: &CostParams) -> u64 {
    smallest_n(p, 1)
}

fn smallest_n(p: &CostParams, shift: u64) -> u64 {
    let v = p.cases as i128;
    let bound = (p.memory_blocks as i128) * (p.block_factor as i128);
    let crosses = |n: u64| -> bool {
        let a = (n - shift) as i128;
        let b = a - 1;
        v * a * b > bound
    };
    // start near the positive root of v n^2 = bound
    let mut n = (((bound / v).max(0) as f64).sqrt() as u64).saturating_sub(2) + shift;
    n = n.max(shift + 2);
    while crosses(n) && n > shift + 2 {
        n -= 1;
    }
    while !crosses(n) {
        n += 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_42() -> CostParams {
        CostParams::new(10_000, 500, 50, 200).unwrap()
    }

    #[test]
    fn bnl_in_memory_branch() {
        assert_eq!(bnl_cost(blocks(200), blocks(200), blocks(250)), blocks(400));
        assert_eq!(bnl_cost(blocks(1), blocks(1), blocks(1)), blocks(2));
    }

    #[test]
    fn bnl_overflow_branch() {
        assert_eq!(
            bnl_cost(blocks(200), blocks(3800), blocks(100)),
            blocks(7800)
        );
    }

    #[test]
    fn pair_formulas_match_worked_example() {
        let p = params_42();
        assert_eq!(following_pairs(&p), blocks(95_000));
        assert_eq!(indirect_pairs(&p), blocks(85_500));
    }

    #[test]
    fn composite_cost_collapses_when_everything_fits() {
        let p = CostParams::new(10_000, 500, 50, 1_000_000).unwrap();
        let est = composite_df_cost(&p);
        assert_eq!(est.total(), p.b_log());
        assert_eq!(est.component(CostComponent::Join1), blocks(200));
        assert_eq!(est.component(CostComponent::Minus), Blocks::zero());
    }

    #[test]
    fn composite_cost_with_spilled_intermediates() {
        let p = params_42();
        let est = composite_df_cost(&p);
        assert_eq!(est.component(CostComponent::Join1), blocks(200));
        assert_eq!(est.component(CostComponent::Result1), blocks(3800));
        assert_eq!(est.component(CostComponent::Join2), Blocks::zero());
        assert_eq!(est.component(CostComponent::Result2), blocks(3420));
        assert_eq!(est.component(CostComponent::Minus), blocks(3800 + 19 * 3420));
        assert_eq!(est.total(), blocks(76_200));
    }

    #[test]
    fn order_of_cost_matches_worked_example() {
        let p = params_42();
        assert_eq!(order_of_cost(&p), blocks(80_000));
    }

    #[test]
    fn order_of_cost_simplifies_with_m_equal_n_over_f() {
        // M = N/F makes the order exactly N^3 / V^2 / F
        let p = CostParams::new(1_000_000, 1_000, 50, 20_000).unwrap();
        let n = blocks(1_000_000);
        let v = blocks(1_000);
        let f = blocks(50);
        assert_eq!(order_of_cost(&p), n * n * n / (v * v) / f);
        assert_eq!(order_of_cost(&p), blocks(20_000_000_000));
    }

    #[test]
    fn table5_values() {
        let p = params_42();
        assert_eq!(
            table5_order(ExecutionSequence::SelectFirst, Residency::InMemory, &p),
            blocks(20)
        );
        assert_eq!(
            table5_order(ExecutionSequence::SelectLast, Residency::OnDisk, &p),
            blocks(80_000)
        );
        assert_eq!(
            table5_order(ExecutionSequence::SelectLast, Residency::InMemory, &p),
            blocks(200)
        );
        let full = params_42().with_selectivity(Blocks::one());
        assert_eq!(
            table5_order(ExecutionSequence::SelectFirst, Residency::InMemory, &full),
            table5_order(ExecutionSequence::SelectLast, Residency::InMemory, &full)
        );
        assert_eq!(
            table5_order(ExecutionSequence::SelectFirst, Residency::OnDisk, &full),
            table5_order(ExecutionSequence::SelectLast, Residency::OnDisk, &full)
        );
    }

    #[test]
    fn strategy_relationships() {
        for b in [1u64, 200, 7_919] {
            let p = CostParams::new(b * 50, b.max(1), 50, 1_000_000).unwrap();
            let table = strategy_costs(&p);
            assert_eq!(table[0].blocks, blocks(3) * p.b_log());
            assert_eq!(table[1].blocks, p.b_log());
            assert_eq!(table[2].blocks, p.b_log());
            assert_eq!(table[3].blocks, composite_df_cost(&p).total());
        }
    }

    #[test]
    fn thresholds_solve_the_fit_inequalities() {
        let p = CostParams::new(2_000, 1_000, 50, 1_000_000).unwrap();
        let n1 = result1_threshold(&p);
        assert!(1_000 * (n1 as i128) * ((n1 as i128) - 1) > 50_000_000);
        assert!(1_000 * ((n1 as i128) - 1) * ((n1 as i128) - 2) <= 50_000_000);
        let n2 = result2_threshold(&p);
        assert_eq!(n2, n1 + 1);
    }

    #[test]
    fn sweep_with_infinite_memory_is_linear() {
        let p = CostParams::new(2_000, 1_000, 50, u64::MAX / 4).unwrap();
        let curve = sweep(&p, SweepAxis::EventsPerCase, (2i128..200).map(blocks)).unwrap();
        assert!(detect_jumps(&curve, blocks(2)).is_empty());
        for window in curve.windows(2) {
            assert!(window[1].1.total() >= window[0].1.total());
        }
    }

    #[test]
    fn monotone_in_params() {
        let base = CostParams::new(100_000, 500, 50, 2_000).unwrap();
        // non-decreasing in N
        let mut prev = Blocks::zero();
        for n in (100_000..200_000).step_by(10_000) {
            let p = CostParams::new(n, 500, 50, 2_000).unwrap();
            let total = composite_df_cost(&p).total();
            assert!(total >= prev, "total decreased at N={n}");
            prev = total;
        }
        // non-increasing in M
        let mut prev = composite_df_cost(&base).total();
        for m in (2_000..40_000).step_by(2_000) {
            let p = CostParams::new(100_000, 500, 50, m).unwrap();
            let total = composite_df_cost(&p).total();
            assert!(total <= prev, "total increased at M={m}");
            prev = total;
        }
        // non-increasing in F
        let mut prev = composite_df_cost(&base).total();
        for f in [50u64, 100, 200, 400] {
            let p = CostParams::new(100_000, 500, f, 2_000).unwrap();
            let total = composite_df_cost(&p).total();
            assert!(total <= prev, "total increased at F={f}");
            prev = total;
        }
    }

    #[test]
    fn strict_accounting_reserves_log_blocks() {
        // n = 10 per case: r1 = 100*90/50 = 180 blocks, log = 20 blocks.
        // With M = 190 the first result fits generously (180 <= 190) but not
        // strictly (180 > 190 - 20).
        let mut p = CostParams::new(1_000, 100, 50, 190).unwrap();
        p.accounting = MemoryAccounting::Generous;
        let generous = composite_df_cost(&p);
        assert_eq!(generous.component(CostComponent::Result1), Blocks::zero());
        p.accounting = MemoryAccounting::Strict;
        let strict = composite_df_cost(&p);
        assert_eq!(strict.component(CostComponent::Result1), blocks(180));
        assert!(strict.total() > generous.total());
    }

    #[test]
    fn rounded_report_ceils_components() {
        let mut est = CostEstimate::default();
        est.add(CostComponent::Scan, Ratio::new(41, 2));
        let rounded = est.rounded();
        assert_eq!(rounded.total, 21);
    }
}
