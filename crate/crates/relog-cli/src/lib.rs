//! Command-line surface: parse, optimize, evaluate, estimate, validate.
//!
//! Exit codes are stable: 0 success, 1 query parse error, 2 schema or type
//! error, 3 missing relation or statistics, 4 validation violations,
//! 10 I/O or data loading failure, 64 usage error.

use std::collections::BTreeMap;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::rational::Ratio;
use num::ToPrimitive;

use relog_core::algebra::{render_path, AlgebraExpr, NodePath, SchemaErrorKind};
use relog_core::catalog::{load_path, validate_classes, Catalog};
use relog_core::cost::{
    blocks, composite_df_cost, estimate_plan_detailed, order_of_cost, strategy_costs, sweep,
    table5_order, Blocks, CostEstimate, CostParams, EstimateOptions, ExecutionSequence,
    MemoryAccounting, Residency, Strategy, SweepAxis,
};
use relog_core::eval::{evaluate, DfStrategy, EvalConfig, EvalError};
use relog_core::optimizer::{optimize, OptimizeError, OptimizeMode, PlanChoice};
use relog_core::cost::CostError;
use relog_core::parser::{parse, ParseError};
use relog_core::relation::{Relation, Tuple, Value};
use relog_core::SchemaError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_VIOLATIONS: i32 = 4;
pub const EXIT_IO: i32 = 10;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "relog",
    about = "Relational algebra engine for event logs with a directly-follows operator",
    version
)]
struct Cli {
    /// CSV file or directory of CSVs to load; `<stem>.meta` sidecars are
    /// consulted. Repeatable. Defaults to $RELOG_CATALOG.
    #[arg(long, global = true)]
    catalog: Vec<String>,

    /// Tuples per disk block (F).
    #[arg(long, global = true, default_value_t = 50)]
    block_factor: u64,

    /// Memory size in blocks (M).
    #[arg(long, global = true, default_value_t = 1_000_000)]
    memory_blocks: u64,

    /// Bytes per tuple (reporting only).
    #[arg(long, global = true, default_value_t = 80)]
    tuple_bytes: u64,

    /// Default selection fraction Q, as a decimal or a fraction like 1/10.
    #[arg(long, global = true, default_value = "0.1")]
    default_selectivity: String,

    /// Reserve the log's blocks when checking whether intermediates fit.
    #[arg(long, global = true)]
    strict_memory: bool,

    #[arg(long, global = true, value_enum, default_value_t = EngineArg::Native)]
    engine: EngineArg,

    #[arg(long, global = true, value_enum, default_value_t = OptimizeArg::Heuristic)]
    optimize: OptimizeArg,

    /// Node-visit budget for exhaustive optimization.
    #[arg(long, global = true, default_value_t = 5_000)]
    budget: usize,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Native,
    Composite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OptimizeArg {
    Off,
    Heuristic,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
    JsonLines,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, optimize, evaluate a query, and print the result.
    Run { query: String },
    /// Show the original and chosen plans with applied rules and costs.
    Explain { query: String },
    /// Analytical cost figures without touching any data.
    Cost(CostArgs),
    /// Check declared attribute classes against the data.
    Validate { relation: String },
}

#[derive(Args, Debug)]
struct CostArgs {
    /// Number of events (N).
    #[arg(long = "N", default_value_t = 10_000)]
    events: u64,
    /// Number of cases (V).
    #[arg(long = "V", default_value_t = 500)]
    cases: u64,
    /// Tuples per block (F); falls back to --block-factor.
    #[arg(long = "F")]
    block_factor: Option<u64>,
    /// Memory in blocks (M); falls back to --memory-blocks.
    #[arg(long = "M")]
    memory_blocks: Option<u64>,
    /// Selection fraction (Q); falls back to --default-selectivity.
    #[arg(long = "Q")]
    selectivity: Option<String>,
    /// Log size in blocks; sets N = B * F.
    #[arg(long = "B")]
    log_blocks: Option<u64>,

    /// Print the strategy comparison table.
    #[arg(long)]
    strategies: bool,
    /// Print only the selection-first order figure.
    #[arg(long, conflicts_with = "select_last")]
    select_first: bool,
    /// Print only the selection-last order figure.
    #[arg(long)]
    select_last: bool,
    /// Intermediates fit in memory (with --select-first/--select-last).
    #[arg(long, conflicts_with = "on_disk")]
    in_memory: bool,
    /// Intermediates spill to disk.
    #[arg(long)]
    on_disk: bool,

    /// Sweep axis: events_per_case, N, M, or Q. Emits CSV.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, requires = "sweep")]
    from: Option<i128>,
    #[arg(long, requires = "sweep")]
    to: Option<i128>,
    #[arg(long, requires = "sweep", default_value_t = 1)]
    step: i128,
}

/// Run the CLI; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendering but align exit codes with the documented set
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.message);
            e.code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn schema_failure(e: SchemaError) -> Failure {
    let code = if e.kind == SchemaErrorKind::UnknownRelation {
        EXIT_MISSING
    } else {
        EXIT_SCHEMA
    };
    Failure::new(code, format!("schema error: {e}"))
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Schema(s) => schema_failure(s),
        other => Failure::new(EXIT_SCHEMA, format!("evaluation error: {other}")),
    }
}

fn optimize_failure(e: OptimizeError) -> Failure {
    match e {
        OptimizeError::Schema(s) => schema_failure(s),
        OptimizeError::Cost(CostError::MissingStats { relation, what }) => Failure::new(
            EXIT_MISSING,
            format!("missing statistics for '{relation}': {what}"),
        ),
        OptimizeError::Cost(c) => Failure::new(EXIT_SCHEMA, format!("cost model error: {c}")),
    }
}

fn parse_failure(query: &str, e: &ParseError) -> Failure {
    let mut message = format!("parse error: {e}\n  {query}\n  ");
    for _ in 0..e.span.start {
        message.push(' ');
    }
    let width = (e.span.end.max(e.span.start + 1) - e.span.start).max(1);
    for _ in 0..width {
        message.push('^');
    }
    Failure::new(EXIT_PARSE, message)
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Run { query } => cmd_run(cli, query),
        Command::Explain { query } => cmd_explain(cli, query),
        Command::Cost(args) => cmd_cost(cli, args),
        Command::Validate { relation } => cmd_validate(cli, relation),
    }
}

fn parse_ratio(text: &str) -> Result<Blocks, Failure> {
    let bad = || {
        Failure::new(
            EXIT_USAGE,
            format!("cannot parse '{text}' as a decimal or fraction"),
        )
    };
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let n: i128 = num.trim().parse().map_err(|_| bad())?;
        let d: i128 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let whole: i128 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
        let frac_num: i128 = frac.parse().map_err(|_| bad())?;
        let sign = if text.starts_with('-') { -1 } else { 1 };
        return Ok(Ratio::new(whole * scale + sign * frac_num, scale));
    }
    let n: i128 = text.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

fn load_catalog(cli: &Cli) -> Result<Catalog, Failure> {
    let mut paths = cli.catalog.clone();
    if paths.is_empty() {
        if let Ok(env_path) = std::env::var("RELOG_CATALOG") {
            paths.extend(env_path.split(':').map(|s| s.to_string()));
        }
    }
    let mut catalog = Catalog::new();
    for path in paths {
        let (part, drops) = load_path(&path)
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot load catalog: {e}")))?;
        for (name, dropped) in drops {
            if dropped > 0 {
                eprintln!("warning: {name}: dropped {dropped} duplicate row(s)");
            }
            let relation = part.relation(&name).expect("just loaded").clone();
            let meta = part.meta(&name).expect("just loaded").clone();
            catalog.insert(name, relation, meta);
        }
    }
    Ok(catalog)
}

fn cost_params(cli: &Cli) -> Result<CostParams, Failure> {
    let q = parse_ratio(&cli.default_selectivity)?;
    // events/cases are placeholders: plan estimation pulls real statistics
    // from the catalog
    let mut p = CostParams::new(1, 1, cli.block_factor, cli.memory_blocks)
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?
        .with_selectivity(q);
    p.tuple_bytes = cli.tuple_bytes;
    if cli.strict_memory {
        p.accounting = MemoryAccounting::Strict;
    }
    p.validate()
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    Ok(p)
}

fn optimize_query(
    cli: &Cli,
    catalog: &Catalog,
    query: &str,
) -> Result<(AlgebraExpr, PlanChoice), Failure> {
    let expr = parse(query).map_err(|e| parse_failure(query, &e))?;
    let params = cost_params(cli)?;
    let est_opts = EstimateOptions {
        df_pricing: match cli.engine {
            EngineArg::Native => DfStrategy::Native,
            EngineArg::Composite => DfStrategy::Composite,
        },
        measure_selectivity: false,
    };
    let mode = match cli.optimize {
        OptimizeArg::Off => OptimizeMode::Off,
        OptimizeArg::Heuristic => OptimizeMode::Heuristic,
        OptimizeArg::Exhaustive => OptimizeMode::Exhaustive,
    };
    let choice = optimize(&expr, catalog, &params, &est_opts, mode, cli.budget)
        .map_err(optimize_failure)?;
    Ok((expr, choice))
}

fn cmd_run(cli: &Cli, query: &str) -> Result<i32, Failure> {
    let catalog = load_catalog(cli)?;
    let (_, choice) = optimize_query(cli, &catalog, query)?;
    let config = EvalConfig {
        df_strategy: match cli.engine {
            EngineArg::Native => DfStrategy::Native,
            EngineArg::Composite => DfStrategy::Composite,
        },
        collect_metrics: false,
    };
    let relation = evaluate(&choice.chosen, &catalog, config).map_err(eval_failure)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    print_relation(&mut out, &relation, cli.format)
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    Ok(EXIT_OK)
}

fn cmd_explain(cli: &Cli, query: &str) -> Result<i32, Failure> {
    let catalog = load_catalog(cli)?;
    let (_, choice) = optimize_query(cli, &catalog, query)?;
    let (Some(est_original), Some(est_chosen)) = (&choice.est_original, &choice.est_chosen) else {
        return Err(Failure::new(
            EXIT_MISSING,
            "statistics missing: declare case/time attributes so plans can be priced",
        ));
    };
    let params = cost_params(cli)?;
    let est_opts = EstimateOptions {
        df_pricing: match cli.engine {
            EngineArg::Native => DfStrategy::Native,
            EngineArg::Composite => DfStrategy::Composite,
        },
        measure_selectivity: false,
    };

    println!("original plan:");
    print_plan_with_costs(&choice.original, &catalog, &params, &est_opts);
    println!("estimated cost (blocks):\n{}", indent(&est_original.rounded().to_string()));
    println!();

    println!("rules applied:");
    if choice.applied_rules.is_empty() {
        println!("  none");
    } else {
        for (i, a) in choice.applied_rules.iter().enumerate() {
            println!(
                "  {}. {} {} ({}) at {}",
                i + 1,
                a.rule,
                a.rule.name(),
                a.direction,
                render_path(&a.path)
            );
        }
    }
    println!();

    println!("blocked rewrites:");
    if choice.blocked.is_empty() {
        println!("  none");
    } else {
        for b in &choice.blocked {
            println!(
                "  {} at {}: blocked: side condition: {}",
                b.rule,
                render_path(&b.path),
                b.reason
            );
        }
    }
    println!();

    println!("chosen plan:");
    print_plan_with_costs(&choice.chosen, &catalog, &params, &est_opts);
    println!("estimated cost (blocks):\n{}", indent(&est_chosen.rounded().to_string()));
    if choice.budget_exhausted {
        println!();
        println!("note: exploration budget exhausted; greedy result shown");
    }
    Ok(EXIT_OK)
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("  {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn print_plan_with_costs(
    expr: &AlgebraExpr,
    catalog: &Catalog,
    params: &CostParams,
    est_opts: &EstimateOptions,
) {
    let node_costs: BTreeMap<NodePath, Blocks> =
        match estimate_plan_detailed(expr, catalog, params, est_opts) {
            Ok(plan) => plan.node_costs.into_iter().collect(),
            Err(_) => BTreeMap::new(),
        };
    fn walk(
        expr: &AlgebraExpr,
        path: &mut NodePath,
        costs: &BTreeMap<NodePath, Blocks>,
        depth: usize,
    ) {
        let label = expr.node_label();
        let annotation = costs
            .get(path)
            .map(|c| format!("  [{} blocks]", c.ceil().to_integer()))
            .unwrap_or_default();
        println!("  {}{label}{annotation}", "  ".repeat(depth));
        for (i, child) in expr.children().into_iter().enumerate() {
            path.push(i);
            walk(child, path, costs, depth + 1);
            path.pop();
        }
    }
    walk(expr, &mut Vec::new(), &node_costs, 0);
}

fn cmd_validate(cli: &Cli, relation_name: &str) -> Result<i32, Failure> {
    let catalog = load_catalog(cli)?;
    let Some(relation) = catalog.relation(relation_name) else {
        return Err(Failure::new(
            EXIT_MISSING,
            format!("unknown relation '{relation_name}'"),
        ));
    };
    let meta = catalog.meta(relation_name).expect("inserted together");
    if meta.case_attr.is_none() || meta.time_attr.is_none() {
        return Err(Failure::new(
            EXIT_MISSING,
            format!("'{relation_name}' has no case/time attribute declarations"),
        ));
    }
    let violations = validate_classes(relation, meta);
    if violations.is_empty() {
        println!("{relation_name}: all declared attribute classes hold");
        Ok(EXIT_OK)
    } else {
        for v in &violations {
            println!(
                "{relation_name}: {} (case {}, at {})",
                v.message,
                display_value(&v.case),
                display_value(&v.at)
            );
        }
        println!("{}: {} violation(s)", relation_name, violations.len());
        Ok(EXIT_VIOLATIONS)
    }
}

fn cmd_cost(cli: &Cli, args: &CostArgs) -> Result<i32, Failure> {
    let f = args.block_factor.unwrap_or(cli.block_factor);
    let m = args.memory_blocks.unwrap_or(cli.memory_blocks);
    let events = match args.log_blocks {
        Some(b) => b * f,
        None => args.events,
    };
    let q = match &args.selectivity {
        Some(s) => parse_ratio(s)?,
        None => parse_ratio(&cli.default_selectivity)?,
    };
    let mut p = CostParams::new(events, args.cases, f, m)
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?
        .with_selectivity(q);
    p.tuple_bytes = cli.tuple_bytes;
    if cli.strict_memory {
        p.accounting = MemoryAccounting::Strict;
    }

    if let Some(axis_name) = &args.sweep {
        let axis = SweepAxis::parse(axis_name).ok_or_else(|| {
            Failure::new(
                EXIT_USAGE,
                format!("unknown sweep axis '{axis_name}' (events_per_case, N, M, Q)"),
            )
        })?;
        let (from, to) = match (args.from, args.to) {
            (Some(a), Some(b)) if a <= b && args.step > 0 => (a, b),
            _ => {
                return Err(Failure::new(
                    EXIT_USAGE,
                    "sweep needs --from <= --to and a positive --step",
                ))
            }
        };
        let values = (from..=to)
            .step_by(args.step as usize)
            .map(blocks)
            .collect::<Vec<_>>();
        let curve = sweep(&p, axis, values)
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        println!("x,join1,result1,join2,result2,minus,total");
        for (x, est) in curve {
            let r = est.rounded();
            let by_label = |label: &str| {
                r.components
                    .iter()
                    .find(|(c, _)| c.label() == label)
                    .map(|(_, v)| *v)
                    .unwrap_or(0)
            };
            println!(
                "{},{},{},{},{},{},{}",
                format_ratio(x),
                by_label("join1"),
                by_label("result1"),
                by_label("join2"),
                by_label("result2"),
                by_label("minus"),
                r.total
            );
        }
        return Ok(EXIT_OK);
    }

    if args.strategies {
        println!("{:<28} {:>12} {:>14}", "execution strategy", "order", "blocks");
        for row in strategy_costs(&p) {
            let name = match row.strategy {
                Strategy::IntermediateStorage => "with intermediate storage",
                Strategy::DatabaseConnection => "with database connection",
                Strategy::NativeOperator => "native operator",
                Strategy::CompositeOperator => "composite operator",
            };
            println!(
                "{:<28} {:>12} {:>14}",
                name,
                row.order,
                format_ratio_ceil(row.blocks)
            );
        }
        return Ok(EXIT_OK);
    }

    if args.select_first || args.select_last {
        let sequence = if args.select_first {
            ExecutionSequence::SelectFirst
        } else {
            ExecutionSequence::SelectLast
        };
        let residency = if args.on_disk {
            Residency::OnDisk
        } else {
            Residency::InMemory
        };
        let value = table5_order(sequence, residency, &p);
        println!("{}", format_ratio_ceil(value));
        return Ok(EXIT_OK);
    }

    // default: the composite breakdown plus the order figures
    let est: CostEstimate = composite_df_cost(&p);
    println!("composite directly-follows cost (blocks):");
    println!("{}", indent(&est.rounded().to_string()));
    println!();
    println!(
        "order of cost ((N^2/V/F/M) * N^2/V/F): {}",
        format_ratio_ceil(order_of_cost(&p))
    );
    println!();
    println!("execution sequence orders (blocks):");
    println!(
        "  select last,  in memory: {}",
        format_ratio_ceil(table5_order(ExecutionSequence::SelectLast, Residency::InMemory, &p))
    );
    println!(
        "  select last,  on disk:   {}",
        format_ratio_ceil(table5_order(ExecutionSequence::SelectLast, Residency::OnDisk, &p))
    );
    println!(
        "  select first, in memory: {}",
        format_ratio_ceil(table5_order(ExecutionSequence::SelectFirst, Residency::InMemory, &p))
    );
    println!(
        "  select first, on disk:   {}",
        format_ratio_ceil(table5_order(ExecutionSequence::SelectFirst, Residency::OnDisk, &p))
    );
    Ok(EXIT_OK)
}

fn format_ratio(r: Blocks) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{:.4}", r.to_f64().unwrap_or(f64::NAN))
    }
}

fn format_ratio_ceil(r: Blocks) -> String {
    r.ceil().to_integer().to_string()
}

/// Literal cell rendering: text unquoted, absents empty, timestamps in
/// HH:MM or ISO form.
pub fn display_value(v: &Value) -> String {
    match v {
        Value::Text(s) => s.to_string(),
        Value::Absent => String::new(),
        other => relog_core::algebra::render_value_literal(other),
    }
}

fn sorted_rows(relation: &Relation) -> (Vec<String>, Vec<Vec<String>>) {
    let columns: Vec<String> = relation
        .schema()
        .names()
        .map(|n| n.to_string())
        .collect();
    let order: Vec<_> = relation.schema().names().cloned().collect();
    let mut keyed: Vec<(Vec<Value>, Vec<String>)> = relation
        .tuples()
        .map(|t| {
            let key: Vec<Value> = order
                .iter()
                .map(|n| t.get(n).cloned().unwrap_or(Value::Absent))
                .collect();
            let display = key.iter().map(display_value).collect();
            (key, display)
        })
        .collect();
    keyed.sort();
    (columns, keyed.into_iter().map(|(_, d)| d).collect())
}

/// Print a relation sorted by all columns in schema order; identical bytes
/// for identical relations regardless of evaluation strategy.
pub fn print_relation(
    out: &mut impl Write,
    relation: &Relation,
    format: FormatArg,
) -> std::io::Result<()> {
    let (columns, rows) = sorted_rows(relation);
    match format {
        FormatArg::Table => {
            let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
            for row in &rows {
                for (i, cell) in row.iter().enumerate() {
                    widths[i] = widths[i].max(cell.len());
                }
            }
            let header: Vec<String> = columns
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            writeln!(out, "{}", header.join("  "))?;
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "{}", rule.join("  "))?;
            for row in &rows {
                let line: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                writeln!(out, "{}", line.join("  ").trim_end())?;
            }
            writeln!(out, "({} row(s))", rows.len())?;
        }
        FormatArg::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            writer
                .write_record(&columns)
                .map_err(std::io::Error::other)?;
            for row in &rows {
                writer.write_record(row).map_err(std::io::Error::other)?;
            }
            writer.flush()?;
        }
        FormatArg::JsonLines => {
            let names: Vec<_> = relation.schema().names().cloned().collect();
            let mut tuples: Vec<&Tuple> = relation.tuples().collect();
            tuples.sort_by_key(|t| {
                names
                    .iter()
                    .map(|n| t.get(n).cloned().unwrap_or(Value::Absent))
                    .collect::<Vec<_>>()
            });
            for t in tuples {
                let mut map = serde_json::Map::new();
                for n in &names {
                    let v = t.get(n).unwrap_or(&Value::Absent);
                    let jv = match v {
                        Value::Integer(i) => serde_json::json!(i),
                        Value::Decimal(d) => serde_json::json!(d.0),
                        Value::Timestamp(ms) => {
                            serde_json::json!(relog_core::algebra::render_timestamp(*ms))
                        }
                        Value::Text(s) => serde_json::json!(s.as_ref()),
                        Value::Absent => serde_json::Value::Null,
                    };
                    map.insert(n.to_string(), jv);
                }
                writeln!(out, "{}", serde_json::Value::Object(map))?;
            }
        }
    }
    Ok(())
}
