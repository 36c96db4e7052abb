//! End-to-end tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

use relog_core::catalog::AttrClass;
use relog_core::relation::Value;
use relog_core::testkit::{generate_log, AttrSpec, EventsPerCase, LogSpec};

fn relog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relog"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn sample_dir() -> String {
    // the bundled sample catalog at the repository root
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../sample")
        .display()
        .to_string()
}

#[test]
fn run_produces_the_twelve_pairs() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "--format",
        "csv",
        "run",
        "df(case, end_time, log)",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "d.case,d.activity,d.start_time,d.end_time,u.case,u.activity,u.start_time,u.end_time"
    );
    assert_eq!(lines.count(), 12);
    assert!(text.contains("1,A,00:20,00:22,1,B,02:04,02:08"));
    assert!(text.contains("6,C,07:08,07:12,6,E,09:05,09:07"));
}

#[test]
fn run_plain_relation_prints_all_rows() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "--format",
        "csv",
        "run",
        "log",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 19); // header + 18 rows
}

#[test]
fn successors_of_a() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "--format",
        "csv",
        "run",
        "project(u.activity, select(d.activity = 'A', df(case, end_time, log)))",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows, vec!["B", "C", "D"]);
}

#[test]
fn engines_produce_identical_bytes() {
    for query in [
        "df(case, end_time, log)",
        "select(d.activity = 'A', df(case, end_time, log))",
        "df(u.case, u.end_time, df(case, end_time, log))",
        "project(case, log)",
    ] {
        let native = relog(&[
            "--catalog",
            &sample_dir(),
            "--format",
            "csv",
            "--engine",
            "native",
            "run",
            query,
        ]);
        let composite = relog(&[
            "--catalog",
            &sample_dir(),
            "--format",
            "csv",
            "--engine",
            "composite",
            "run",
            query,
        ]);
        assert_eq!(native.status.code(), Some(0), "{query}: {}", stderr(&native));
        assert_eq!(composite.status.code(), Some(0), "{query}");
        assert_eq!(native.stdout, composite.stdout, "{query}");
    }
}

#[test]
fn json_lines_output_is_valid_json() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "--format",
        "json-lines",
        "run",
        "select(case = 1, log)",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["case"], serde_json::json!(1));
    }
}

#[test]
fn parse_errors_exit_1_with_a_span() {
    let out = relog(&["--catalog", &sample_dir(), "run", "select(case = , log)"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("parse error"), "{err}");
    assert!(err.contains('^'), "{err}");
}

#[test]
fn schema_errors_exit_2() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "run",
        "select(amount = 5, log)",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "run",
        "select(case = 'one', log)",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn missing_relations_exit_3() {
    let out = relog(&["--catalog", &sample_dir(), "run", "nothere"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn cost_orders_match_the_worked_example() {
    let out = relog(&[
        "cost", "--N", "10000", "--V", "500", "--F", "50", "--select-first", "--in-memory",
        "--Q", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "20");

    let out = relog(&[
        "cost",
        "--N",
        "10000",
        "--V",
        "500",
        "--F",
        "50",
        "--select-last",
        "--on-disk",
    ]);
    assert_eq!(stdout(&out).trim(), "80000");
}

#[test]
fn cost_strategies_table() {
    let out = relog(&["cost", "--strategies", "--B", "200", "--V", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("with intermediate storage"), "{text}");
    assert!(text.contains("600"), "{text}");
    let native_line = text
        .lines()
        .find(|l| l.starts_with("native operator"))
        .unwrap();
    assert!(native_line.contains("200"));
}

#[test]
fn cost_sweep_emits_csv_with_two_jumps() {
    let out = relog(&[
        "cost",
        "--V",
        "1000",
        "--M",
        "1000000",
        "--F",
        "50",
        "--sweep",
        "events_per_case",
        "--from",
        "2",
        "--to",
        "400",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,join1,result1,join2,result2,minus,total");
    let totals: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let jumps: Vec<usize> = (1..totals.len())
        .filter(|&i| totals[i - 1] > 0.0 && totals[i] > 2.0 * totals[i - 1])
        .collect();
    assert_eq!(jumps.len(), 2, "{jumps:?}");
}

fn write_worked_example_catalog(dir: &Path) {
    let spec = LogSpec::new(500, EventsPerCase::Fixed(20), 424_242).with_attribute(
        AttrSpec::new(
            "amount",
            AttrClass::Case,
            vec![Value::Integer(1), Value::Integer(5), Value::Integer(7)],
        ),
    );
    let (log, _) = generate_log(&spec);
    let mut csv = String::from("case,activity,start_time,end_time,amount\n");
    for t in log.tuples() {
        let mut row = Vec::new();
        for col in ["case", "activity", "start_time", "end_time", "amount"] {
            let v = t.get(&col.into()).unwrap();
            row.push(relog_cli::display_value(v));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(dir.join("Log.csv"), csv).unwrap();
    std::fs::write(
        dir.join("Log.meta"),
        "case_attr=case\ntime_attr=end_time\nclass.amount=case\n",
    )
    .unwrap();
}

#[test]
fn explain_reports_the_pushdown_with_costs() {
    let dir = tempfile::tempdir().unwrap();
    write_worked_example_catalog(dir.path());

    let out = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "--memory-blocks",
        "200",
        "--engine",
        "composite",
        "explain",
        "select(d.amount = 5 & u.amount = 5, df(case, end_time, Log))",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("P17"), "{text}");
    assert!(text.contains("total    76200"), "{text}");
    assert!(text.contains("total    21"), "{text}");
    // chosen plan pushes the selection under the operator
    let chosen = text.split("chosen plan:").nth(1).unwrap();
    let df_pos = chosen.find("df case, end_time").unwrap();
    let select_pos = chosen.find("select amount = 5").unwrap();
    assert!(df_pos < select_pos, "{chosen}");

    // deterministic across runs
    let again = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "--memory-blocks",
        "200",
        "--engine",
        "composite",
        "explain",
        "select(d.amount = 5 & u.amount = 5, df(case, end_time, Log))",
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn explain_without_stats_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bare.csv"),
        "case,end_time\n1,00:01\n1,00:02\n",
    )
    .unwrap();
    let out = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "explain",
        "df(case, end_time, bare)",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn validate_reports_violations_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "case,end_time,resource\n1,00:01,X\n1,00:02,Y\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("bad.meta"),
        "case_attr=case\ntime_attr=end_time\nclass.resource=case\n",
    )
    .unwrap();
    let out = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "validate",
        "bad",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stdout(&out).contains("violation"), "{}", stdout(&out));

    // undeclared relation: exit 3
    let out = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "validate",
        "nothere",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn duplicate_rows_warn_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("dup.csv"),
        "case,end_time\n1,00:01\n1,00:01\n2,00:02\n",
    )
    .unwrap();
    let out = relog(&[
        "--catalog",
        &dir.path().display().to_string(),
        "--format",
        "csv",
        "run",
        "dup",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("dropped 1 duplicate"), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 3); // header + 2 unique rows
}

#[test]
fn catalog_env_var_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_relog"))
        .env("RELOG_CATALOG", sample_dir())
        .args(["--format", "csv", "run", "project(case, log)"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 7); // header + 6 cases
}

#[test]
fn optimize_off_leaves_the_plan_alone() {
    let out = relog(&[
        "--catalog",
        &sample_dir(),
        "--optimize",
        "off",
        "explain",
        "select(d.activity = 'A', df(case, end_time, log))",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("rules applied:\n  none"), "{text}");
}
