//! Catalog of named relations with per-relation metadata: attribute classes,
//! case/time attribute declarations, statistics, and join-totality facts.
//! Includes CSV ingestion with type inference and the data-driven validator
//! for declared attribute classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num::rational::Ratio;
use thiserror::Error;

use crate::algebra::{Condition, SchemaSource};
use crate::parser;
use crate::relation::{AttrName, Domain, Relation, Schema, Tuple, Value};

/// How an attribute behaves within a case.
///
/// `Case` attributes keep the same value for all events of a case from the
/// moment they first have one; `Event` attributes have a value for at most
/// one event per case; everything else (resources, timestamps, ...) is
/// `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AttrClass {
    Case,
    Event,
    Other,
}

impl fmt::Display for AttrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttrClass::Case => "case",
            AttrClass::Event => "event",
            AttrClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// Declared fact: every tuple of `left` joins at least one tuple of `right`
/// under `condition`. Conditions are stored in canonical rendering so facts
/// can be matched against query joins structurally.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TotalityFact {
    pub left: String,
    pub right: String,
    pub condition: String,
}

impl TotalityFact {
    pub fn new(left: impl Into<String>, right: impl Into<String>, condition: &Condition) -> Self {
        TotalityFact {
            left: left.into(),
            right: right.into(),
            condition: condition.to_string(),
        }
    }
}

/// Statistics gathered at load time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationStats {
    /// Number of tuples (events).
    pub events: u64,
    /// Number of distinct case identifiers; only known when a case attribute
    /// is declared.
    pub cases: Option<u64>,
    /// Measured selectivities keyed by canonical condition rendering.
    pub selectivity_samples: BTreeMap<String, Ratio<i128>>,
}

/// Per-relation metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationMeta {
    pub attr_classes: BTreeMap<AttrName, AttrClass>,
    pub case_attr: Option<AttrName>,
    pub time_attr: Option<AttrName>,
    pub stats: RelationStats,
    pub totality_facts: BTreeSet<TotalityFact>,
}

impl RelationMeta {
    /// Class of an attribute; undeclared attributes are `Other`.
    pub fn class_of(&self, attr: &AttrName) -> AttrClass {
        self.attr_classes
            .get(attr)
            .copied()
            .unwrap_or(AttrClass::Other)
    }

    pub fn has_totality_fact(&self, fact: &TotalityFact) -> bool {
        self.totality_facts.contains(fact)
    }
}

/// Named relations plus their metadata. Immutable once loaded; shared freely.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    relations: BTreeMap<String, Relation>,
    meta: BTreeMap<String, RelationMeta>,
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, relation: Relation, meta: RelationMeta) {
        let name = name.into();
        self.relations.insert(name.clone(), relation);
        self.meta.insert(name, meta);
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn meta(&self, name: &str) -> Option<&RelationMeta> {
        self.meta.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(|s| s.as_str())
    }

    /// Any totality fact anywhere in the catalog matching the given join.
    pub fn has_totality_fact(&self, fact: &TotalityFact) -> bool {
        self.meta.values().any(|m| m.has_totality_fact(fact))
    }
}

impl SchemaSource for Catalog {
    fn schema_of(&self, name: &str) -> Option<Schema> {
        self.relations.get(name).map(|r| r.schema().clone())
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header row is required")]
    MissingHeader { path: String },
    #[error("{path} row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path} row {row}, column '{column}': cannot parse '{cell}' as {domain}")]
    BadCell {
        path: String,
        row: usize,
        column: String,
        cell: String,
        domain: Domain,
    },
    #[error("attribute '{0}' uses a reserved prefix (d. / u.)")]
    ReservedPrefix(AttrName),
    #[error("duplicate column '{0}' in header")]
    DuplicateColumn(String),
    #[error("declared attribute '{attr}' is not a column of {relation}")]
    UnknownDeclaredAttr { relation: String, attr: AttrName },
    #[error("{path} line {line}: {message}")]
    Sidecar {
        path: String,
        line: usize,
        message: String,
    },
}

/// Options for [`load_csv`].
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Field delimiter; defaults to `,`.
    pub delimiter: Option<u8>,
    /// Explicit column types, overriding inference. A cell that does not
    /// parse under an override is an error.
    pub type_overrides: BTreeMap<AttrName, Domain>,
    pub case_attr: Option<AttrName>,
    pub time_attr: Option<AttrName>,
    pub attr_classes: BTreeMap<AttrName, AttrClass>,
    pub totality_facts: BTreeSet<TotalityFact>,
}

/// Result of loading a CSV file.
#[derive(Clone, Debug)]
pub struct LoadedRelation {
    pub relation: Relation,
    pub meta: RelationMeta,
    /// Rows dropped because an identical row had already been read.
    pub dropped_duplicates: u64,
}

/// Load an event log from a CSV file (RFC-4180-style quoting, header row
/// required, UTF-8).
///
/// Column types are inferred by trying integer, then decimal, then timestamp
/// (`HH:MM` anchored to a fixed epoch day, or ISO-8601), and falling back to
/// text; empty cells become `Absent`. Duplicate rows collapse under set
/// semantics and are counted in `dropped_duplicates`.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<LoadedRelation, CatalogError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path_str.clone(),
        source,
    })?;
    load_csv_str(&raw, &path_str, options)
}

/// Like [`load_csv`] but parsing from a string; `origin` is used in errors.
pub fn load_csv_str(
    raw: &str,
    origin: &str,
    options: &LoadOptions,
) -> Result<LoadedRelation, CatalogError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter.unwrap_or(b','))
        .has_headers(true)
        .flexible(true)
        .from_reader(raw.as_bytes());

    let headers = reader
        .headers()
        .map_err(|source| CatalogError::Csv {
            path: origin.to_string(),
            source,
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(CatalogError::MissingHeader {
            path: origin.to_string(),
        });
    }
    let columns: Vec<AttrName> = headers.iter().map(|h| AttrName::new(h.trim())).collect();
    let mut seen = BTreeSet::new();
    for c in &columns {
        if c.has_reserved_prefix() {
            return Err(CatalogError::ReservedPrefix(c.clone()));
        }
        if !seen.insert(c.clone()) {
            return Err(CatalogError::DuplicateColumn(c.to_string()));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| CatalogError::Csv {
            path: origin.to_string(),
            source,
        })?;
        if record.len() != columns.len() {
            return Err(CatalogError::RaggedRow {
                path: origin.to_string(),
                row: idx + 2,
                expected: columns.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }

    // Infer or apply a domain per column.
    let mut domains = Vec::with_capacity(columns.len());
    for (col_idx, name) in columns.iter().enumerate() {
        if let Some(d) = options.type_overrides.get(name) {
            // validate every cell now so override errors carry position
            for (row_idx, row) in rows.iter().enumerate() {
                let cell = row[col_idx].trim();
                if !cell.is_empty() && parse_cell(cell, *d).is_none() {
                    return Err(CatalogError::BadCell {
                        path: origin.to_string(),
                        row: row_idx + 2,
                        column: name.to_string(),
                        cell: cell.to_string(),
                        domain: *d,
                    });
                }
            }
            domains.push(*d);
        } else {
            domains.push(infer_domain(rows.iter().map(|r| r[col_idx].trim())));
        }
    }

    let schema = Schema::new(
        columns
            .iter()
            .cloned()
            .zip(domains.iter().copied())
            .collect(),
    )
    .expect("header uniqueness already checked");

    let mut tuples: BTreeSet<Tuple> = BTreeSet::new();
    let mut dropped = 0u64;
    for row in &rows {
        let mut values = BTreeMap::new();
        for ((name, domain), cell) in columns.iter().zip(domains.iter()).zip(row.iter()) {
            let cell = cell.trim();
            let value = if cell.is_empty() {
                Value::Absent
            } else {
                parse_cell(cell, *domain).expect("inference guarantees parsability")
            };
            values.insert(name.clone(), value);
        }
        if !tuples.insert(Tuple::new(values)) {
            dropped += 1;
        }
    }

    let relation = Relation::new(schema, tuples).expect("tuples built from the schema");
    let meta = build_meta(&relation, origin, options)?;

    Ok(LoadedRelation {
        relation,
        meta,
        dropped_duplicates: dropped,
    })
}

fn build_meta(
    relation: &Relation,
    origin: &str,
    options: &LoadOptions,
) -> Result<RelationMeta, CatalogError> {
    for attr in options
        .case_attr
        .iter()
        .chain(options.time_attr.iter())
        .chain(options.attr_classes.keys())
    {
        if !relation.schema().contains(attr) {
            return Err(CatalogError::UnknownDeclaredAttr {
                relation: origin.to_string(),
                attr: attr.clone(),
            });
        }
    }
    let cases = options.case_attr.as_ref().map(|c| {
        relation
            .tuples()
            .map(|t| t.get(c).cloned().unwrap_or(Value::Absent))
            .filter(|v| !v.is_absent())
            .collect::<BTreeSet<_>>()
            .len() as u64
    });
    Ok(RelationMeta {
        attr_classes: options.attr_classes.clone(),
        case_attr: options.case_attr.clone(),
        time_attr: options.time_attr.clone(),
        stats: RelationStats {
            events: relation.len() as u64,
            cases,
            selectivity_samples: BTreeMap::new(),
        },
        totality_facts: options.totality_facts.clone(),
    })
}

fn infer_domain<'a>(cells: impl Iterator<Item = &'a str>) -> Domain {
    let mut candidates = [Domain::Integer, Domain::Decimal, Domain::Timestamp]
        .into_iter()
        .collect::<Vec<_>>();
    let mut any_value = false;
    for cell in cells {
        if cell.is_empty() {
            continue;
        }
        any_value = true;
        candidates.retain(|d| parse_cell(cell, *d).is_some());
        if candidates.is_empty() {
            return Domain::Text;
        }
    }
    if !any_value {
        return Domain::Text;
    }
    candidates[0]
}

fn parse_cell(cell: &str, domain: Domain) -> Option<Value> {
    match domain {
        Domain::Integer => cell.parse::<i64>().ok().map(Value::Integer),
        Domain::Decimal => {
            let v: f64 = cell.parse().ok()?;
            v.is_finite().then(|| Value::decimal(v))
        }
        Domain::Timestamp => parse_timestamp(cell).map(Value::Timestamp),
        Domain::Text => Some(Value::text(cell)),
    }
}

/// `HH:MM` (anchored to the epoch day) or ISO-8601.
pub fn parse_timestamp(cell: &str) -> Option<i64> {
    if let Some((h, m)) = cell.split_once(':') {
        if h.len() <= 2 && m.len() == 2 && !cell.contains('-') && !cell.contains('T') {
            let h: i64 = h.parse().ok()?;
            let m: i64 = m.parse().ok()?;
            if h < 24 && m < 60 {
                return Some((h * 60 + m) * 60_000);
            }
            return None;
        }
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(cell) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(cell, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp_millis());
    }
    None
}

/// A single attribute-class violation found by [`validate_classes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassViolation {
    pub attr: AttrName,
    pub case: Value,
    /// Time of the offending event.
    pub at: Value,
    pub message: String,
}

/// Check every declared `Case`/`Event` attribute against the data.
///
/// A `Case` attribute must, within each case ordered by time, keep a single
/// value from the first moment it is non-absent (an absent prefix is fine).
/// An `Event` attribute must be non-absent for at most one event per case.
/// Ties in the time attribute are handled by accepting the declaration if
/// *some* ordering of the tied events satisfies it.
///
/// Requires `case_attr` and `time_attr` to be set in the metadata.
pub fn validate_classes(relation: &Relation, meta: &RelationMeta) -> Vec<ClassViolation> {
    let (Some(case_attr), Some(time_attr)) = (&meta.case_attr, &meta.time_attr) else {
        return Vec::new();
    };
    let mut violations = Vec::new();

    // group tuples per case, events with an absent case belong to no case
    let mut by_case: BTreeMap<Value, Vec<&Tuple>> = BTreeMap::new();
    for t in relation.tuples() {
        let case = t.get(case_attr).cloned().unwrap_or(Value::Absent);
        if case.is_absent() {
            continue;
        }
        by_case.entry(case).or_default().push(t);
    }

    for (attr, class) in &meta.attr_classes {
        match class {
            AttrClass::Other => continue,
            AttrClass::Event => {
                for (case, tuples) in &by_case {
                    let mut present: Vec<&Tuple> = tuples
                        .iter()
                        .copied()
                        .filter(|t| !t.get(attr).cloned().unwrap_or(Value::Absent).is_absent())
                        .collect();
                    if present.len() > 1 {
                        present.sort_by_key(|t| t.get(time_attr).cloned());
                        violations.push(ClassViolation {
                            attr: attr.clone(),
                            case: case.clone(),
                            at: present[1].get(time_attr).cloned().unwrap_or(Value::Absent),
                            message: format!(
                                "event attribute '{attr}' has {} values in case {case:?}",
                                present.len()
                            ),
                        });
                    }
                }
            }
            AttrClass::Case => {
                for (case, tuples) in &by_case {
                    // time-ordered groups of tied events
                    let mut groups: BTreeMap<Value, Vec<&Value>> = BTreeMap::new();
                    for t in tuples {
                        let time = t.get(time_attr).cloned().unwrap_or(Value::Absent);
                        groups
                            .entry(time)
                            .or_default()
                            .push(t.get(attr).unwrap_or(&Value::Absent));
                    }
                    let mut seen: Option<&Value> = None;
                    for (time, values) in &groups {
                        let value_was_set_before_group = seen.is_some();
                        let has_absent = values.iter().any(|v| v.is_absent());
                        for v in values.iter().filter(|v| !v.is_absent()) {
                            match seen {
                                None => seen = Some(*v),
                                Some(prev) if prev == *v => {}
                                Some(prev) => {
                                    violations.push(ClassViolation {
                                        attr: attr.clone(),
                                        case: case.clone(),
                                        at: time.clone(),
                                        message: format!(
                                            "case attribute '{attr}' changes from {prev:?} to {v:?} in case {case:?}"
                                        ),
                                    });
                                }
                            }
                        }
                        // Once the value is set in an earlier group, no later
                        // event may lack it. Absents inside the group where
                        // the value first appears are fine: ties can be
                        // ordered absent-first.
                        if value_was_set_before_group && has_absent {
                            violations.push(ClassViolation {
                                attr: attr.clone(),
                                case: case.clone(),
                                at: time.clone(),
                                message: format!(
                                    "case attribute '{attr}' is absent after being set in case {case:?}"
                                ),
                            });
                        }
                    }
                }
            }
        }
    }
    violations
}

/// Exact fraction of tuples of `relation` satisfying `condition`.
/// An empty relation yields 0.
pub fn collect_selectivity(
    relation: &Relation,
    condition: &Condition,
) -> Result<Ratio<i128>, crate::relation::CompareTypeError> {
    if relation.is_empty() {
        return Ok(Ratio::from_integer(0));
    }
    let mut hits: i128 = 0;
    for t in relation.tuples() {
        if condition.eval(t)? {
            hits += 1;
        }
    }
    Ok(Ratio::new(hits, relation.len() as i128))
}

/// Parsed sidecar declarations for one relation.
///
/// The sidecar is a plain-text `key=value` file next to the CSV:
///
/// ```text
/// case_attr=case
/// time_attr=end_time
/// class.amount=case
/// class.marker=event
/// class.resource=other
/// type.case=integer
/// totality=Log,Resource,resource = name
/// ```
pub fn parse_sidecar(text: &str, origin: &str) -> Result<LoadOptions, CatalogError> {
    let mut options = LoadOptions::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CatalogError::Sidecar {
            path: origin.to_string(),
            line: idx + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key=value".to_string()))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "case_attr" => options.case_attr = Some(AttrName::new(value)),
            "time_attr" => options.time_attr = Some(AttrName::new(value)),
            "delimiter" => {
                let bytes = value.as_bytes();
                if bytes.len() != 1 {
                    return Err(err(format!("delimiter must be one byte, got '{value}'")));
                }
                options.delimiter = Some(bytes[0]);
            }
            "totality" => {
                let parts: Vec<&str> = value.splitn(3, ',').map(|s| s.trim()).collect();
                if parts.len() != 3 {
                    return Err(err(format!(
                        "totality needs 'left,right,condition', got '{value}'"
                    )));
                }
                let condition = parse_condition_text(parts[2])
                    .map_err(|e| err(format!("bad totality condition: {e}")))?;
                options.totality_facts.insert(TotalityFact::new(
                    parts[0],
                    parts[1],
                    &condition,
                ));
            }
            _ if key.starts_with("class.") => {
                let attr = AttrName::new(&key["class.".len()..]);
                let class = match value {
                    "case" => AttrClass::Case,
                    "event" => AttrClass::Event,
                    "other" => AttrClass::Other,
                    _ => return Err(err(format!("unknown class '{value}'"))),
                };
                options.attr_classes.insert(attr, class);
            }
            _ if key.starts_with("type.") => {
                let attr = AttrName::new(&key["type.".len()..]);
                let domain = match value {
                    "integer" => Domain::Integer,
                    "decimal" => Domain::Decimal,
                    "timestamp" => Domain::Timestamp,
                    "text" => Domain::Text,
                    _ => return Err(err(format!("unknown type '{value}'"))),
                };
                options.type_overrides.insert(attr, domain);
            }
            _ => return Err(err(format!("unknown key '{key}'"))),
        }
    }
    Ok(options)
}

/// Parse a bare condition (sidecar totality declarations) by wrapping it in
/// a throwaway select.
fn parse_condition_text(text: &str) -> Result<Condition, parser::ParseError> {
    match parser::parse(&format!("select({text}, R)"))? {
        crate::algebra::AlgebraExpr::Select { condition, .. } => Ok(condition),
        _ => unreachable!("select always parses to Select"),
    }
}

/// Load every `*.csv` in a directory (or a single file) into a catalog,
/// consulting `<stem>.meta` sidecars when present. Relation names are file
/// stems. Returns the catalog and per-relation duplicate-drop counts.
pub fn load_path(path: impl AsRef<Path>) -> Result<(Catalog, Vec<(String, u64)>), CatalogError> {
    let path = path.as_ref();
    let mut files: Vec<std::path::PathBuf> = Vec::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| CatalogError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let p = entry.path();
            if p.extension().is_some_and(|e| e == "csv") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }

    let mut catalog = Catalog::new();
    let mut drops = Vec::new();
    for file in files {
        let name = file
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "relation".to_string());
        let sidecar_path = file.with_extension("meta");
        let options = if sidecar_path.exists() {
            let text = std::fs::read_to_string(&sidecar_path).map_err(|source| CatalogError::Io {
                path: sidecar_path.display().to_string(),
                source,
            })?;
            parse_sidecar(&text, &sidecar_path.display().to_string())?
        } else {
            LoadOptions::default()
        };
        let loaded = load_csv(&file, &options)?;
        drops.push((name.clone(), loaded.dropped_duplicates));
        catalog.insert(name, loaded.relation, loaded.meta);
    }
    Ok((catalog, drops))
}
