//! Shared fixtures for the benchmarks.

use relog_core::catalog::{AttrClass, Catalog};
use relog_core::relation::Value;
use relog_core::testkit::{generate_log, AttrSpec, EventsPerCase, LogSpec};

/// Uniform log with `cases` cases of `events_per_case` events and a
/// case-class `amount` attribute, wrapped in a catalog as `Log`.
pub fn bench_catalog(cases: usize, events_per_case: usize) -> Catalog {
    let spec = LogSpec::new(cases, EventsPerCase::Fixed(events_per_case), 1337)
        .with_duplicate_rate(0.1)
        .with_attribute(AttrSpec::new(
            "amount",
            AttrClass::Case,
            vec![Value::Integer(1), Value::Integer(5)],
        ));
    let (log, meta) = generate_log(&spec);
    let mut catalog = Catalog::new();
    catalog.insert("Log", log, meta);
    catalog
}
