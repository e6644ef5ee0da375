//! Span splicing: rewrite query text so each semantic call is replaced
//! by a reference to its materialized result.
//!
//! The engine evaluates semantic operators itself; this stage exists so
//! callers can materialize semantic results into temporary tables and
//! hand the remaining conventional query to any SQL engine. Replacement
//! text depends on the call kind: predicates become a boolean `keep`
//! column, projections and aggregates a `value` column, sorts a `score`
//! key, joins and set operations the materialized table itself. Bytes
//! outside the recorded spans are preserved exactly.

use crate::error::{Error, Result};
use crate::sql::scan::{scan_semantic_calls, SemKind};
use std::collections::BTreeMap;

/// Replace every semantic call span with a reference to its materialized
/// table. `bindings` maps each call's span to the table name holding the
/// call's result.
pub fn substitute_materialized(
    sql: &str,
    bindings: &BTreeMap<(usize, usize), String>,
) -> Result<String> {
    let calls = scan_semantic_calls(sql)?;
    let mut out = String::with_capacity(sql.len());
    let mut cursor = 0usize;
    for call in &calls {
        let table = bindings.get(&call.span).ok_or_else(|| {
            Error::Binding(format!(
                "incomplete substitution: no binding for {} at offset {}",
                call.kind.udf_name(),
                call.span.0
            ))
        })?;
        let replacement = match call.kind {
            SemKind::Where => format!("{table}.keep"),
            SemKind::Select | SemKind::Agg => format!("{table}.value"),
            SemKind::OrderBy => format!("{table}.score DESC"),
            SemKind::GroupBy => format!("{table}.group_id"),
            SemKind::Join => table.clone(),
            SemKind::Distinct | SemKind::ExceptAll | SemKind::IntersectAll => {
                format!("SELECT * FROM {table}")
            }
        };
        out.push_str(&sql[cursor..call.span.0]);
        out.push_str(&replacement);
        cursor = call.span.1;
    }
    out.push_str(&sql[cursor..]);
    Ok(out)
}
