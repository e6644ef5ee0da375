//! Prompt-template placeholders and the canonical row rendering.
//!
//! Templates travel to backends verbatim; the row travels alongside as a
//! rendering of `alias.column: value` lines in schema order. A template
//! with placeholders narrows the rendering to the referenced columns; one
//! without them gets the whole row. Placeholder syntax varies by backend
//! dialect, so extraction is dialect-aware and span-based (the rewriter
//! needs byte spans to restyle placeholders in place).

use crate::error::{Error, Result};
use crate::relation::{ColRef, Schema, Tuple, Value};
use serde::Serialize;

/// Template dialect: which placeholder syntax a template uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dialect {
    /// Backend-free and LOTUS style: `{column}` or `{alias.column}`.
    Plain,
    /// DocETL style: `{{ input.column }}` / `{{ input.alias.column }}`.
    DocumentInput,
    /// Palimpzest style: prose only, no placeholders.
    None,
}

/// Map a backend tag (the optional second UDF argument) to its dialect.
/// An absent tag means the backend-free plain style.
pub fn dialect_for_tag(tag: Option<&str>) -> Result<Dialect> {
    match tag {
        None => Ok(Dialect::Plain),
        Some(t) => match t.to_ascii_lowercase().as_str() {
            "lotus" => Ok(Dialect::Plain),
            "docetl" => Ok(Dialect::DocumentInput),
            "palimpzest" => Ok(Dialect::None),
            other => Err(Error::Binding(format!("unknown backend tag '{other}'"))),
        },
    }
}

/// One placeholder occurrence: the byte span of the whole `{...}` or
/// `{{ ... }}` syntax within the template, and the column it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub start: usize,
    pub end: usize,
    pub column: ColRef,
}

/// Extract placeholders in textual order. Braced text that does not parse
/// as a column reference (JSON fragments, prose braces) is left alone.
pub fn placeholders(template: &str, dialect: Dialect) -> Vec<Placeholder> {
    match dialect {
        Dialect::None => Vec::new(),
        Dialect::Plain => plain_placeholders(template),
        Dialect::DocumentInput => document_placeholders(template),
    }
}

fn plain_placeholders(template: &str) -> Vec<Placeholder> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        // "{{" is the document-input style, never a plain placeholder.
        if i + 1 < bytes.len() && bytes[i + 1] == b'{' {
            i += 2;
            continue;
        }
        let Some(rel_close) = template[i + 1..].find(['{', '}']) else {
            break;
        };
        let close = i + 1 + rel_close;
        if bytes[close] != b'}' {
            i = close;
            continue;
        }
        if let Some(column) = ColRef::parse(template[i + 1..close].trim()) {
            out.push(Placeholder {
                start: i,
                end: close + 1,
                column,
            });
        }
        i = close + 1;
    }
    out
}

fn document_placeholders(template: &str) -> Vec<Placeholder> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(rel_open) = template[i..].find("{{") {
        let open = i + rel_open;
        let Some(rel_close) = template[open + 2..].find("}}") else {
            break;
        };
        let close = open + 2 + rel_close;
        let inner = template[open + 2..close].trim();
        if let Some(rest) = inner.strip_prefix("input.") {
            if let Some(column) = ColRef::parse(rest) {
                out.push(Placeholder {
                    start: open,
                    end: close + 2,
                    column,
                });
            }
        }
        i = close + 2;
    }
    out
}

/// The distinct columns a template references, in order of first mention.
pub fn referenced_columns(template: &str, dialect: Dialect) -> Vec<ColRef> {
    let mut out: Vec<ColRef> = Vec::new();
    for p in placeholders(template, dialect) {
        if !out.contains(&p.column) {
            out.push(p.column);
        }
    }
    out
}

/// Render one value for prompts: embedded line breaks flatten to spaces so
/// a rendering always stays one line per column.
pub fn render_cell(value: &Value) -> String {
    let raw = value.render();
    if raw.contains(['\n', '\r']) {
        raw.replace(['\n', '\r'], " ")
    } else {
        raw
    }
}

/// Canonical whole-row rendering: `alias.column: value` lines in schema
/// order.
pub fn render_row(schema: &Schema, row: &Tuple) -> String {
    let indices: Vec<usize> = (0..schema.arity()).collect();
    render_columns(schema, row, &indices)
}

/// Rendering restricted to the given column indices, in the given order.
pub fn render_columns(schema: &Schema, row: &Tuple, indices: &[usize]) -> String {
    let mut lines = Vec::with_capacity(indices.len());
    for &i in indices {
        lines.push(format!(
            "{}: {}",
            schema.columns[i].qualified_name(),
            render_cell(&row.values[i])
        ));
    }
    lines.join("\n")
}

/// Positional value-only rendering (`v1; v2; ...`) used where two rows
/// from union-compatible relations must render comparably even though
/// their column names differ.
pub fn render_positional(row: &Tuple) -> String {
    row.values
        .iter()
        .map(render_cell)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Resolve a template's referenced columns against a schema.
pub fn resolve_template_columns(
    template: &str,
    dialect: Dialect,
    schema: &Schema,
) -> Result<Vec<usize>> {
    referenced_columns(template, dialect)
        .iter()
        .map(|r| schema.resolve_ref(r))
        .collect()
}

/// The rendering a backend sees for `row` under `template`: referenced
/// columns when the template has placeholders, the whole row otherwise.
pub fn row_text_for_template(
    template: &str,
    dialect: Dialect,
    schema: &Schema,
    row: &Tuple,
) -> Result<String> {
    let indices = resolve_template_columns(template, dialect, schema)?;
    if indices.is_empty() {
        Ok(render_row(schema, row))
    } else {
        Ok(render_columns(schema, row, &indices))
    }
}
