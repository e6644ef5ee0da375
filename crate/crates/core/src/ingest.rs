//! File loading and the bundled desk-scale movie/director fixture.
//!
//! Three formats: RFC-4180-style CSV, tab-separated TSV without quoting
//! (the convention of the public movie datasets the fixture emulates),
//! and JSONL with one flat object per line. Column kinds are inferred
//! per column with an Int → Float → Text fallback — a column is Int only
//! if every non-null cell parses as an integer, Float if every one
//! parses as a number, Text otherwise — and explicit overrides take
//! precedence. Row order always follows file order; relations are
//! ordered lists, so loading never sorts or dedups.
//!
//! The bundled fixture is twelve movies joined to ten directors through
//! `nmconst`, authored so the flagship semantic queries have a known
//! answer set: five movies pair a challenge-keyword biography with a
//! resilience-keyword plot, and the rest are controls — a top-rated
//! movie with a clean biography, biography-only matches, a plot-only
//! match — that the predicates must exclude. Keyword placement is
//! disciplined: challenge keywords appear only in biographies,
//! resilience keywords only in plots, so whole-row and column-restricted
//! renderings agree on every verdict.

use crate::error::{Error, Result};
use crate::exec::Database;
use crate::relation::{Column, Relation, Schema, Tuple, Value, ValueKind};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Input file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Tsv,
    Jsonl,
}

impl FileFormat {
    /// Infer a format from a path's extension.
    pub fn from_path(path: &Path) -> Result<FileFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(FileFormat::Csv),
            Some("tsv") => Ok(FileFormat::Tsv),
            Some("jsonl") => Ok(FileFormat::Jsonl),
            other => Err(Error::Config(format!(
                "cannot infer file format from extension {:?} of {}",
                other.unwrap_or(""),
                path.display()
            ))),
        }
    }
}

/// How to load one relation from disk.
#[derive(Debug, Clone)]
pub struct LoadSpec {
    pub path: PathBuf,
    pub format: FileFormat,
    /// Whether the first row names the columns. Ignored for JSONL,
    /// where keys name the columns.
    pub header: bool,
    /// Column kind overrides by column name, replacing inference.
    pub overrides: BTreeMap<String, ValueKind>,
}

impl LoadSpec {
    pub fn new(path: impl Into<PathBuf>, format: FileFormat) -> LoadSpec {
        LoadSpec {
            path: path.into(),
            format,
            header: true,
            overrides: BTreeMap::new(),
        }
    }
}

/// Load a relation per `spec`. Kinds are inferred unless overridden;
/// malformed rows are reported with their 1-based line number.
pub fn load(spec: &LoadSpec) -> Result<Relation> {
    let text = fs::read_to_string(&spec.path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", spec.path.display()))
    })?;
    from_text(&text, spec)
}

/// Parse relation text per `spec` (the path is used only in messages).
fn from_text(text: &str, spec: &LoadSpec) -> Result<Relation> {
    let table = match spec.format {
        FileFormat::Csv => csv_rows(text, spec)?,
        FileFormat::Tsv => tsv_rows(text, spec)?,
        FileFormat::Jsonl => jsonl_rows(text)?,
    };
    build_relation(table, &spec.overrides)
}

/// Raw textual table: column names plus (line number, cells) rows.
/// JSONL rows arrive pre-typed instead and skip textual inference.
enum RawTable {
    Cells {
        names: Vec<String>,
        rows: Vec<(usize, Vec<String>)>,
    },
    Typed {
        names: Vec<String>,
        rows: Vec<(usize, Vec<Value>)>,
    },
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

fn arity_error(line: usize, expected: usize, found: usize) -> Error {
    Error::Argument(format!(
        "row at line {line}: expected {expected} fields, found {found}"
    ))
}

fn csv_rows(text: &str, spec: &LoadSpec) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Argument(format!("malformed csv: {e}")))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        match &names {
            None if spec.header => names = Some(cells),
            None => {
                names = Some(default_names(cells.len()));
                rows.push((line, cells));
            }
            Some(names) => {
                if cells.len() != names.len() {
                    return Err(arity_error(line, names.len(), cells.len()));
                }
                rows.push((line, cells));
            }
        }
    }
    Ok(RawTable::Cells {
        names: names.unwrap_or_default(),
        rows,
    })
}

/// TSV is split on raw tabs with no quoting, the convention of the
/// public movie datasets; quotes pass through as literal characters.
fn tsv_rows(text: &str, spec: &LoadSpec) -> Result<RawTable> {
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
        let line_no = idx + 1;
        match &names {
            None if spec.header => names = Some(cells),
            None => {
                names = Some(default_names(cells.len()));
                rows.push((line_no, cells));
            }
            Some(names) => {
                if cells.len() != names.len() {
                    return Err(arity_error(line_no, names.len(), cells.len()));
                }
                rows.push((line_no, cells));
            }
        }
    }
    Ok(RawTable::Cells {
        names: names.unwrap_or_default(),
        rows,
    })
}

/// JSONL: one flat object per line; the first line fixes the column set
/// (sorted by name for determinism) and every later line must carry
/// exactly the same keys.
fn jsonl_rows(text: &str) -> Result<RawTable> {
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let object: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line)
            .map_err(|e| Error::Argument(format!("row at line {line_no}: invalid json: {e}")))?;
        let names = names.get_or_insert_with(|| {
            let mut keys: Vec<String> = object.keys().cloned().collect();
            keys.sort();
            keys
        });
        if object.len() != names.len() || !names.iter().all(|n| object.contains_key(n)) {
            return Err(Error::Argument(format!(
                "row at line {line_no}: keys do not match first row's columns ({})",
                names.join(", ")
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for name in names.iter() {
            values.push(json_value(&object[name], name, line_no)?);
        }
        rows.push((line_no, values));
    }
    Ok(RawTable::Typed {
        names: names.unwrap_or_default(),
        rows,
    })
}

fn json_value(v: &serde_json::Value, column: &str, line: usize) -> Result<Value> {
    match v {
        serde_json::Value::Null => Ok(Value::Null),
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::Int(i))
            } else if let Some(f) = n.as_f64() {
                Ok(Value::Float(f))
            } else {
                Err(Error::Argument(format!(
                    "row at line {line}: number {n} in '{column}' fits neither i64 nor f64"
                )))
            }
        }
        serde_json::Value::String(s) => Ok(Value::Text(s.clone())),
        other => Err(Error::Argument(format!(
            "row at line {line}: '{column}' holds non-flat json ({other})"
        ))),
    }
}

/// Assemble the final relation: infer or unify kinds, apply overrides,
/// convert cells.
fn build_relation(table: RawTable, overrides: &BTreeMap<String, ValueKind>) -> Result<Relation> {
    let (names, kinds, rows) = match table {
        RawTable::Cells { names, rows } => {
            check_overrides(overrides, &names)?;
            let kinds: Vec<ValueKind> = (0..names.len())
                .map(|i| {
                    overrides
                        .get(&names[i])
                        .copied()
                        .unwrap_or_else(|| infer_kind(rows.iter().map(|(_, cells)| cells[i].as_str())))
                })
                .collect();
            let mut tuples = Vec::with_capacity(rows.len());
            for (line, cells) in &rows {
                let mut values = Vec::with_capacity(cells.len());
                for (i, cell) in cells.iter().enumerate() {
                    values.push(parse_cell(cell, kinds[i], &names[i], *line)?);
                }
                tuples.push(Tuple::new(values));
            }
            (names, kinds, tuples)
        }
        RawTable::Typed { names, rows } => {
            check_overrides(overrides, &names)?;
            let kinds: Vec<ValueKind> = (0..names.len())
                .map(|i| {
                    overrides
                        .get(&names[i])
                        .copied()
                        .unwrap_or_else(|| unify_kinds(rows.iter().map(|(_, vals)| &vals[i])))
                })
                .collect();
            let mut tuples = Vec::with_capacity(rows.len());
            for (line, vals) in rows {
                let mut values = Vec::with_capacity(vals.len());
                for (i, v) in vals.into_iter().enumerate() {
                    values.push(coerce_value(v, kinds[i], &names[i], line)?);
                }
                tuples.push(Tuple::new(values));
            }
            (names, kinds, tuples)
        }
    };
    let columns = names
        .into_iter()
        .zip(kinds)
        .map(|(n, k)| Column::new(n, k))
        .collect();
    Ok(Relation::new(Schema::new(columns), rows))
}

fn check_overrides(overrides: &BTreeMap<String, ValueKind>, names: &[String]) -> Result<()> {
    for name in overrides.keys() {
        if !names.iter().any(|n| n.eq_ignore_ascii_case(name)) {
            return Err(Error::Binding(format!(
                "kind override references unknown column '{name}' (columns: {})",
                names.join(", ")
            )));
        }
    }
    Ok(())
}

/// Int → Float → Text fallback over a column's cells. Empty cells load
/// as nulls and do not vote.
fn infer_kind<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> ValueKind {
    let mut non_empty = cells.clone().filter(|c| !c.is_empty()).peekable();
    if non_empty.peek().is_none() {
        return ValueKind::Text;
    }
    if non_empty.clone().all(|c| c.parse::<i64>().is_ok()) {
        return ValueKind::Int;
    }
    if non_empty.clone().all(|c| c.parse::<f64>().is_ok()) {
        return ValueKind::Float;
    }
    ValueKind::Text
}

/// Unify pre-typed values: all-Int stays Int, numeric mixes widen to
/// Float, anything else renders as Text. Nulls do not vote.
fn unify_kinds<'a>(values: impl Iterator<Item = &'a Value>) -> ValueKind {
    let mut kind: Option<ValueKind> = None;
    for v in values {
        let k = match v {
            Value::Null => continue,
            Value::Bool(_) => ValueKind::Bool,
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::Text(_) => ValueKind::Text,
        };
        kind = Some(match (kind, k) {
            (None, k) => k,
            (Some(a), b) if a == b => a,
            (Some(ValueKind::Int), ValueKind::Float) | (Some(ValueKind::Float), ValueKind::Int) => {
                ValueKind::Float
            }
            _ => ValueKind::Text,
        });
    }
    kind.unwrap_or(ValueKind::Text)
}

/// Parse one textual cell under the column's kind. Empty cells are null
/// under every kind.
fn parse_cell(cell: &str, kind: ValueKind, column: &str, line: usize) -> Result<Value> {
    if cell.is_empty() {
        return Ok(Value::Null);
    }
    let unparseable = || {
        Error::Argument(format!(
            "row at line {line}: cannot parse '{cell}' as {} for column '{column}'",
            kind.name()
        ))
    };
    match kind {
        ValueKind::Bool => match cell.to_ascii_lowercase().as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(unparseable()),
        },
        ValueKind::Int => cell.parse::<i64>().map(Value::Int).map_err(|_| unparseable()),
        ValueKind::Float => cell.parse::<f64>().map(Value::Float).map_err(|_| unparseable()),
        ValueKind::Text => Ok(Value::Text(cell.to_string())),
    }
}

/// Coerce a pre-typed value to the column's final kind.
fn coerce_value(value: Value, kind: ValueKind, column: &str, line: usize) -> Result<Value> {
    let found = match &value {
        Value::Null => return Ok(Value::Null),
        Value::Bool(_) => ValueKind::Bool,
        Value::Int(_) => ValueKind::Int,
        Value::Float(_) => ValueKind::Float,
        Value::Text(_) => ValueKind::Text,
    };
    if found == kind {
        return Ok(value);
    }
    match (value, kind) {
        (Value::Int(i), ValueKind::Float) => Ok(Value::Float(i as f64)),
        (Value::Text(t), k) => parse_cell(&t, k, column, line),
        (v, ValueKind::Text) => Ok(Value::Text(crate::render::render_cell(&v))),
        (v, k) => Err(Error::Argument(format!(
            "row at line {line}: cannot read {v:?} as {} for column '{column}'",
            k.name()
        ))),
    }
}

/// The bundled fixture files, embedded so rebuilds are byte-identical
/// and the checked-in copies cannot drift from the code.
const MOVIES_TSV: &str = include_str!("../../../fixtures/movies.tsv");
const DIRECTORS_TSV: &str = include_str!("../../../fixtures/directors.tsv");
const PRODUCTS_TSV: &str = include_str!("../../../fixtures/products.tsv");

/// Write the bundled fixture into `out_dir` (movies.tsv, directors.tsv,
/// products.tsv). Reruns produce byte-identical files.
pub fn build_fixture(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("movies.tsv"), MOVIES_TSV)?;
    fs::write(out_dir.join("directors.tsv"), DIRECTORS_TSV)?;
    fs::write(out_dir.join("products.tsv"), PRODUCTS_TSV)?;
    Ok(())
}

fn fixture_relation(text: &str) -> Relation {
    let spec = LoadSpec::new("<embedded>", FileFormat::Tsv);
    from_text(text, &spec).expect("embedded fixture is well-formed")
}

/// The movie/director/product fixture as a ready database.
pub fn fixture_database() -> Database {
    let mut db = Database::new();
    db.insert("movies", fixture_relation(MOVIES_TSV));
    db.insert("directors", fixture_relation(DIRECTORS_TSV));
    db.insert("products", fixture_relation(PRODUCTS_TSV));
    db
}
