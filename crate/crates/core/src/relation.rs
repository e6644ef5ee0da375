//! Core data model: values, schemas, tuples, and ordered relations.
//!
//! Relations are ordered lists of tuples. Row order is significant and
//! duplicates are kept, so every operator downstream works over list
//! semantics rather than sets.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

/// The declared kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Bool,
    Int,
    Float,
    Text,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Bool => "bool",
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        match s.to_ascii_lowercase().as_str() {
            "bool" => Some(ValueKind::Bool),
            "int" => Some(ValueKind::Int),
            "float" => Some(ValueKind::Float),
            "text" => Some(ValueKind::Text),
            _ => None,
        }
    }
}

/// Int widens to Float; everything else only matches itself.
pub fn kinds_coercible(a: ValueKind, b: ValueKind) -> bool {
    a == b || matches!((a, b), (ValueKind::Int, ValueKind::Float) | (ValueKind::Float, ValueKind::Int))
}

impl Value {
    pub fn kind(&self) -> Option<ValueKind> {
        match self {
            Value::Null => None,
            Value::Bool(_) => Some(ValueKind::Bool),
            Value::Int(_) => Some(ValueKind::Int),
            Value::Float(_) => Some(ValueKind::Float),
            Value::Text(_) => Some(ValueKind::Text),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Equality under the engine's comparison rules: Null is unequal to
    /// everything, including Null; Int and Float compare numerically.
    pub fn sql_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => false,
            (Value::Int(a), Value::Float(b)) => (*a as f64) == *b,
            (Value::Float(a), Value::Int(b)) => *a == (*b as f64),
            (a, b) => a == b,
        }
    }

    /// Ordering comparison. Errors on cross-kind comparisons other than
    /// Int/Float, and on any ordered comparison involving Null.
    pub fn sql_cmp(&self, other: &Value) -> Result<Ordering> {
        let err = || {
            Error::Binding(format!(
                "cannot compare {} with {}",
                self.kind_label(),
                other.kind_label()
            ))
        };
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => Err(err()),
            (Value::Bool(a), Value::Bool(b)) => Ok(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Ok(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Ok(a.cmp(b)),
            (Value::Int(a), Value::Float(b)) => (*a as f64).partial_cmp(b).ok_or_else(err),
            (Value::Float(a), Value::Int(b)) => a.partial_cmp(&(*b as f64)).ok_or_else(err),
            (Value::Float(a), Value::Float(b)) => a.partial_cmp(b).ok_or_else(err),
            _ => Err(err()),
        }
    }

    fn kind_label(&self) -> &'static str {
        match self.kind() {
            Some(k) => k.name(),
            None => "null",
        }
    }

    /// Plain text rendering used in prompts and table output.
    pub fn render(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => f.to_string(),
            Value::Text(t) => t.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// One column: a name, an optional table qualifier, and a kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub qualifier: Option<String>,
    pub kind: ValueKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Column {
        Column {
            name: name.into(),
            qualifier: None,
            kind,
        }
    }

    pub fn qualified(qualifier: impl Into<String>, name: impl Into<String>, kind: ValueKind) -> Column {
        Column {
            name: name.into(),
            qualifier: Some(qualifier.into()),
            kind,
        }
    }

    /// "alias.name" when qualified, bare name otherwise.
    pub fn qualified_name(&self) -> String {
        match &self.qualifier {
            Some(q) => format!("{}.{}", q, self.name),
            None => self.name.clone(),
        }
    }

    /// Whether a reference `[qualifier.]name` resolves to this column.
    /// An unqualified reference matches any column with the name.
    pub fn matches(&self, qualifier: Option<&str>, name: &str) -> bool {
        if !self.name.eq_ignore_ascii_case(name) {
            return false;
        }
        match qualifier {
            None => true,
            Some(q) => self
                .qualifier
                .as_deref()
                .is_some_and(|own| own.eq_ignore_ascii_case(q)),
        }
    }
}

/// Ordered list of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Schema {
        Schema { columns }
    }

    pub fn empty() -> Schema {
        Schema { columns: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    /// Apply (or replace) a table qualifier on every column.
    pub fn with_qualifier(&self, qualifier: &str) -> Schema {
        Schema {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    qualifier: Some(qualifier.to_string()),
                    kind: c.kind,
                })
                .collect(),
        }
    }

    /// Resolve `[qualifier.]name` to a column index. Errors when the
    /// reference is unknown or ambiguous.
    pub fn resolve(&self, qualifier: Option<&str>, name: &str) -> Result<usize> {
        let mut hits = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.matches(qualifier, name));
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(Error::Binding(format!(
                "unknown column {}",
                display_ref(qualifier, name)
            ))),
            (Some(_), Some(_)) => Err(Error::Binding(format!(
                "ambiguous column {}",
                display_ref(qualifier, name)
            ))),
        }
    }

    /// Concatenate two schemas, keeping qualifiers. Errors when the result
    /// would contain a duplicate fully-qualified column name.
    pub fn concat(&self, other: &Schema) -> Result<Schema> {
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        let mut seen: Vec<String> = Vec::with_capacity(columns.len());
        for c in &columns {
            let qn = c.qualified_name().to_ascii_lowercase();
            if seen.contains(&qn) {
                return Err(Error::Schema(format!(
                    "ambiguous column {} after concatenation",
                    c.qualified_name()
                )));
            }
            seen.push(qn);
        }
        Ok(Schema { columns })
    }
}

fn display_ref(qualifier: Option<&str>, name: &str) -> String {
    match qualifier {
        Some(q) => format!("{}.{}", q, name),
        None => name.to_string(),
    }
}

/// A column reference: `name` or `qualifier.name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColRef {
    pub qualifier: Option<String>,
    pub name: String,
}

impl ColRef {
    pub fn bare(name: impl Into<String>) -> ColRef {
        ColRef {
            qualifier: None,
            name: name.into(),
        }
    }

    pub fn qualified(qualifier: impl Into<String>, name: impl Into<String>) -> ColRef {
        ColRef {
            qualifier: Some(qualifier.into()),
            name: name.into(),
        }
    }

    /// Parse `ident` or `ident.ident`; `None` when the text is not a
    /// well-formed reference.
    pub fn parse(text: &str) -> Option<ColRef> {
        let mut parts = text.split('.');
        let first = parts.next()?;
        match (parts.next(), parts.next()) {
            (None, _) => is_identifier(first).then(|| ColRef::bare(first)),
            (Some(second), None) => (is_identifier(first) && is_identifier(second))
                .then(|| ColRef::qualified(first, second)),
            _ => None,
        }
    }
}

impl fmt::Display for ColRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&display_ref(self.qualifier.as_deref(), &self.name))
    }
}

pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Schema {
    /// Resolve a [`ColRef`] to a column index.
    pub fn resolve_ref(&self, r: &ColRef) -> Result<usize> {
        self.resolve(r.qualifier.as_deref(), &r.name)
    }
}

/// Positional union compatibility: same arity and pairwise coercible kinds.
/// Column names never matter here, mirroring SQL set operations.
pub fn check_union_compatible(a: &Schema, b: &Schema) -> bool {
    a.arity() == b.arity()
        && a.columns
            .iter()
            .zip(&b.columns)
            .all(|(x, y)| kinds_coercible(x.kind, y.kind))
}

/// One row. Values match the schema positionally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(values: Vec<Value>) -> Tuple {
        Tuple { values }
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }

    /// Row-level equality under the engine's comparison rules (so any Null
    /// makes the rows unequal).
    pub fn sql_eq(&self, other: &Tuple) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.sql_eq(b))
    }
}

/// Left values followed by right values.
pub fn tuple_concat(left: &Tuple, right: &Tuple) -> Tuple {
    let mut values = left.values.clone();
    values.extend(right.values.iter().cloned());
    Tuple { values }
}

/// A schema plus an ordered list of rows. Immutable after construction;
/// operators build new relations rather than mutating in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub schema: Schema,
    pub rows: Vec<Tuple>,
}

impl Relation {
    pub fn new(schema: Schema, rows: Vec<Tuple>) -> Relation {
        Relation { schema, rows }
    }

    pub fn empty(schema: Schema) -> Relation {
        Relation {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Serialize to the canonical table text format: a header of
    /// `name:kind` fields (qualified names when present), then one row per
    /// line, tab-separated, with `\t` `\n` `\r` `\\` escaped and Null
    /// written as `\N`. Round-trips byte-identically through
    /// [`Relation::from_canonical_text`].
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .schema
            .columns
            .iter()
            .map(|c| format!("{}:{}", c.qualified_name(), c.kind.name()))
            .collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.values.iter().map(canonical_field).collect();
            out.push_str(&fields.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Parse the canonical table text format produced by
    /// [`Relation::to_canonical_text`].
    pub fn from_canonical_text(text: &str) -> Result<Relation> {
        let mut lines = text.split('\n');
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("empty canonical table text".into()))?;
        let mut columns = Vec::new();
        if !header.is_empty() {
            for field in header.split('\t') {
                let (name_part, kind_part) = field
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Schema(format!("bad header field {field:?}")))?;
                let kind = ValueKind::parse(kind_part)
                    .ok_or_else(|| Error::Schema(format!("unknown kind {kind_part:?}")))?;
                let (qualifier, name) = match name_part.split_once('.') {
                    Some((q, n)) => (Some(q.to_string()), n.to_string()),
                    None => (None, name_part.to_string()),
                };
                columns.push(Column {
                    name,
                    qualifier,
                    kind,
                });
            }
        }
        let schema = Schema::new(columns);
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue; // trailing newline
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != schema.arity() {
                return Err(Error::Schema(format!(
                    "row {}: expected {} fields, found {}",
                    lineno + 2,
                    schema.arity(),
                    fields.len()
                )));
            }
            let values = fields
                .iter()
                .zip(&schema.columns)
                .map(|(f, c)| parse_canonical_field(f, c.kind))
                .collect::<Result<Vec<_>>>()?;
            rows.push(Tuple { values });
        }
        Ok(Relation { schema, rows })
    }
}

fn canonical_field(v: &Value) -> String {
    match v {
        Value::Null => "\\N".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format_float(*f),
        Value::Text(t) => escape_text(t),
    }
}

fn escape_text(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for ch in t.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_text(t: &str) -> Result<String> {
    let mut out = String::with_capacity(t.len());
    let mut chars = t.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                return Err(Error::Schema(format!("bad escape \\{other} in field")));
            }
            None => return Err(Error::Schema("dangling backslash in field".into())),
        }
    }
    Ok(out)
}

fn parse_canonical_field(field: &str, kind: ValueKind) -> Result<Value> {
    if field == "\\N" {
        return Ok(Value::Null);
    }
    match kind {
        ValueKind::Bool => field
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| Error::Schema(format!("bad bool {field:?}"))),
        ValueKind::Int => field
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| Error::Schema(format!("bad int {field:?}"))),
        ValueKind::Float => field
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|_| Error::Schema(format!("bad float {field:?}"))),
        ValueKind::Text => unescape_text(field).map(Value::Text),
    }
}

/// Shortest-round-trip rendering; always includes enough digits to parse
/// back to the same f64.
pub fn format_float(f: f64) -> String {
    let s = f.to_string();
    debug_assert!(s.parse::<f64>().map(|p| p == f || (p.is_nan() && f.is_nan())).unwrap_or(false));
    s
}
