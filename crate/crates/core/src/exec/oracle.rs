//! Independent brute-force reference evaluator.
//!
//! [`eval_oracle`] recomputes a plan by following each operator's
//! definition as literally as possible: always sequential, no stats, no
//! operator code shared with the main evaluator (only the contract-level
//! primitives — row rendering, scalar evaluation, the backend itself —
//! are common, because they *are* the specification of those pieces).
//! Property campaigns compare `eval`, and `eval` after rewrites, against
//! this. Capped at a small total input size so accidental use on real
//! data fails fast.

use std::cmp::Ordering;

use crate::algebra::{AggFunc, Plan, GROUP_ID};
use crate::backend::{cosine, SemanticBackend};
use crate::error::{Error, Result};
use crate::exec::Database;
use crate::relation::{tuple_concat, ColRef, Column, Relation, Schema, Tuple, Value, ValueKind};
use crate::render::{render_cell, render_positional, render_row, row_text_for_template};

/// Maximum total rows across all database tables the oracle accepts.
pub const ORACLE_ROW_CAP: usize = 64;

/// Reference evaluation of `plan`. Same semantics as `eval`, different
/// code; returns only the relation.
pub fn eval_oracle(
    plan: &Plan,
    db: &Database,
    backend: &dyn SemanticBackend,
) -> Result<Relation> {
    let total = db.total_rows();
    if total > ORACLE_ROW_CAP {
        return Err(Error::Argument(format!(
            "oracle input cap exceeded: {total} rows > {ORACLE_ROW_CAP}"
        )));
    }
    node(plan, db, backend)
}

/// Tuple equality treating NULL as matching NULL, per set-operation and
/// grouping semantics.
fn same(a: &Tuple, b: &Tuple) -> bool {
    a.values.len() == b.values.len()
        && a.values.iter().zip(&b.values).all(|(x, y)| match (x, y) {
            (Value::Null, Value::Null) => true,
            _ => x.sql_eq(y),
        })
}

fn equiv(backend: &dyn SemanticBackend, a: &Tuple, b: &Tuple) -> Result<bool> {
    backend.equivalent(&render_positional(a), &render_positional(b))
}

/// First-occurrence dedup under value equality.
fn dedup(rows: Vec<Tuple>) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = Vec::new();
    for row in rows {
        if !out.iter().any(|kept| same(kept, &row)) {
            out.push(row);
        }
    }
    out
}

/// First-occurrence dedup under backend equivalence of the given texts.
fn sem_dedup(
    backend: &dyn SemanticBackend,
    rows: Vec<Tuple>,
    texts: Vec<String>,
) -> Result<Vec<Tuple>> {
    let mut out: Vec<Tuple> = Vec::new();
    let mut kept_texts: Vec<String> = Vec::new();
    for (row, text) in rows.into_iter().zip(texts) {
        let mut duplicate = false;
        for kept in &kept_texts {
            if backend.equivalent(kept, &text)? {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            out.push(row);
            kept_texts.push(text);
        }
    }
    Ok(out)
}

/// Greedy one-for-one difference: walk the left rows in order, drop each
/// one that matches a not-yet-consumed right row.
fn diff<F>(left: &[Tuple], right: &[Tuple], mut matches: F) -> Result<Vec<Tuple>>
where
    F: FnMut(&Tuple, &Tuple) -> Result<bool>,
{
    let mut remaining: Vec<Option<&Tuple>> = right.iter().map(Some).collect();
    let mut out = Vec::new();
    for row in left {
        let mut cancelled = false;
        for slot in remaining.iter_mut() {
            if let Some(cand) = slot {
                if matches(row, cand)? {
                    *slot = None;
                    cancelled = true;
                    break;
                }
            }
        }
        if !cancelled {
            out.push(row.clone());
        }
    }
    Ok(out)
}

/// Greedy one-for-one intersection: keep each left row that matches a
/// not-yet-consumed right row.
fn intersect<F>(left: &[Tuple], right: &[Tuple], mut matches: F) -> Result<Vec<Tuple>>
where
    F: FnMut(&Tuple, &Tuple) -> Result<bool>,
{
    let mut remaining: Vec<Option<&Tuple>> = right.iter().map(Some).collect();
    let mut out = Vec::new();
    for row in left {
        for slot in remaining.iter_mut() {
            if let Some(cand) = slot {
                if matches(row, cand)? {
                    *slot = None;
                    out.push(row.clone());
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Dedup texts: attribute cell when given, whole-row rendering otherwise.
fn texts_for_dedup(schema: &Schema, rows: &[Tuple], attr: Option<&ColRef>) -> Result<Vec<String>> {
    match attr {
        Some(a) => {
            let i = schema.resolve_ref(a)?;
            Ok(rows.iter().map(|r| render_cell(&r.values[i])).collect())
        }
        None => Ok(rows.iter().map(|r| render_row(schema, r)).collect()),
    }
}

fn node(plan: &Plan, db: &Database, backend: &dyn SemanticBackend) -> Result<Relation> {
    match plan {
        Plan::Scan { table, alias } => {
            let rel = db
                .get(table)
                .ok_or_else(|| Error::Binding(format!("unknown table '{table}'")))?;
            Ok(Relation::new(
                rel.schema.with_qualifier(alias.as_deref().unwrap_or(table)),
                rel.rows.clone(),
            ))
        }
        Plan::Select { input, predicate } => {
            let r = node(input, db, backend)?;
            let mut rows = Vec::new();
            for row in &r.rows {
                if predicate.eval_predicate(&r.schema, row)? {
                    rows.push(row.clone());
                }
            }
            Ok(Relation::new(r.schema, rows))
        }
        Plan::SemSelect { input, template } => {
            let r = node(input, db, backend)?;
            let dialect = template.dialect()?;
            let mut rows = Vec::new();
            for row in &r.rows {
                let text = row_text_for_template(&template.text, dialect, &r.schema, row)?;
                if backend.predicate(&template.text, &text)? {
                    rows.push(row.clone());
                }
            }
            Ok(Relation::new(r.schema, rows))
        }
        Plan::Project { input, items } => {
            let r = node(input, db, backend)?;
            let mut columns = Vec::new();
            for item in items {
                columns.push(item.output_column(&r.schema)?);
            }
            let mut rows = Vec::new();
            for row in &r.rows {
                let mut values = Vec::new();
                for item in items {
                    values.push(item.expr.eval(&r.schema, row)?);
                }
                rows.push(Tuple::new(values));
            }
            Ok(Relation::new(Schema::new(columns), rows))
        }
        Plan::SemProjectCol {
            input,
            template,
            alias,
        } => {
            let r = node(input, db, backend)?;
            let dialect = template.dialect()?;
            let mut columns = r.schema.columns.clone();
            columns.push(Column::new(alias.clone(), ValueKind::Text));
            let mut rows = Vec::new();
            for row in &r.rows {
                let text = row_text_for_template(&template.text, dialect, &r.schema, row)?;
                let mut values = row.values.clone();
                values.push(Value::Text(backend.map(&template.text, &text)?));
                rows.push(Tuple::new(values));
            }
            Ok(Relation::new(Schema::new(columns), rows))
        }
        Plan::Product { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            let schema = l.schema.concat(&r.schema)?;
            let mut rows = Vec::new();
            for a in &l.rows {
                for b in &r.rows {
                    rows.push(tuple_concat(a, b));
                }
            }
            Ok(Relation::new(schema, rows))
        }
        Plan::Join { left, right, on } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            let schema = l.schema.concat(&r.schema)?;
            let mut rows = Vec::new();
            for a in &l.rows {
                for b in &r.rows {
                    let pair = tuple_concat(a, b);
                    if on.eval_predicate(&schema, &pair)? {
                        rows.push(pair);
                    }
                }
            }
            Ok(Relation::new(schema, rows))
        }
        Plan::SemJoin {
            left,
            right,
            template,
        } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            let schema = l.schema.concat(&r.schema)?;
            let dialect = template.dialect()?;
            let mut rows = Vec::new();
            for a in &l.rows {
                for b in &r.rows {
                    let pair = tuple_concat(a, b);
                    let text =
                        row_text_for_template(&template.text, dialect, &schema, &pair)?;
                    if backend.predicate(&template.text, &text)? {
                        rows.push(pair);
                    }
                }
            }
            Ok(Relation::new(schema, rows))
        }
        Plan::BagUnion { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let mut rows = l.rows;
            rows.extend(r.rows);
            Ok(Relation::new(l.schema, rows))
        }
        Plan::SetUnion { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let mut rows = l.rows;
            rows.extend(r.rows);
            Ok(Relation::new(l.schema, dedup(rows)))
        }
        Plan::SemSetUnion { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let mut rows = l.rows;
            rows.extend(r.rows);
            let texts = texts_for_dedup(&l.schema, &rows, None)?;
            Ok(Relation::new(l.schema, sem_dedup(backend, rows, texts)?))
        }
        Plan::BagDiff { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = diff(&l.rows, &r.rows, |a, b| Ok(same(a, b)))?;
            Ok(Relation::new(l.schema, rows))
        }
        Plan::SetDiff { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = diff(&l.rows, &r.rows, |a, b| Ok(same(a, b)))?;
            Ok(Relation::new(l.schema, dedup(rows)))
        }
        Plan::SemBagDiff { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = diff(&l.rows, &r.rows, |a, b| equiv(backend, a, b))?;
            Ok(Relation::new(l.schema, rows))
        }
        Plan::SemSetDiff { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = diff(&l.rows, &r.rows, |a, b| equiv(backend, a, b))?;
            let texts = texts_for_dedup(&l.schema, &rows, None)?;
            Ok(Relation::new(l.schema, sem_dedup(backend, rows, texts)?))
        }
        Plan::BagIntersect { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = intersect(&l.rows, &r.rows, |a, b| Ok(same(a, b)))?;
            Ok(Relation::new(l.schema, rows))
        }
        Plan::SetIntersect { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = intersect(&l.rows, &r.rows, |a, b| Ok(same(a, b)))?;
            Ok(Relation::new(l.schema, dedup(rows)))
        }
        Plan::SemBagIntersect { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = intersect(&l.rows, &r.rows, |a, b| equiv(backend, a, b))?;
            Ok(Relation::new(l.schema, rows))
        }
        Plan::SemSetIntersect { left, right } => {
            let (l, r) = (node(left, db, backend)?, node(right, db, backend)?);
            check_compatible(plan, &l, &r)?;
            let rows = intersect(&l.rows, &r.rows, |a, b| equiv(backend, a, b))?;
            let texts = texts_for_dedup(&l.schema, &rows, None)?;
            Ok(Relation::new(l.schema, sem_dedup(backend, rows, texts)?))
        }
        Plan::Dedup { input } => {
            let r = node(input, db, backend)?;
            let rows = dedup(r.rows);
            Ok(Relation::new(r.schema, rows))
        }
        Plan::SemDedup { input, attr } => {
            let r = node(input, db, backend)?;
            let texts = texts_for_dedup(&r.schema, &r.rows, attr.as_ref())?;
            let rows = sem_dedup(backend, r.rows, texts)?;
            Ok(Relation::new(r.schema, rows))
        }
        Plan::Group { input, attrs } => {
            let r = node(input, db, backend)?;
            let mut indices = Vec::new();
            for a in attrs {
                indices.push(r.schema.resolve_ref(a)?);
            }
            // group_id = index of the first row with a matching key.
            let mut keys: Vec<Vec<&Value>> = Vec::new();
            let mut ids = Vec::new();
            for row in &r.rows {
                let key: Vec<&Value> = indices.iter().map(|&i| &row.values[i]).collect();
                let found = keys.iter().position(|k| {
                    k.iter().zip(&key).all(|(x, y)| match (x, y) {
                        (Value::Null, Value::Null) => true,
                        _ => x.sql_eq(y),
                    })
                });
                match found {
                    Some(gid) => ids.push(gid as i64),
                    None => {
                        ids.push(keys.len() as i64);
                        keys.push(key);
                    }
                }
            }
            Ok(with_group_ids(&r, &ids))
        }
        Plan::SemGroup { input, attr, k } => {
            let r = node(input, db, backend)?;
            if *k == 0 {
                return Err(Error::Argument("SemGroup requires k >= 1".into()));
            }
            let i = r.schema.resolve_ref(attr)?;
            if r.rows.is_empty() {
                return Ok(with_group_ids(&r, &[]));
            }
            let mut embeddings = Vec::new();
            for row in &r.rows {
                embeddings.push(backend.embed(&render_cell(&row.values[i]))?);
            }
            let sim =
                |a: usize, b: usize| cosine(&embeddings[a], &embeddings[b]).unwrap_or(0.0);
            // Farthest-point seeds, then nearest-seed assignment.
            let n = r.rows.len();
            let mut seeds = vec![0usize];
            while seeds.len() < (*k).min(n) {
                let mut pick = None;
                let mut pick_nearest = f64::INFINITY;
                for cand in 0..n {
                    if seeds.contains(&cand) {
                        continue;
                    }
                    let mut nearest = f64::NEG_INFINITY;
                    for &s in &seeds {
                        nearest = nearest.max(sim(cand, s));
                    }
                    if nearest < pick_nearest {
                        pick_nearest = nearest;
                        pick = Some(cand);
                    }
                }
                seeds.push(pick.expect("candidate exists"));
            }
            seeds.sort_unstable();
            let mut ids = Vec::new();
            for row_idx in 0..n {
                let mut gid = 0;
                let mut best = f64::NEG_INFINITY;
                for (g, &s) in seeds.iter().enumerate() {
                    if sim(row_idx, s) > best {
                        best = sim(row_idx, s);
                        gid = g;
                    }
                }
                ids.push(gid as i64);
            }
            Ok(with_group_ids(&r, &ids))
        }
        Plan::Agg {
            input,
            group_by,
            emit,
            funcs,
        } => {
            let r = node(input, db, backend)?;
            let groups = key_groups(&r, group_by)?;
            let mut emit_indices = Vec::new();
            for e in emit {
                emit_indices.push(r.schema.resolve_ref(e)?);
            }
            let mut columns = Vec::new();
            for &i in &emit_indices {
                columns.push(r.schema.columns[i].clone());
            }
            for f in funcs {
                columns.push(Column::new(f.alias.clone(), f.output_kind(&r.schema)?));
            }
            let mut rows = Vec::new();
            for members in &groups {
                let mut values = Vec::new();
                for &i in &emit_indices {
                    values.push(r.rows[members[0]].values[i].clone());
                }
                for f in funcs {
                    let arg: Option<Vec<&Value>> = match &f.arg {
                        None => None,
                        Some(a) => {
                            let i = r.schema.resolve_ref(a)?;
                            Some(
                                members
                                    .iter()
                                    .map(|&m| &r.rows[m].values[i])
                                    .filter(|v| !v.is_null())
                                    .collect(),
                            )
                        }
                    };
                    values.push(oracle_agg(f.func, members.len(), arg)?);
                }
                rows.push(Tuple::new(values));
            }
            Ok(Relation::new(Schema::new(columns), rows))
        }
        Plan::SemAgg {
            input,
            group_by,
            attr,
            template,
            alias,
        } => {
            let r = node(input, db, backend)?;
            let groups = key_groups(&r, group_by)?;
            let dialect = template.dialect()?;
            let mut key_indices = Vec::new();
            for g in group_by {
                key_indices.push(r.schema.resolve_ref(g)?);
            }
            let mut columns = Vec::new();
            for &i in &key_indices {
                columns.push(r.schema.columns[i].clone());
            }
            columns.push(Column::new(alias.clone(), ValueKind::Text));
            let mut rows = Vec::new();
            for members in &groups {
                let mut rendered = Vec::new();
                for &m in members {
                    let row = &r.rows[m];
                    rendered.push(match attr {
                        Some(a) => render_cell(&row.values[r.schema.resolve_ref(a)?]),
                        None => {
                            row_text_for_template(&template.text, dialect, &r.schema, row)?
                        }
                    });
                }
                let agg = backend.aggregate(&template.text, &rendered)?;
                let mut values = Vec::new();
                for &i in &key_indices {
                    values.push(r.rows[members[0]].values[i].clone());
                }
                values.push(Value::Text(agg));
                rows.push(Tuple::new(values));
            }
            Ok(Relation::new(Schema::new(columns), rows))
        }
        Plan::Sort { input, keys } => {
            let r = node(input, db, backend)?;
            // Evaluate keys, then a stable sort; NULLs last either way.
            let mut evaluated: Vec<Vec<Value>> = Vec::new();
            for row in &r.rows {
                let mut vals = Vec::new();
                for key in keys {
                    vals.push(key.expr.eval(&r.schema, row)?);
                }
                evaluated.push(vals);
            }
            for (k, key) in keys.iter().enumerate() {
                let mut kind: Option<ValueKind> = None;
                for vals in &evaluated {
                    let v = &vals[k];
                    let Some(vk) = v.kind() else { continue };
                    let class = match vk {
                        ValueKind::Int | ValueKind::Float => ValueKind::Float,
                        other => other,
                    };
                    match kind {
                        None => kind = Some(class),
                        Some(prev) if prev != class => {
                            return Err(Error::Binding(format!(
                                "sort key '{}' mixes incomparable types",
                                key.expr
                            )));
                        }
                        _ => {}
                    }
                }
            }
            let mut order: Vec<usize> = (0..r.rows.len()).collect();
            order.sort_by(|&a, &b| {
                for (k, key) in keys.iter().enumerate() {
                    let (x, y) = (&evaluated[a][k], &evaluated[b][k]);
                    let ord = match (x.is_null(), y.is_null()) {
                        (true, true) => Ordering::Equal,
                        (true, false) => Ordering::Greater,
                        (false, true) => Ordering::Less,
                        (false, false) => {
                            let base = x.sql_cmp(y).unwrap_or(Ordering::Equal);
                            if key.desc {
                                base.reverse()
                            } else {
                                base
                            }
                        }
                    };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
            let rows = order.iter().map(|&i| r.rows[i].clone()).collect();
            Ok(Relation::new(r.schema, rows))
        }
        Plan::SemSort {
            input,
            attr,
            template,
        } => {
            let r = node(input, db, backend)?;
            let dialect = template.dialect()?;
            let mut scores = Vec::new();
            for row in &r.rows {
                let text = match attr {
                    Some(a) => render_cell(&row.values[r.schema.resolve_ref(a)?]),
                    None => row_text_for_template(&template.text, dialect, &r.schema, row)?,
                };
                scores.push(backend.score(&template.text, &text)?);
            }
            let mut order: Vec<usize> = (0..r.rows.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let rows = order.iter().map(|&i| r.rows[i].clone()).collect();
            Ok(Relation::new(r.schema, rows))
        }
        Plan::TopK { input, k } => {
            let r = node(input, db, backend)?;
            if *k == 0 {
                return Err(Error::Argument("LIMIT requires k >= 1".into()));
            }
            let rows = r.rows.iter().take(*k).cloned().collect();
            Ok(Relation::new(r.schema, rows))
        }
    }
}

fn check_compatible(plan: &Plan, l: &Relation, r: &Relation) -> Result<()> {
    if !crate::relation::check_union_compatible(&l.schema, &r.schema) {
        return Err(Error::Schema(format!(
            "{} requires union-compatible inputs (arity {} vs {})",
            plan.kind_name(),
            l.schema.arity(),
            r.schema.arity()
        )));
    }
    Ok(())
}

fn with_group_ids(r: &Relation, ids: &[i64]) -> Relation {
    let mut columns = r.schema.columns.clone();
    columns.push(Column::new(GROUP_ID, ValueKind::Int));
    let rows = r
        .rows
        .iter()
        .zip(ids)
        .map(|(row, &id)| {
            let mut values = row.values.clone();
            values.push(Value::Int(id));
            Tuple::new(values)
        })
        .collect();
    Relation::new(Schema::new(columns), rows)
}

/// Groups of row indices by the group-by key, first-occurrence order; one
/// all-rows group (present even when empty) for an empty key.
fn key_groups(r: &Relation, group_by: &[ColRef]) -> Result<Vec<Vec<usize>>> {
    if group_by.is_empty() {
        return Ok(vec![(0..r.rows.len()).collect()]);
    }
    let mut indices = Vec::new();
    for g in group_by {
        indices.push(r.schema.resolve_ref(g)?);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (row_idx, row) in r.rows.iter().enumerate() {
        let matching = groups.iter_mut().find(|members| {
            let first = &r.rows[members[0]];
            indices.iter().all(|&i| match (&first.values[i], &row.values[i]) {
                (Value::Null, Value::Null) => true,
                (x, y) => x.sql_eq(y),
            })
        });
        match matching {
            Some(members) => members.push(row_idx),
            None => groups.push(vec![row_idx]),
        }
    }
    Ok(groups)
}

fn oracle_agg(func: AggFunc, group_size: usize, arg: Option<Vec<&Value>>) -> Result<Value> {
    let values = match arg {
        None => return Ok(Value::Int(group_size as i64)),
        Some(v) => v,
    };
    match func {
        AggFunc::Count => Ok(Value::Int(values.len() as i64)),
        AggFunc::Sum => {
            if values.is_empty() {
                Ok(Value::Null)
            } else if values.iter().all(|v| matches!(v, Value::Int(_))) {
                let mut total: i64 = 0;
                for v in &values {
                    if let Value::Int(i) = v {
                        total = total
                            .checked_add(*i)
                            .ok_or_else(|| Error::Argument("SUM overflowed".into()))?;
                    }
                }
                Ok(Value::Int(total))
            } else {
                let mut total = 0.0;
                for v in &values {
                    total += as_num(v)?;
                }
                Ok(Value::Float(total))
            }
        }
        AggFunc::Avg => {
            if values.is_empty() {
                return Ok(Value::Null);
            }
            let mut total = 0.0;
            for v in &values {
                total += as_num(v)?;
            }
            Ok(Value::Float(total / values.len() as f64))
        }
        AggFunc::Min | AggFunc::Max => {
            let mut best: Option<&Value> = None;
            for v in values {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let take = match func {
                            AggFunc::Min => v.sql_cmp(b)?.is_lt(),
                            _ => v.sql_cmp(b)?.is_gt(),
                        };
                        if take {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.cloned().unwrap_or(Value::Null))
        }
    }
}

fn as_num(v: &Value) -> Result<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        other => Err(Error::Binding(format!(
            "aggregate needs numeric input, got {}",
            other.kind().map(|k| k.name()).unwrap_or("null")
        ))),
    }
}
