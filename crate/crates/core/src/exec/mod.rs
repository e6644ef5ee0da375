//! List-semantics evaluator.
//!
//! Executes a [`Plan`] against a [`Database`] and a [`SemanticBackend`],
//! producing the result relation plus per-node call counts and wall time.
//! Relations are ordered lists: every operator preserves the order of
//! retained input rows, and the bag operators cancel duplicates greedily
//! one-for-one, so results are deterministic for a deterministic backend.
//!
//! Independent semantic calls inside one operator (the per-row predicates
//! of a semantic selection, the per-row maps of a semantic projection, the
//! per-pair predicates of a semantic join, the per-group aggregations)
//! fan out across threads when the `parallel` feature is on; results and
//! error choice are identical to sequential in-order evaluation either
//! way. Calls whose outcome feeds the next decision (semantic dedup, bag
//! difference/intersection) always run sequentially.

mod oracle;

pub use oracle::{eval_oracle, ORACLE_ROW_CAP};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::algebra::{
    derive_schema, AggExpr, AggFunc, Catalog, Plan, ProjectItem, SortKey, Template, GROUP_ID,
};
use crate::backend::{cosine, CallCounts, SemanticBackend};
use crate::error::{Error, ErrorClass, Result};
use crate::relation::{
    tuple_concat, ColRef, Column, Relation, Schema, Tuple, Value, ValueKind,
};
use crate::render::{render_cell, render_positional, render_row, row_text_for_template};

/// Named tables. Lookup is case-insensitive; names are stored lowercased.
#[derive(Debug, Clone, Default)]
pub struct Database {
    tables: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    /// Insert or replace a table. The stored name is lowercased.
    pub fn insert(&mut self, name: impl Into<String>, relation: Relation) {
        self.tables.insert(name.into().to_lowercase(), relation);
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.tables.get(&name.to_lowercase())
    }

    /// Table names in sorted order.
    pub fn table_names(&self) -> Vec<&str> {
        self.tables.keys().map(|k| k.as_str()).collect()
    }

    /// Total row count across all tables.
    pub fn total_rows(&self) -> usize {
        self.tables.values().map(|r| r.rows.len()).sum()
    }
}

impl Catalog for Database {
    fn table_schema(&self, name: &str) -> Option<Schema> {
        self.get(name).map(|r| r.schema.clone())
    }
}

/// Whether independent semantic calls inside one operator may fan out
/// across threads. `Parallel` falls back to sequential execution when the
/// crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    pub mode: ExecMode,
}

impl Default for ExecOptions {
    fn default() -> ExecOptions {
        ExecOptions {
            mode: ExecMode::Parallel,
        }
    }
}

/// True when this build can actually fan calls out across threads.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Execution stats for one plan node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeStat {
    /// The node's one-line label, as in `Plan::pretty`.
    pub node: String,
    /// Semantic calls made by this node itself (children excluded).
    pub calls: CallCounts,
    /// Wall time spent in this node itself (children excluded).
    pub wall_micros: u64,
}

/// Result of evaluating a plan: the output relation plus per-node and
/// total semantic-call accounting.
#[derive(Debug, Clone, Serialize)]
pub struct ExecReport {
    pub result: Relation,
    /// One entry per plan node, in post-order (children before parents).
    pub nodes: Vec<NodeStat>,
    /// Call-log delta over the whole run; equals the sum of node deltas.
    pub total_calls: CallCounts,
    pub wall_micros: u64,
}

/// Evaluate `plan` with default options.
pub fn eval(plan: &Plan, db: &Database, backend: &dyn SemanticBackend) -> Result<ExecReport> {
    eval_with_options(plan, db, backend, ExecOptions::default())
}

/// Evaluate `plan`, returning the result relation and per-node stats.
pub fn eval_with_options(
    plan: &Plan,
    db: &Database,
    backend: &dyn SemanticBackend,
    options: ExecOptions,
) -> Result<ExecReport> {
    // Full bind/validate pass up front so execution never sees an
    // unresolvable column or a degenerate argument.
    derive_schema(plan, db)?;
    let started = Instant::now();
    let before = backend.call_log().counts();
    let mut ev = Evaluator {
        db,
        backend,
        parallel: options.mode == ExecMode::Parallel && parallel_enabled(),
        nodes: Vec::new(),
    };
    let result = ev.node(plan)?;
    let total_calls = backend.call_log().counts().since(&before);
    Ok(ExecReport {
        result,
        nodes: ev.nodes,
        total_calls,
        wall_micros: started.elapsed().as_micros() as u64,
    })
}

/// Equality used by dedup, grouping, and the bag operators: SQL equality
/// extended so that NULL matches NULL ("is not distinct from"). Plain
/// `sql_eq` would let a NULL row survive every dedup and never cancel in
/// a difference, which is not how SQL set operations treat NULLs.
pub(crate) fn values_match(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        _ => a.sql_eq(b),
    }
}

pub(crate) fn rows_match(a: &Tuple, b: &Tuple) -> bool {
    a.values.len() == b.values.len()
        && a.values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| values_match(x, y))
}

struct Evaluator<'a> {
    db: &'a Database,
    backend: &'a dyn SemanticBackend,
    parallel: bool,
    nodes: Vec<NodeStat>,
}

impl<'a> Evaluator<'a> {
    fn node(&mut self, plan: &Plan) -> Result<Relation> {
        // Children first, so the snapshot delta below covers only this
        // node's own semantic calls.
        let mut inputs = Vec::new();
        for child in plan.children() {
            inputs.push(self.node(child)?);
        }
        let before = self.backend.call_log().counts();
        let t0 = Instant::now();
        let out = self
            .apply(plan, inputs)
            .map_err(|e| identify_node(plan, e))?;
        let calls = self.backend.call_log().counts().since(&before);
        self.nodes.push(NodeStat {
            node: plan.label(),
            calls,
            wall_micros: t0.elapsed().as_micros() as u64,
        });
        Ok(out)
    }

    fn apply(&self, plan: &Plan, mut inputs: Vec<Relation>) -> Result<Relation> {
        // Binary nodes list left before right in Plan::children.
        let right = if inputs.len() == 2 { inputs.pop() } else { None };
        let input = inputs.pop();
        match plan {
            Plan::Scan { table, alias } => {
                let rel = self
                    .db
                    .get(table)
                    .ok_or_else(|| Error::Binding(format!("unknown table '{table}'")))?;
                Ok(Relation::new(
                    rel.schema.with_qualifier(alias.as_deref().unwrap_or(table)),
                    rel.rows.clone(),
                ))
            }
            Plan::Select { predicate, .. } => {
                let input = input.unwrap();
                let mut rows = Vec::new();
                for row in &input.rows {
                    if predicate.eval_predicate(&input.schema, row)? {
                        rows.push(row.clone());
                    }
                }
                Ok(Relation::new(input.schema, rows))
            }
            Plan::SemSelect { template, .. } => {
                let input = input.unwrap();
                let texts = rendered_rows(template, &input)?;
                let verdicts =
                    self.fan_out(&texts, |t| self.backend.predicate(&template.text, t))?;
                let rows = input
                    .rows
                    .iter()
                    .zip(&verdicts)
                    .filter(|(_, keep)| **keep)
                    .map(|(row, _)| row.clone())
                    .collect();
                Ok(Relation::new(input.schema, rows))
            }
            Plan::Project { items, .. } => {
                let input = input.unwrap();
                project(&input, items)
            }
            Plan::SemProjectCol {
                template, alias, ..
            } => {
                let input = input.unwrap();
                let texts = rendered_rows(template, &input)?;
                let values = self.fan_out(&texts, |t| self.backend.map(&template.text, t))?;
                let mut columns = input.schema.columns.clone();
                columns.push(Column::new(alias.clone(), ValueKind::Text));
                let rows = input
                    .rows
                    .iter()
                    .zip(values)
                    .map(|(row, v)| {
                        let mut values = row.values.clone();
                        values.push(Value::Text(v));
                        Tuple::new(values)
                    })
                    .collect();
                Ok(Relation::new(Schema::new(columns), rows))
            }
            Plan::Product { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let schema = l.schema.concat(&r.schema)?;
                let mut rows = Vec::with_capacity(l.rows.len() * r.rows.len());
                for lrow in &l.rows {
                    for rrow in &r.rows {
                        rows.push(tuple_concat(lrow, rrow));
                    }
                }
                Ok(Relation::new(schema, rows))
            }
            Plan::Join { on, .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let schema = l.schema.concat(&r.schema)?;
                let mut rows = Vec::new();
                for lrow in &l.rows {
                    for rrow in &r.rows {
                        let pair = tuple_concat(lrow, rrow);
                        if on.eval_predicate(&schema, &pair)? {
                            rows.push(pair);
                        }
                    }
                }
                Ok(Relation::new(schema, rows))
            }
            Plan::SemJoin { template, .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let schema = l.schema.concat(&r.schema)?;
                let dialect = template.dialect()?;
                let mut pairs = Vec::with_capacity(l.rows.len() * r.rows.len());
                let mut texts = Vec::with_capacity(pairs.capacity());
                for lrow in &l.rows {
                    for rrow in &r.rows {
                        let pair = tuple_concat(lrow, rrow);
                        texts.push(row_text_for_template(
                            &template.text,
                            dialect,
                            &schema,
                            &pair,
                        )?);
                        pairs.push(pair);
                    }
                }
                let verdicts =
                    self.fan_out(&texts, |t| self.backend.predicate(&template.text, t))?;
                let rows = pairs
                    .into_iter()
                    .zip(&verdicts)
                    .filter(|(_, keep)| **keep)
                    .map(|(pair, _)| pair)
                    .collect();
                Ok(Relation::new(schema, rows))
            }
            Plan::BagUnion { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let mut rows = l.rows;
                rows.extend(r.rows);
                Ok(Relation::new(l.schema, rows))
            }
            Plan::SetUnion { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let mut rows = l.rows;
                rows.extend(r.rows);
                Ok(Relation::new(l.schema, dedup_rows(&rows)))
            }
            Plan::SemSetUnion { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let mut rows = l.rows;
                rows.extend(r.rows);
                let schema = l.schema;
                let rows = self.sem_dedup_rows(&schema, &rows, None)?;
                Ok(Relation::new(schema, rows))
            }
            Plan::BagDiff { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Diff, |a, b| {
                    Ok(rows_match(a, b))
                })?;
                Ok(Relation::new(l.schema, rows))
            }
            Plan::SetDiff { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Diff, |a, b| {
                    Ok(rows_match(a, b))
                })?;
                Ok(Relation::new(l.schema, dedup_rows(&rows)))
            }
            Plan::SemBagDiff { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Diff, |a, b| {
                    self.rows_equivalent(a, b)
                })?;
                Ok(Relation::new(l.schema, rows))
            }
            Plan::SemSetDiff { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Diff, |a, b| {
                    self.rows_equivalent(a, b)
                })?;
                let schema = l.schema;
                let rows = self.sem_dedup_rows(&schema, &rows, None)?;
                Ok(Relation::new(schema, rows))
            }
            Plan::BagIntersect { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Intersect, |a, b| {
                    Ok(rows_match(a, b))
                })?;
                Ok(Relation::new(l.schema, rows))
            }
            Plan::SetIntersect { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Intersect, |a, b| {
                    Ok(rows_match(a, b))
                })?;
                Ok(Relation::new(l.schema, dedup_rows(&rows)))
            }
            Plan::SemBagIntersect { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Intersect, |a, b| {
                    self.rows_equivalent(a, b)
                })?;
                Ok(Relation::new(l.schema, rows))
            }
            Plan::SemSetIntersect { .. } => {
                let (l, r) = (input.unwrap(), right.unwrap());
                let rows = bag_cancel(&l.rows, &r.rows, BagOp::Intersect, |a, b| {
                    self.rows_equivalent(a, b)
                })?;
                let schema = l.schema;
                let rows = self.sem_dedup_rows(&schema, &rows, None)?;
                Ok(Relation::new(schema, rows))
            }
            Plan::Dedup { .. } => {
                let input = input.unwrap();
                let rows = dedup_rows(&input.rows);
                Ok(Relation::new(input.schema, rows))
            }
            Plan::SemDedup { attr, .. } => {
                let input = input.unwrap();
                let rows = self.sem_dedup_rows(&input.schema, &input.rows, attr.as_ref())?;
                Ok(Relation::new(input.schema, rows))
            }
            Plan::Group { attrs, .. } => {
                let input = input.unwrap();
                let indices = resolve_refs(&input.schema, attrs)?;
                let ids = group_ids_by_value(&input.rows, &indices);
                Ok(append_group_column(&input, &ids))
            }
            Plan::SemGroup { attr, k, .. } => {
                let input = input.unwrap();
                if *k == 0 {
                    return Err(Error::Argument("SemGroup requires k >= 1".into()));
                }
                let idx = input.schema.resolve_ref(attr)?;
                let ids = self.sem_group_ids(&input, idx, *k)?;
                Ok(append_group_column(&input, &ids))
            }
            Plan::Agg {
                group_by,
                emit,
                funcs,
                ..
            } => {
                let input = input.unwrap();
                aggregate(&input, group_by, emit, funcs)
            }
            Plan::SemAgg {
                group_by,
                attr,
                template,
                alias,
                ..
            } => {
                let input = input.unwrap();
                self.sem_aggregate(&input, group_by, attr.as_ref(), template, alias)
            }
            Plan::Sort { keys, .. } => {
                let input = input.unwrap();
                sort(&input, keys)
            }
            Plan::SemSort { attr, template, .. } => {
                let input = input.unwrap();
                let texts = attr_or_row_texts(&input, attr.as_ref(), template)?;
                let scores = self.fan_out(&texts, |t| self.backend.score(&template.text, t))?;
                let mut order: Vec<usize> = (0..input.rows.len()).collect();
                // Stable sort: equal scores keep input order.
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
                let rows = order.iter().map(|&i| input.rows[i].clone()).collect();
                Ok(Relation::new(input.schema, rows))
            }
            Plan::TopK { k, .. } => {
                let input = input.unwrap();
                if *k == 0 {
                    return Err(Error::Argument("LIMIT requires k >= 1".into()));
                }
                let take = (*k).min(input.rows.len());
                Ok(Relation::new(
                    input.schema,
                    input.rows[..take].to_vec(),
                ))
            }
        }
    }

    /// Run one independent call per item, in parallel when enabled.
    /// Output order always matches input order; on failure the error
    /// reported is the first one in input order, matching sequential
    /// execution (under parallelism later calls may still have run).
    fn fan_out<T, F>(&self, texts: &[String], call: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&str) -> Result<T> + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            use rayon::prelude::*;
            let results: Vec<Result<T>> =
                texts.par_iter().map(|t| call(t.as_str())).collect();
            return results.into_iter().collect();
        }
        texts.iter().map(|t| call(t.as_str())).collect()
    }

    /// Semantic row equivalence for the bag operators: positional
    /// value-only rendering on both sides, so union-compatible relations
    /// with different column names render comparably.
    fn rows_equivalent(&self, a: &Tuple, b: &Tuple) -> Result<bool> {
        self.backend
            .equivalent(&render_positional(a), &render_positional(b))
    }

    /// Keep each row iff it is not equivalent to any previously kept row.
    /// Comparisons are against kept rows only, in kept order; the scan is
    /// inherently sequential because each verdict decides what later rows
    /// are compared against.
    fn sem_dedup_rows(
        &self,
        schema: &Schema,
        rows: &[Tuple],
        attr: Option<&ColRef>,
    ) -> Result<Vec<Tuple>> {
        let texts = dedup_texts(schema, rows, attr)?;
        let mut kept: Vec<usize> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let mut duplicate = false;
            for &j in &kept {
                if self.backend.equivalent(&texts[j], text)? {
                    duplicate = true;
                    break;
                }
            }
            if !duplicate {
                kept.push(i);
            }
        }
        Ok(kept.iter().map(|&i| rows[i].clone()).collect())
    }

    /// Greedy farthest-point clustering of the attribute's embeddings.
    /// Returns one group id per row; ids follow seed row order, so the
    /// group containing the first row is always group 0.
    fn sem_group_ids(&self, input: &Relation, attr_idx: usize, k: usize) -> Result<Vec<i64>> {
        if input.rows.is_empty() {
            return Ok(Vec::new());
        }
        let texts: Vec<String> = input
            .rows
            .iter()
            .map(|row| render_cell(&row.values[attr_idx]))
            .collect();
        let embeddings = self.fan_out(&texts, |t| self.backend.embed(t))?;
        // Zero-norm embeddings (empty text) have no direction; treat
        // their similarity to everything as 0.
        let sim = |a: &[f64], b: &[f64]| cosine(a, b).unwrap_or(0.0);

        // Farthest-point seed selection: start from the first row, then
        // repeatedly take the row least similar to its nearest seed.
        // Ties resolve to the lower row index.
        let n = input.rows.len();
        let mut seeds: Vec<usize> = vec![0];
        while seeds.len() < k.min(n) {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if seeds.contains(&i) {
                    continue;
                }
                let nearest = seeds
                    .iter()
                    .map(|&s| sim(&embeddings[i], &embeddings[s]))
                    .fold(f64::NEG_INFINITY, f64::max);
                let better = match best {
                    None => true,
                    Some((_, b)) => nearest < b,
                };
                if better {
                    best = Some((i, nearest));
                }
            }
            seeds.push(best.expect("non-seed row exists").0);
        }
        // Group ids follow seed row order.
        seeds.sort_unstable();
        let assignments = input
            .rows
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let mut gid = 0usize;
                let mut best = f64::NEG_INFINITY;
                for (g, &s) in seeds.iter().enumerate() {
                    let s = sim(&embeddings[i], &embeddings[s]);
                    // Strict '>' keeps the earlier seed on ties.
                    if s > best {
                        best = s;
                        gid = g;
                    }
                }
                gid as i64
            })
            .collect();
        Ok(assignments)
    }

    fn sem_aggregate(
        &self,
        input: &Relation,
        group_by: &[ColRef],
        attr: Option<&ColRef>,
        template: &Template,
        alias: &str,
    ) -> Result<Relation> {
        let key_indices = resolve_refs(&input.schema, group_by)?;
        let groups = group_rows(&input.rows, &key_indices);
        let texts = attr_or_row_texts(input, attr, template)?;
        let value_lists: Vec<Vec<String>> = groups
            .iter()
            .map(|g| g.iter().map(|&i| texts[i].clone()).collect())
            .collect();
        let results = self.fan_out_groups(&value_lists, |vals| {
            self.backend.aggregate(&template.text, vals)
        })?;

        let mut columns = Vec::new();
        for &i in &key_indices {
            columns.push(input.schema.columns[i].clone());
        }
        columns.push(Column::new(alias.to_string(), ValueKind::Text));
        let rows = groups
            .iter()
            .zip(results)
            .map(|(g, text)| {
                let mut values: Vec<Value> = key_indices
                    .iter()
                    .map(|&i| input.rows[g[0]].values[i].clone())
                    .collect();
                values.push(Value::Text(text));
                Tuple::new(values)
            })
            .collect();
        Ok(Relation::new(Schema::new(columns), rows))
    }

    /// `fan_out` over one value-list per group.
    fn fan_out_groups<F>(&self, lists: &[Vec<String>], call: F) -> Result<Vec<String>>
    where
        F: Fn(&[String]) -> Result<String> + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.parallel {
            use rayon::prelude::*;
            let results: Vec<Result<String>> =
                lists.par_iter().map(|l| call(l.as_slice())).collect();
            return results.into_iter().collect();
        }
        lists.iter().map(|l| call(l.as_slice())).collect()
    }
}

/// Wrap backend-class errors with the failing node's label; other error
/// classes already carry their own location.
fn identify_node(plan: &Plan, e: Error) -> Error {
    match e.class() {
        ErrorClass::Backend => Error::Backend(format!("at node [{}]: {e}", plan.label())),
        _ => e,
    }
}

/// Rendered text per row for a templated row-wise operator.
fn rendered_rows(template: &Template, input: &Relation) -> Result<Vec<String>> {
    let dialect = template.dialect()?;
    input
        .rows
        .iter()
        .map(|row| row_text_for_template(&template.text, dialect, &input.schema, row))
        .collect()
}

/// Rendered text per row: the attribute's cell when given, otherwise the
/// template-directed row rendering.
fn attr_or_row_texts(
    input: &Relation,
    attr: Option<&ColRef>,
    template: &Template,
) -> Result<Vec<String>> {
    match attr {
        Some(a) => {
            let idx = input.schema.resolve_ref(a)?;
            Ok(input
                .rows
                .iter()
                .map(|row| render_cell(&row.values[idx]))
                .collect())
        }
        None => rendered_rows(template, input),
    }
}

/// Texts compared by semantic dedup: the attribute's cell when given,
/// otherwise the canonical whole-row rendering.
fn dedup_texts(schema: &Schema, rows: &[Tuple], attr: Option<&ColRef>) -> Result<Vec<String>> {
    match attr {
        Some(a) => {
            let idx = schema.resolve_ref(a)?;
            Ok(rows
                .iter()
                .map(|row| render_cell(&row.values[idx]))
                .collect())
        }
        None => Ok(rows.iter().map(|row| render_row(schema, row)).collect()),
    }
}

fn project(input: &Relation, items: &[ProjectItem]) -> Result<Relation> {
    let columns = items
        .iter()
        .map(|i| i.output_column(&input.schema))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(input.rows.len());
    for row in &input.rows {
        let values = items
            .iter()
            .map(|i| i.expr.eval(&input.schema, row))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Tuple::new(values));
    }
    Ok(Relation::new(Schema::new(columns), rows))
}

#[derive(Clone, Copy, PartialEq)]
enum BagOp {
    /// Keep left rows with no match; each match consumes one right row.
    Diff,
    /// Keep left rows with a match; each match consumes one right row.
    Intersect,
}

/// Greedy one-for-one cancellation, the definition of the bag operators:
/// walk the left rows in order; each one claims the first not-yet-consumed
/// matching right row.
fn bag_cancel<F>(left: &[Tuple], right: &[Tuple], op: BagOp, mut matches: F) -> Result<Vec<Tuple>>
where
    F: FnMut(&Tuple, &Tuple) -> Result<bool>,
{
    let mut consumed = vec![false; right.len()];
    let mut out = Vec::new();
    for row in left {
        let mut matched = false;
        for (j, cand) in right.iter().enumerate() {
            if !consumed[j] && matches(row, cand)? {
                consumed[j] = true;
                matched = true;
                break;
            }
        }
        if matched == (op == BagOp::Intersect) {
            out.push(row.clone());
        }
    }
    Ok(out)
}

/// Keep first occurrences under value equality (NULL matches NULL).
fn dedup_rows(rows: &[Tuple]) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = Vec::new();
    for row in rows {
        if !out.iter().any(|kept| rows_match(kept, row)) {
            out.push(row.clone());
        }
    }
    out
}

fn resolve_refs(schema: &Schema, refs: &[ColRef]) -> Result<Vec<usize>> {
    refs.iter().map(|r| schema.resolve_ref(r)).collect()
}

/// Group rows by equality of the key columns (NULL matches NULL), groups
/// ordered by first occurrence. Empty `key_indices` puts every row in one
/// group — and still yields that single group when there are no rows, so
/// a global aggregate over an empty input emits one row, as in SQL.
fn group_rows(rows: &[Tuple], key_indices: &[usize]) -> Vec<Vec<usize>> {
    if key_indices.is_empty() {
        return vec![(0..rows.len()).collect()];
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let found = groups.iter_mut().find(|g| {
            let first = &rows[g[0]];
            key_indices
                .iter()
                .all(|&k| values_match(&first.values[k], &row.values[k]))
        });
        match found {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Group ids by first occurrence of the key, 0-based.
fn group_ids_by_value(rows: &[Tuple], key_indices: &[usize]) -> Vec<i64> {
    let groups = group_rows(rows, key_indices);
    let mut ids = vec![0i64; rows.len()];
    for (gid, group) in groups.iter().enumerate() {
        for &i in group {
            ids[i] = gid as i64;
        }
    }
    ids
}

/// Rebuild `input` with a trailing group_id column.
fn append_group_column(input: &Relation, ids: &[i64]) -> Relation {
    let mut columns = input.schema.columns.clone();
    columns.push(Column::new(GROUP_ID, ValueKind::Int));
    let rows = input
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

fn aggregate(
    input: &Relation,
    group_by: &[ColRef],
    emit: &[ColRef],
    funcs: &[AggExpr],
) -> Result<Relation> {
    let key_indices = resolve_refs(&input.schema, group_by)?;
    let emit_indices = resolve_refs(&input.schema, emit)?;
    let groups = group_rows(&input.rows, &key_indices);

    let mut columns = Vec::new();
    for &i in &emit_indices {
        columns.push(input.schema.columns[i].clone());
    }
    for f in funcs {
        columns.push(Column::new(f.alias.clone(), f.output_kind(&input.schema)?));
    }

    let mut rows = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut values: Vec<Value> = Vec::with_capacity(columns.len());
        for &i in &emit_indices {
            // Emit columns are group keys, identical across the group;
            // a global aggregate has no emit columns, so g[0] exists.
            values.push(input.rows[group[0]].values[i].clone());
        }
        for f in funcs {
            values.push(eval_agg(input, group, f)?);
        }
        rows.push(Tuple::new(values));
    }
    Ok(Relation::new(Schema::new(columns), rows))
}

/// One aggregate over one group. NULL inputs are skipped by every
/// function except COUNT(*); an empty or all-NULL input yields NULL for
/// everything except COUNT, which yields 0.
fn eval_agg(input: &Relation, group: &[usize], f: &AggExpr) -> Result<Value> {
    let arg_idx = match &f.arg {
        None => {
            // Only COUNT may omit its argument; parse and schema
            // derivation both enforce this.
            return Ok(Value::Int(group.len() as i64));
        }
        Some(r) => input.schema.resolve_ref(r)?,
    };
    let non_null: Vec<&Value> = group
        .iter()
        .map(|&i| &input.rows[i].values[arg_idx])
        .filter(|v| !v.is_null())
        .collect();
    match f.func {
        AggFunc::Count => Ok(Value::Int(non_null.len() as i64)),
        AggFunc::Sum => numeric_sum(&non_null, f),
        AggFunc::Avg => {
            if non_null.is_empty() {
                return Ok(Value::Null);
            }
            let mut total = 0.0;
            for v in &non_null {
                total += numeric_of(v, f)?;
            }
            Ok(Value::Float(total / non_null.len() as f64))
        }
        AggFunc::Min | AggFunc::Max => {
            let mut best: Option<&Value> = None;
            for v in &non_null {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let keep_new = match f.func {
                            AggFunc::Min => v.sql_cmp(b)?.is_lt(),
                            _ => v.sql_cmp(b)?.is_gt(),
                        };
                        if keep_new {
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

/// SUM preserving integer-ness: all-Int inputs sum to Int (with overflow
/// detection), anything Float sums to Float.
fn numeric_sum(values: &[&Value], f: &AggExpr) -> Result<Value> {
    if values.is_empty() {
        return Ok(Value::Null);
    }
    if values.iter().all(|v| matches!(v, Value::Int(_))) {
        let mut total: i64 = 0;
        for v in values {
            if let Value::Int(i) = v {
                total = total
                    .checked_add(*i)
                    .ok_or_else(|| Error::Argument("SUM overflowed".into()))?;
            }
        }
        return Ok(Value::Int(total));
    }
    let mut total = 0.0;
    for v in values {
        total += numeric_of(v, f)?;
    }
    Ok(Value::Float(total))
}

fn numeric_of(v: &Value, f: &AggExpr) -> Result<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        other => Err(Error::Binding(format!(
            "{} needs numeric input, got {}",
            f.func.name(),
            other.kind().map(|k| k.name()).unwrap_or("null")
        ))),
    }
}

/// Normalized sort key: one totally ordered class per value. NULLs sort
/// after everything regardless of direction, as in SQL's NULLS LAST.
#[derive(Debug, PartialEq)]
enum SortVal {
    Bool(bool),
    Num(f64),
    Text(String),
    Null,
}

fn sort_val(v: &Value) -> SortVal {
    match v {
        Value::Null => SortVal::Null,
        Value::Bool(b) => SortVal::Bool(*b),
        Value::Int(i) => SortVal::Num(*i as f64),
        Value::Float(x) => SortVal::Num(*x),
        Value::Text(t) => SortVal::Text(t.clone()),
    }
}

fn cmp_sort(a: &SortVal, b: &SortVal, desc: bool) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let ord = match (a, b) {
        (SortVal::Null, SortVal::Null) => return Ordering::Equal,
        (SortVal::Null, _) => return Ordering::Greater,
        (_, SortVal::Null) => return Ordering::Less,
        (SortVal::Bool(x), SortVal::Bool(y)) => x.cmp(y),
        (SortVal::Num(x), SortVal::Num(y)) => x.total_cmp(y),
        (SortVal::Text(x), SortVal::Text(y)) => x.cmp(y),
        // Mixed classes within one key are rejected before sorting.
        _ => Ordering::Equal,
    };
    if desc {
        ord.reverse()
    } else {
        ord
    }
}

fn sort(input: &Relation, keys: &[SortKey]) -> Result<Relation> {
    // Evaluate every key expression up front; comparator errors cannot
    // propagate out of sort_by, so all failures must surface here.
    let mut key_values: Vec<Vec<SortVal>> = Vec::with_capacity(input.rows.len());
    for row in &input.rows {
        let mut vals = Vec::with_capacity(keys.len());
        for key in keys {
            vals.push(sort_val(&key.expr.eval(&input.schema, row)?));
        }
        key_values.push(vals);
    }
    // Reject mixed non-null classes within one key column.
    for (k, key) in keys.iter().enumerate() {
        let mut seen: Option<&SortVal> = None;
        for vals in &key_values {
            let v = &vals[k];
            if *v == SortVal::Null {
                continue;
            }
            match seen {
                None => seen = Some(v),
                Some(prev) => {
                    if std::mem::discriminant(prev) != std::mem::discriminant(v) {
                        return Err(Error::Binding(format!(
                            "sort key '{}' mixes incomparable types",
                            key.expr
                        )));
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..input.rows.len()).collect();
    order.sort_by(|&a, &b| {
        for (k, key) in keys.iter().enumerate() {
            let ord = cmp_sort(&key_values[a][k], &key_values[b][k], key.desc);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
    let rows = order.iter().map(|&i| input.rows[i].clone()).collect();
    Ok(Relation::new(input.schema.clone(), rows))
}
