//! Render a conventional plan back to query text.
//!
//! Supports exactly the clause shapes the parser emits for conventional
//! queries: optional TopK over Sort over Dedup over a projection (plain,
//! or the parser's projection-over-aggregation pair) over selections
//! over a FROM tree of joins, products, and scans, plus the six
//! conventional set operations. Plans holding semantic nodes or shapes
//! the grammar cannot express are rejected.

use crate::algebra::{Plan, ProjectItem, ScalarExpr, SortKey};
use crate::error::{Error, Result};
use crate::relation::ColRef;

/// Render `plan` as SQL text. Fails on semantic nodes and on shapes that
/// have no clause form.
pub fn unparse(plan: &Plan) -> Result<String> {
    match plan {
        Plan::SetDiff { left, right } => set_op(left, right, "EXCEPT"),
        Plan::BagDiff { left, right } => set_op(left, right, "EXCEPT ALL"),
        Plan::SetUnion { left, right } => set_op(left, right, "UNION"),
        Plan::BagUnion { left, right } => set_op(left, right, "UNION ALL"),
        Plan::SetIntersect { left, right } => set_op(left, right, "INTERSECT"),
        Plan::BagIntersect { left, right } => set_op(left, right, "INTERSECT ALL"),
        _ => unparse_select(plan),
    }
}

fn set_op(left: &Plan, right: &Plan, op: &str) -> Result<String> {
    Ok(format!("({}) {op} ({})", unparse(left)?, unparse(right)?))
}

fn unsupported(plan: &Plan) -> Error {
    Error::Argument(format!(
        "plan node {} has no conventional query form here",
        plan.kind_name()
    ))
}

fn unparse_select(plan: &Plan) -> Result<String> {
    let mut node = plan;

    let mut limit = None;
    if let Plan::TopK { input, k } = node {
        limit = Some(*k);
        node = input;
    }
    let mut order: Option<&[SortKey]> = None;
    if let Plan::Sort { input, keys } = node {
        order = Some(keys);
        node = input;
    }
    let mut distinct = false;
    if let Plan::Dedup { input } = node {
        distinct = true;
        node = input;
    }

    let (select_list, group_by, mut node) = unparse_projection(node)?;

    let mut predicates = Vec::new();
    while let Plan::Select { input, predicate } = node {
        predicates.push(predicate);
        node = input;
    }
    // Selections stack outermost-last in parse order; reading downward
    // reversed them.
    predicates.reverse();

    let from = unparse_from(node)?;

    let mut out = String::from("SELECT ");
    if distinct {
        out.push_str("DISTINCT ");
    }
    out.push_str(&select_list);
    out.push_str(" FROM ");
    out.push_str(&from);
    if !predicates.is_empty() {
        let joined = predicates
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" AND ");
        out.push_str(" WHERE ");
        out.push_str(&joined);
    }
    if let Some(cols) = group_by {
        out.push_str(" GROUP BY ");
        out.push_str(&refs_text(&cols));
    }
    if let Some(keys) = order {
        let rendered: Vec<String> = keys
            .iter()
            .map(|k| {
                if k.desc {
                    format!("{} DESC", k.expr)
                } else {
                    k.expr.to_string()
                }
            })
            .collect();
        out.push_str(" ORDER BY ");
        out.push_str(&rendered.join(", "));
    }
    if let Some(k) = limit {
        out.push_str(&format!(" LIMIT {k}"));
    }
    Ok(out)
}

/// Render the projection layer: either a plain Project, the parser's
/// Project-over-Agg pair, or no projection at all (`SELECT *`).
/// Returns (select list text, GROUP BY columns, remaining input).
fn unparse_projection(node: &Plan) -> Result<(String, Option<Vec<ColRef>>, &Plan)> {
    let Plan::Project { input, items } = node else {
        return Ok(("*".to_string(), None, node));
    };
    if let Plan::Agg {
        input: agg_input,
        group_by,
        emit,
        funcs,
    } = input.as_ref()
    {
        let mut rendered = Vec::with_capacity(items.len());
        for item in items {
            let ScalarExpr::Column(r) = &item.expr else {
                return Err(unsupported(node));
            };
            if item.alias.is_some() {
                return Err(unsupported(node));
            }
            if emit.contains(r) {
                rendered.push(r.to_string());
            } else if let Some(f) = funcs.iter().find(|f| r.qualifier.is_none() && f.alias == r.name)
            {
                let arg = match &f.arg {
                    Some(a) => a.to_string(),
                    None => "*".to_string(),
                };
                rendered.push(format!("{}({arg}) AS {}", f.func.name(), f.alias));
            } else {
                return Err(unsupported(node));
            }
        }
        let group = (!group_by.is_empty()).then(|| group_by.clone());
        return Ok((rendered.join(", "), group, agg_input));
    }
    Ok((items_text(items), None, input))
}

fn items_text(items: &[ProjectItem]) -> String {
    items
        .iter()
        .map(|i| match &i.alias {
            Some(a) => format!("{} AS {a}", i.expr),
            None => i.expr.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn refs_text(refs: &[ColRef]) -> String {
    refs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn unparse_from(node: &Plan) -> Result<String> {
    match node {
        Plan::Scan { table, alias } => Ok(match alias {
            Some(a) => format!("{table} AS {a}"),
            None => table.clone(),
        }),
        Plan::Join { left, right, on } => Ok(format!(
            "{} JOIN {} ON {}",
            unparse_from(left)?,
            unparse_from(right)?,
            on
        )),
        Plan::Product { left, right } => Ok(format!(
            "{}, {}",
            unparse_from(left)?,
            unparse_from(right)?
        )),
        other => Err(unsupported(other)),
    }
}
