//! Plan transformation rules.
//!
//! The classical rules — selection pushdown, projection composition,
//! dedup idempotence — applied uniformly to conventional and semantic
//! operators. Rules are syntactic over templates: a semantic selection is
//! pushable when its placeholder columns all bind inside one join child;
//! templates with no placeholders read the whole row and are never moved
//! past a schema change. Every rule preserves executor results (the test
//! suite validates this against the evaluator on enumerated inputs) and
//! preserves the multiset of templated semantic nodes: rules move or
//! collapse plumbing, they never drop a template.

use crate::algebra::{derive_schema, Catalog, Plan, ProjectItem, ScalarExpr, Template};
use crate::error::{Error, Result};
use crate::relation::{check_union_compatible, ColRef, Schema};
use crate::render::referenced_columns;

/// A named plan-to-plan transformation. `apply` fires at a single node
/// (the traversal is the engine's job) and returns `None` when the rule
/// does not match there.
pub struct RewriteRule {
    pub name: &'static str,
    /// Whether the soundness oracle must compare results order-sensitively
    /// for this rule (all shipped rules preserve order exactly).
    pub order_sensitive: bool,
    apply: fn(&Plan, &dyn Catalog) -> Option<Plan>,
}

impl RewriteRule {
    pub fn try_apply(&self, plan: &Plan, catalog: &dyn Catalog) -> Option<Plan> {
        (self.apply)(plan, catalog)
    }
}

/// The shipped rule set, in application order.
pub fn standard_rules() -> Vec<RewriteRule> {
    vec![
        RewriteRule {
            name: "selection-pushdown",
            order_sensitive: true,
            apply: selection_pushdown,
        },
        RewriteRule {
            name: "semantic-selection-pushdown",
            order_sensitive: true,
            apply: semantic_selection_pushdown,
        },
        RewriteRule {
            name: "projection-composition",
            order_sensitive: true,
            apply: projection_composition,
        },
        RewriteRule {
            name: "dedup-collapse",
            order_sensitive: true,
            apply: dedup_collapse,
        },
    ]
}

/// Apply rules bottom-up until a fixpoint or `max_passes` whole-tree
/// passes. Unmatched rules are skipped; the output plan derives the same
/// schema and carries the same multiset of templated semantic nodes.
pub fn apply_rules(
    plan: &Plan,
    rules: &[RewriteRule],
    max_passes: usize,
    catalog: &dyn Catalog,
) -> Plan {
    let before_templates = plan.semantic_templates();
    let mut current = plan.clone();
    for _ in 0..max_passes {
        let next = rewrite_pass(&current, rules, catalog);
        if next == current {
            break;
        }
        current = next;
    }
    debug_assert_eq!(
        before_templates,
        current.semantic_templates(),
        "rewrite rules must preserve templated semantic nodes"
    );
    current
}

fn rewrite_pass(plan: &Plan, rules: &[RewriteRule], catalog: &dyn Catalog) -> Plan {
    let rebuilt = plan.map_children(&mut |child| rewrite_pass(child, rules, catalog));
    for rule in rules {
        if let Some(next) = rule.try_apply(&rebuilt, catalog) {
            return next;
        }
    }
    rebuilt
}

/// Which side of a two-child node a set of column references binds to.
#[derive(PartialEq, Eq, Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// All refs must resolve in exactly one child (and in none of the other)
/// for a push to be sound and unambiguous.
fn binding_side(
    refs: &[ColRef],
    left: &Schema,
    right: &Schema,
) -> Option<Side> {
    if refs.is_empty() {
        return None;
    }
    let all_left = refs.iter().all(|r| left.resolve_ref(r).is_ok());
    let any_right = refs.iter().any(|r| right.resolve_ref(r).is_ok());
    if all_left && !any_right {
        return Some(Side::Left);
    }
    let all_right = refs.iter().all(|r| right.resolve_ref(r).is_ok());
    let any_left = refs.iter().any(|r| left.resolve_ref(r).is_ok());
    if all_right && !any_left {
        return Some(Side::Right);
    }
    None
}

fn join_children(plan: &Plan) -> Option<(&Plan, &Plan)> {
    match plan {
        Plan::Join { left, right, .. }
        | Plan::Product { left, right }
        | Plan::SemJoin { left, right, .. } => Some((left, right)),
        _ => None,
    }
}

fn push_into(join: &Plan, side: Side, wrap: &dyn Fn(Plan) -> Plan) -> Plan {
    let mut node = join.clone();
    match &mut node {
        Plan::Join { left, right, .. }
        | Plan::Product { left, right }
        | Plan::SemJoin { left, right, .. } => match side {
            Side::Left => **left = wrap((**left).clone()),
            Side::Right => **right = wrap((**right).clone()),
        },
        _ => unreachable!("push_into only receives join-like nodes"),
    }
    node
}

/// σ_p(A ⋈ B) → σ_p(A) ⋈ B when p references only A's columns (and
/// symmetrically), for Join, Product, and SemJoin.
fn selection_pushdown(plan: &Plan, catalog: &dyn Catalog) -> Option<Plan> {
    let Plan::Select { input, predicate } = plan else {
        return None;
    };
    let (l, r) = join_children(input)?;
    let ls = derive_schema(l, catalog).ok()?;
    let rs = derive_schema(r, catalog).ok()?;
    let side = binding_side(&predicate.columns(), &ls, &rs)?;
    let predicate = predicate.clone();
    Some(push_into(input, side, &|child| Plan::Select {
        input: Box::new(child),
        predicate: predicate.clone(),
    }))
}

/// σ^sem(A ⋈ B) → pushed to the child where every placeholder binds.
/// Templates without placeholders render the whole row and never move.
fn semantic_selection_pushdown(plan: &Plan, catalog: &dyn Catalog) -> Option<Plan> {
    let Plan::SemSelect { input, template } = plan else {
        return None;
    };
    let (l, r) = join_children(input)?;
    let refs = referenced_columns(&template.text, template.dialect().ok()?);
    let ls = derive_schema(l, catalog).ok()?;
    let rs = derive_schema(r, catalog).ok()?;
    let side = binding_side(&refs, &ls, &rs)?;
    let template = template.clone();
    Some(push_into(input, side, &|child| Plan::SemSelect {
        input: Box::new(child),
        template: template.clone(),
    }))
}

/// π_outer(π_inner(R)) → π_composed(R). Fires only when every outer
/// reference maps to exactly one inner item and the composed projection
/// provably derives the identical output schema.
fn projection_composition(plan: &Plan, catalog: &dyn Catalog) -> Option<Plan> {
    let Plan::Project {
        input: mid,
        items: outer_items,
    } = plan
    else {
        return None;
    };
    let Plan::Project {
        input: base,
        items: inner_items,
    } = mid.as_ref()
    else {
        return None;
    };
    let base_schema = derive_schema(base, catalog).ok()?;
    let inner_columns: Vec<_> = inner_items
        .iter()
        .map(|i| i.output_column(&base_schema))
        .collect::<Result<_>>()
        .ok()?;
    let inner_schema = Schema::new(inner_columns);

    let mut composed = Vec::with_capacity(outer_items.len());
    for outer in outer_items {
        let target = outer.output_column(&inner_schema).ok()?;
        let substituted = outer.expr.substitute(&|r: &ColRef| {
            let idx = inner_schema.resolve_ref(r).ok()?;
            Some(inner_items[idx].expr.clone())
        })?;
        let item = if target.qualifier.is_some() {
            // Qualified outputs only survive via bare-column passthrough.
            match &substituted {
                ScalarExpr::Column(r) => {
                    let idx = base_schema.resolve_ref(r).ok()?;
                    if base_schema.columns[idx] != target {
                        return None;
                    }
                    ProjectItem {
                        expr: substituted.clone(),
                        alias: None,
                    }
                }
                _ => return None,
            }
        } else {
            ProjectItem {
                expr: substituted,
                alias: Some(target.name.clone()),
            }
        };
        composed.push(item);
    }

    let candidate = Plan::Project {
        input: base.clone(),
        items: composed,
    };
    // Final guard: the composed projection must derive the very schema
    // the two-level projection had.
    let original = derive_schema(plan, catalog).ok()?;
    let collapsed = derive_schema(&candidate, catalog).ok()?;
    (original == collapsed).then_some(candidate)
}

/// δ(δ(R)) → δ(R), for conventional dedup and for semantic dedup over
/// the same attribute. Greedy semantic dedup is idempotent even without
/// transitive equivalence: kept rows are pairwise non-equivalent.
fn dedup_collapse(plan: &Plan, _catalog: &dyn Catalog) -> Option<Plan> {
    match plan {
        Plan::Dedup { input } => match input.as_ref() {
            Plan::Dedup { .. } => Some((**input).clone()),
            _ => None,
        },
        Plan::SemDedup { input, attr } => match input.as_ref() {
            Plan::SemDedup { attr: inner, .. } if inner == attr => Some((**input).clone()),
            _ => None,
        },
        _ => None,
    }
}

const COMBINE_TEMPLATE: &str = "Combine all attributes into one text value.";
const EQUIV_TEMPLATE: &str = "Are {__lhs} and {__rhs} semantically equivalent?";

/// Build the π^sem + ⋈^sem composition that stands in for semantic
/// intersection on backends lacking a native one: project each side into
/// a single combined attribute, semantically join on equivalence of the
/// combined attributes, keep the left side's columns, deduplicate.
pub fn compose_intersection(
    left: &Plan,
    right: &Plan,
    catalog: &dyn Catalog,
) -> Result<Plan> {
    let ls = derive_schema(left, catalog)?;
    let rs = derive_schema(right, catalog)?;
    if !check_union_compatible(&ls, &rs) {
        return Err(Error::Schema(format!(
            "intersection composition requires union-compatible inputs (arity {} vs {})",
            ls.arity(),
            rs.arity()
        )));
    }
    let combined_left = Plan::SemProjectCol {
        input: Box::new(left.clone()),
        template: Template::plain(COMBINE_TEMPLATE),
        alias: "__lhs".into(),
    };
    let combined_right = Plan::SemProjectCol {
        input: Box::new(right.clone()),
        template: Template::plain(COMBINE_TEMPLATE),
        alias: "__rhs".into(),
    };
    let joined = Plan::SemJoin {
        left: Box::new(combined_left),
        right: Box::new(combined_right),
        template: Template::plain(EQUIV_TEMPLATE),
    };
    let keep_left = Plan::Project {
        input: Box::new(joined),
        items: ls
            .columns
            .iter()
            .map(|c| ProjectItem {
                expr: ScalarExpr::Column(ColRef {
                    qualifier: c.qualifier.clone(),
                    name: c.name.clone(),
                }),
                alias: None,
            })
            .collect(),
    };
    Ok(Plan::SemDedup {
        input: Box::new(keep_left),
        attr: None,
    })
}
