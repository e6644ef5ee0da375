//! Logical plans: the conventional operator kinds and their semantic
//! counterparts, schema derivation, and the rewrite-rule engine.
//!
//! Plans are immutable trees; rewriting builds new trees. Product,
//! BagUnion, and TopK deliberately have no semantic variants — every
//! other operator family exists in both conventional and semantic form.

pub mod expr;
pub mod rules;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::relation::{ColRef, Column, Schema, ValueKind};
use crate::render::{dialect_for_tag, resolve_template_columns, Dialect};

pub use expr::{CmpOp, ScalarExpr};
pub use rules::{apply_rules, compose_intersection, standard_rules, RewriteRule};

/// Name of the column added by Group / SemGroup.
pub const GROUP_ID: &str = "group_id";

/// A semantic template plus its optional backend tag (placeholder
/// dialect).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub text: String,
    pub tag: Option<String>,
}

impl Template {
    pub fn new(text: impl Into<String>, tag: Option<String>) -> Template {
        Template {
            text: text.into(),
            tag,
        }
    }

    pub fn plain(text: impl Into<String>) -> Template {
        Template::new(text, None)
    }

    pub fn dialect(&self) -> Result<Dialect> {
        dialect_for_tag(self.tag.as_deref())
    }

    /// Indices of the template's referenced columns in `schema`; empty
    /// means whole-row rendering.
    pub fn column_indices(&self, schema: &Schema) -> Result<Vec<usize>> {
        resolve_template_columns(&self.text, self.dialect()?, schema)
    }
}

/// One SELECT-list item.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectItem {
    pub expr: ScalarExpr,
    pub alias: Option<String>,
}

impl ProjectItem {
    pub fn output_column(&self, input: &Schema) -> Result<Column> {
        let kind = self.expr.derive_kind(input)?;
        Ok(match (&self.alias, &self.expr) {
            (Some(alias), _) => Column::new(alias.clone(), kind),
            (None, ScalarExpr::Column(r)) => {
                let col = &input.columns[input.resolve_ref(r)?];
                col.clone()
            }
            (None, _) => {
                return Err(Error::Binding(format!(
                    "computed select item '{}' needs an alias",
                    self.expr
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortKey {
    pub expr: ScalarExpr,
    pub desc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Avg => "AVG",
        }
    }
}

/// One aggregate call in an Agg node. `arg: None` is COUNT(*).
#[derive(Debug, Clone, PartialEq)]
pub struct AggExpr {
    pub func: AggFunc,
    pub arg: Option<ColRef>,
    pub alias: String,
}

impl AggExpr {
    pub fn output_kind(&self, input: &Schema) -> Result<ValueKind> {
        let arg_kind = match &self.arg {
            None => None,
            Some(r) => Some(input.columns[input.resolve_ref(r)?].kind),
        };
        match (self.func, arg_kind) {
            (AggFunc::Count, _) => Ok(ValueKind::Int),
            (AggFunc::Avg, Some(ValueKind::Int | ValueKind::Float)) => Ok(ValueKind::Float),
            (AggFunc::Sum, Some(k @ (ValueKind::Int | ValueKind::Float))) => Ok(k),
            (AggFunc::Min | AggFunc::Max, Some(k)) => Ok(k),
            (func, Some(k)) => Err(Error::Binding(format!(
                "{} does not accept a {} argument",
                func.name(),
                k.name()
            ))),
            (func, None) => Err(Error::Binding(format!(
                "{}(*) is not defined; only COUNT takes *",
                func.name()
            ))),
        }
    }
}

/// Schema source for Scan nodes.
pub trait Catalog {
    fn table_schema(&self, name: &str) -> Option<Schema>;
}

impl Catalog for std::collections::BTreeMap<String, Schema> {
    fn table_schema(&self, name: &str) -> Option<Schema> {
        self.iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.clone())
    }
}

/// A logical query plan node.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Scan {
        table: String,
        alias: Option<String>,
    },
    Select {
        input: Box<Plan>,
        predicate: ScalarExpr,
    },
    SemSelect {
        input: Box<Plan>,
        template: Template,
    },
    Project {
        input: Box<Plan>,
        items: Vec<ProjectItem>,
    },
    /// Appends one Text column computed by `backend.map` per row.
    SemProjectCol {
        input: Box<Plan>,
        template: Template,
        alias: String,
    },
    Product {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    Join {
        left: Box<Plan>,
        right: Box<Plan>,
        on: ScalarExpr,
    },
    SemJoin {
        left: Box<Plan>,
        right: Box<Plan>,
        template: Template,
    },
    SetDiff {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    BagDiff {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SemSetDiff {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SemBagDiff {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SetUnion {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    BagUnion {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SemSetUnion {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SetIntersect {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    BagIntersect {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SemSetIntersect {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    SemBagIntersect {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    /// Appends a group_id column numbering groups of equal `attrs` values
    /// by first occurrence.
    Group {
        input: Box<Plan>,
        attrs: Vec<ColRef>,
    },
    /// Appends a group_id column from k-seed embedding clustering of
    /// `attr`.
    SemGroup {
        input: Box<Plan>,
        attr: ColRef,
        k: usize,
    },
    /// One output row per group: `emit` columns take the group's first
    /// row's values, then one column per aggregate. Empty `group_by`
    /// aggregates the whole input as a single group.
    Agg {
        input: Box<Plan>,
        group_by: Vec<ColRef>,
        emit: Vec<ColRef>,
        funcs: Vec<AggExpr>,
    },
    /// One Text value per group via `backend.aggregate`.
    SemAgg {
        input: Box<Plan>,
        group_by: Vec<ColRef>,
        attr: Option<ColRef>,
        template: Template,
        alias: String,
    },
    Dedup {
        input: Box<Plan>,
    },
    SemDedup {
        input: Box<Plan>,
        attr: Option<ColRef>,
    },
    Sort {
        input: Box<Plan>,
        keys: Vec<SortKey>,
    },
    SemSort {
        input: Box<Plan>,
        attr: Option<ColRef>,
        template: Template,
    },
    TopK {
        input: Box<Plan>,
        k: usize,
    },
}

impl Plan {
    pub fn scan(table: impl Into<String>) -> Plan {
        Plan::Scan {
            table: table.into(),
            alias: None,
        }
    }

    pub fn scan_as(table: impl Into<String>, alias: impl Into<String>) -> Plan {
        Plan::Scan {
            table: table.into(),
            alias: Some(alias.into()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Plan::Scan { .. } => "Scan",
            Plan::Select { .. } => "Select",
            Plan::SemSelect { .. } => "SemSelect",
            Plan::Project { .. } => "Project",
            Plan::SemProjectCol { .. } => "SemProjectCol",
            Plan::Product { .. } => "Product",
            Plan::Join { .. } => "Join",
            Plan::SemJoin { .. } => "SemJoin",
            Plan::SetDiff { .. } => "SetDiff",
            Plan::BagDiff { .. } => "BagDiff",
            Plan::SemSetDiff { .. } => "SemSetDiff",
            Plan::SemBagDiff { .. } => "SemBagDiff",
            Plan::SetUnion { .. } => "SetUnion",
            Plan::BagUnion { .. } => "BagUnion",
            Plan::SemSetUnion { .. } => "SemSetUnion",
            Plan::SetIntersect { .. } => "SetIntersect",
            Plan::BagIntersect { .. } => "BagIntersect",
            Plan::SemSetIntersect { .. } => "SemSetIntersect",
            Plan::SemBagIntersect { .. } => "SemBagIntersect",
            Plan::Group { .. } => "Group",
            Plan::SemGroup { .. } => "SemGroup",
            Plan::Agg { .. } => "Agg",
            Plan::SemAgg { .. } => "SemAgg",
            Plan::Dedup { .. } => "Dedup",
            Plan::SemDedup { .. } => "SemDedup",
            Plan::Sort { .. } => "Sort",
            Plan::SemSort { .. } => "SemSort",
            Plan::TopK { .. } => "TopK",
        }
    }

    pub fn children(&self) -> Vec<&Plan> {
        match self {
            Plan::Scan { .. } => vec![],
            Plan::Select { input, .. }
            | Plan::SemSelect { input, .. }
            | Plan::Project { input, .. }
            | Plan::SemProjectCol { input, .. }
            | Plan::Group { input, .. }
            | Plan::SemGroup { input, .. }
            | Plan::Agg { input, .. }
            | Plan::SemAgg { input, .. }
            | Plan::Dedup { input }
            | Plan::SemDedup { input, .. }
            | Plan::Sort { input, .. }
            | Plan::SemSort { input, .. }
            | Plan::TopK { input, .. } => vec![input],
            Plan::Product { left, right }
            | Plan::Join { left, right, .. }
            | Plan::SemJoin { left, right, .. }
            | Plan::SetDiff { left, right }
            | Plan::BagDiff { left, right }
            | Plan::SemSetDiff { left, right }
            | Plan::SemBagDiff { left, right }
            | Plan::SetUnion { left, right }
            | Plan::BagUnion { left, right }
            | Plan::SemSetUnion { left, right }
            | Plan::SetIntersect { left, right }
            | Plan::BagIntersect { left, right }
            | Plan::SemSetIntersect { left, right }
            | Plan::SemBagIntersect { left, right } => vec![left, right],
        }
    }

    /// Rebuild this node with each child replaced by `f(child)`.
    pub fn map_children(&self, f: &mut dyn FnMut(&Plan) -> Plan) -> Plan {
        let mut node = self.clone();
        match &mut node {
            Plan::Scan { .. } => {}
            Plan::Select { input, .. }
            | Plan::SemSelect { input, .. }
            | Plan::Project { input, .. }
            | Plan::SemProjectCol { input, .. }
            | Plan::Group { input, .. }
            | Plan::SemGroup { input, .. }
            | Plan::Agg { input, .. }
            | Plan::SemAgg { input, .. }
            | Plan::Dedup { input }
            | Plan::SemDedup { input, .. }
            | Plan::Sort { input, .. }
            | Plan::SemSort { input, .. }
            | Plan::TopK { input, .. } => {
                **input = f(input);
            }
            Plan::Product { left, right }
            | Plan::Join { left, right, .. }
            | Plan::SemJoin { left, right, .. }
            | Plan::SetDiff { left, right }
            | Plan::BagDiff { left, right }
            | Plan::SemSetDiff { left, right }
            | Plan::SemBagDiff { left, right }
            | Plan::SetUnion { left, right }
            | Plan::BagUnion { left, right }
            | Plan::SemSetUnion { left, right }
            | Plan::SetIntersect { left, right }
            | Plan::BagIntersect { left, right }
            | Plan::SemSetIntersect { left, right }
            | Plan::SemBagIntersect { left, right } => {
                **left = f(left);
                **right = f(right);
            }
        }
        node
    }

    /// The template on this node, for the five templated semantic kinds.
    pub fn template(&self) -> Option<&Template> {
        match self {
            Plan::SemSelect { template, .. }
            | Plan::SemProjectCol { template, .. }
            | Plan::SemJoin { template, .. }
            | Plan::SemAgg { template, .. }
            | Plan::SemSort { template, .. } => Some(template),
            _ => None,
        }
    }

    /// Multiset of (kind, template text) over the templated semantic
    /// nodes, sorted for comparison. Rewrite rules must preserve it.
    pub fn semantic_templates(&self) -> Vec<(String, String)> {
        fn walk(plan: &Plan, out: &mut Vec<(String, String)>) {
            if let Some(t) = plan.template() {
                out.push((plan.kind_name().to_string(), t.text.clone()));
            }
            for child in plan.children() {
                walk(child, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out
    }

    /// Total node count, for fixpoint sanity limits.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Stable indented pretty print, one node per line.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(&mut out, 0);
        out
    }

    fn pretty_into(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&self.label());
        out.push('\n');
        for child in self.children() {
            child.pretty_into(out, depth + 1);
        }
    }

    /// One-line node description, as used by `pretty` and execution stats.
    pub fn label(&self) -> String {
        let mut s = String::new();
        match self {
            Plan::Scan { table, alias } => {
                write!(s, "Scan {table}").unwrap();
                if let Some(a) = alias {
                    if a != table {
                        write!(s, " AS {a}").unwrap();
                    }
                }
            }
            Plan::Select { predicate, .. } => write!(s, "Select {predicate}").unwrap(),
            Plan::SemSelect { template, .. } => {
                write!(s, "SemSelect {}", template_label(template)).unwrap()
            }
            Plan::Project { items, .. } => {
                let rendered: Vec<String> = items
                    .iter()
                    .map(|i| match &i.alias {
                        Some(a) => format!("{} AS {a}", i.expr),
                        None => i.expr.to_string(),
                    })
                    .collect();
                write!(s, "Project [{}]", rendered.join(", ")).unwrap();
            }
            Plan::SemProjectCol {
                template, alias, ..
            } => write!(
                s,
                "SemProjectCol {} AS {alias}",
                template_label(template)
            )
            .unwrap(),
            Plan::Product { .. } => s.push_str("Product"),
            Plan::Join { on, .. } => write!(s, "Join ON {on}").unwrap(),
            Plan::SemJoin { template, .. } => {
                write!(s, "SemJoin {}", template_label(template)).unwrap()
            }
            Plan::SetDiff { .. }
            | Plan::BagDiff { .. }
            | Plan::SemSetDiff { .. }
            | Plan::SemBagDiff { .. }
            | Plan::SetUnion { .. }
            | Plan::BagUnion { .. }
            | Plan::SemSetUnion { .. }
            | Plan::SetIntersect { .. }
            | Plan::BagIntersect { .. }
            | Plan::SemSetIntersect { .. }
            | Plan::SemBagIntersect { .. } => s.push_str(self.kind_name()),
            Plan::Group { attrs, .. } => {
                write!(s, "Group attrs=[{}]", join_refs(attrs)).unwrap()
            }
            Plan::SemGroup { attr, k, .. } => {
                write!(s, "SemGroup attr={attr} k={k}").unwrap()
            }
            Plan::Agg {
                group_by,
                emit,
                funcs,
                ..
            } => {
                let rendered: Vec<String> = funcs
                    .iter()
                    .map(|a| {
                        let arg = a
                            .arg
                            .as_ref()
                            .map(|r| r.to_string())
                            .unwrap_or_else(|| "*".into());
                        format!("{}({arg}) AS {}", a.func.name(), a.alias)
                    })
                    .collect();
                write!(
                    s,
                    "Agg group_by=[{}] emit=[{}] funcs=[{}]",
                    join_refs(group_by),
                    join_refs(emit),
                    rendered.join(", ")
                )
                .unwrap();
            }
            Plan::SemAgg {
                group_by,
                attr,
                template,
                alias,
                ..
            } => {
                write!(s, "SemAgg {} AS {alias}", template_label(template)).unwrap();
                if let Some(a) = attr {
                    write!(s, " attr={a}").unwrap();
                }
                if !group_by.is_empty() {
                    write!(s, " group_by=[{}]", join_refs(group_by)).unwrap();
                }
            }
            Plan::Dedup { .. } => s.push_str("Dedup"),
            Plan::SemDedup { attr, .. } => {
                s.push_str("SemDedup");
                if let Some(a) = attr {
                    write!(s, " attr={a}").unwrap();
                }
            }
            Plan::Sort { keys, .. } => {
                let rendered: Vec<String> = keys
                    .iter()
                    .map(|k| {
                        format!("{} {}", k.expr, if k.desc { "DESC" } else { "ASC" })
                    })
                    .collect();
                write!(s, "Sort keys=[{}]", rendered.join(", ")).unwrap();
            }
            Plan::SemSort { attr, template, .. } => {
                write!(s, "SemSort {}", template_label(template)).unwrap();
                if let Some(a) = attr {
                    write!(s, " attr={a}").unwrap();
                }
            }
            Plan::TopK { k, .. } => write!(s, "TopK k={k}").unwrap(),
        }
        s
    }
}

fn join_refs(refs: &[ColRef]) -> String {
    refs.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn template_label(t: &Template) -> String {
    let escaped = t.text.replace('\'', "''").replace('\n', "\\n");
    match &t.tag {
        Some(tag) => format!("'{escaped}' tag={tag}"),
        None => format!("'{escaped}'"),
    }
}

/// Derive the output schema bottom-up, validating every node against its
/// children (column resolution, union compatibility, duplicate outputs,
/// degenerate arguments).
pub fn derive_schema(plan: &Plan, catalog: &dyn Catalog) -> Result<Schema> {
    match plan {
        Plan::Scan { table, alias } => {
            let schema = catalog
                .table_schema(table)
                .ok_or_else(|| Error::Binding(format!("unknown table '{table}'")))?;
            Ok(schema.with_qualifier(alias.as_deref().unwrap_or(table)))
        }
        Plan::Select { input, predicate } => {
            let schema = derive_schema(input, catalog)?;
            predicate.derive_kind(&schema)?;
            Ok(schema)
        }
        Plan::SemSelect { input, template } => {
            let schema = derive_schema(input, catalog)?;
            template.column_indices(&schema)?;
            Ok(schema)
        }
        Plan::Project { input, items } => {
            let schema = derive_schema(input, catalog)?;
            let columns = items
                .iter()
                .map(|i| i.output_column(&schema))
                .collect::<Result<Vec<_>>>()?;
            check_distinct_outputs(&columns)?;
            Ok(Schema::new(columns))
        }
        Plan::SemProjectCol {
            input,
            template,
            alias,
        } => {
            let schema = derive_schema(input, catalog)?;
            template.column_indices(&schema)?;
            let added = Column::new(alias.clone(), ValueKind::Text);
            let mut columns = schema.columns;
            if columns
                .iter()
                .any(|c| c.qualifier.is_none() && c.name.eq_ignore_ascii_case(alias))
            {
                return Err(Error::Schema(format!(
                    "output column '{alias}' already exists"
                )));
            }
            columns.push(added);
            Ok(Schema::new(columns))
        }
        Plan::Product { left, right } => {
            derive_schema(left, catalog)?.concat(&derive_schema(right, catalog)?)
        }
        Plan::Join { left, right, on } => {
            let schema =
                derive_schema(left, catalog)?.concat(&derive_schema(right, catalog)?)?;
            if on.derive_kind(&schema)? != ValueKind::Bool {
                return Err(Error::Binding("JOIN condition must be boolean".into()));
            }
            Ok(schema)
        }
        Plan::SemJoin {
            left,
            right,
            template,
        } => {
            let schema =
                derive_schema(left, catalog)?.concat(&derive_schema(right, catalog)?)?;
            template.column_indices(&schema)?;
            Ok(schema)
        }
        Plan::SetDiff { left, right }
        | Plan::BagDiff { left, right }
        | Plan::SemSetDiff { left, right }
        | Plan::SemBagDiff { left, right }
        | Plan::SetUnion { left, right }
        | Plan::BagUnion { left, right }
        | Plan::SemSetUnion { left, right }
        | Plan::SetIntersect { left, right }
        | Plan::BagIntersect { left, right }
        | Plan::SemSetIntersect { left, right }
        | Plan::SemBagIntersect { left, right } => {
            let ls = derive_schema(left, catalog)?;
            let rs = derive_schema(right, catalog)?;
            if !crate::relation::check_union_compatible(&ls, &rs) {
                return Err(Error::Schema(format!(
                    "{} requires union-compatible inputs (arity {} vs {})",
                    plan.kind_name(),
                    ls.arity(),
                    rs.arity()
                )));
            }
            Ok(ls)
        }
        Plan::Group { input, attrs } => {
            let schema = derive_schema(input, catalog)?;
            for attr in attrs {
                schema.resolve_ref(attr)?;
            }
            append_group_id(schema)
        }
        Plan::SemGroup { input, attr, k } => {
            if *k == 0 {
                return Err(Error::Argument("SemGroup requires k >= 1".into()));
            }
            let schema = derive_schema(input, catalog)?;
            schema.resolve_ref(attr)?;
            append_group_id(schema)
        }
        Plan::Agg {
            input,
            group_by,
            emit,
            funcs,
        } => {
            let schema = derive_schema(input, catalog)?;
            for r in group_by {
                schema.resolve_ref(r)?;
            }
            let mut columns = Vec::new();
            for r in emit {
                columns.push(schema.columns[schema.resolve_ref(r)?].clone());
            }
            for f in funcs {
                columns.push(Column::new(f.alias.clone(), f.output_kind(&schema)?));
            }
            check_distinct_outputs(&columns)?;
            Ok(Schema::new(columns))
        }
        Plan::SemAgg {
            input,
            group_by,
            attr,
            template,
            alias,
        } => {
            let schema = derive_schema(input, catalog)?;
            template.dialect()?;
            if let Some(a) = attr {
                schema.resolve_ref(a)?;
            }
            let mut columns = Vec::new();
            for r in group_by {
                columns.push(schema.columns[schema.resolve_ref(r)?].clone());
            }
            columns.push(Column::new(alias.clone(), ValueKind::Text));
            check_distinct_outputs(&columns)?;
            Ok(Schema::new(columns))
        }
        Plan::Dedup { input } => derive_schema(input, catalog),
        Plan::SemDedup { input, attr } => {
            let schema = derive_schema(input, catalog)?;
            if let Some(a) = attr {
                schema.resolve_ref(a)?;
            }
            Ok(schema)
        }
        Plan::Sort { input, keys } => {
            let schema = derive_schema(input, catalog)?;
            for k in keys {
                k.expr.derive_kind(&schema)?;
            }
            Ok(schema)
        }
        Plan::SemSort {
            input,
            attr,
            template,
        } => {
            let schema = derive_schema(input, catalog)?;
            template.column_indices(&schema)?;
            if let Some(a) = attr {
                schema.resolve_ref(a)?;
            }
            Ok(schema)
        }
        Plan::TopK { input, k } => {
            if *k == 0 {
                return Err(Error::Argument("LIMIT requires k >= 1".into()));
            }
            derive_schema(input, catalog)
        }
    }
}

fn append_group_id(schema: Schema) -> Result<Schema> {
    if schema
        .columns
        .iter()
        .any(|c| c.name.eq_ignore_ascii_case(GROUP_ID))
    {
        return Err(Error::Schema(format!(
            "input already has a {GROUP_ID} column"
        )));
    }
    let mut columns = schema.columns;
    columns.push(Column::new(GROUP_ID, ValueKind::Int));
    Ok(Schema::new(columns))
}

fn check_distinct_outputs(columns: &[Column]) -> Result<()> {
    for (i, c) in columns.iter().enumerate() {
        let qn = c.qualified_name();
        if columns[..i]
            .iter()
            .any(|p| p.qualified_name().eq_ignore_ascii_case(&qn))
        {
            return Err(Error::Schema(format!("duplicate output column '{qn}'")));
        }
    }
    Ok(())
}
