//! Semantic UDF extraction: the pattern-matching stage that finds
//! `SEM_*` invocations in query text before conventional parsing.
//!
//! Matching runs over the token stream rather than raw characters so
//! quoted string content can never be mistaken for an operator name.
//! Only top-level calls are reported: a `SEM_EXCEPT_ALL` nested inside
//! `SEM_DISTINCT(...)` belongs to the outer call's argument text.

use crate::error::{Error, Result};
use crate::sql::lex::{lex, syntax_at, Token, TokenKind};

/// The nine semantic UDFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemKind {
    Where,
    Select,
    Join,
    Distinct,
    ExceptAll,
    IntersectAll,
    GroupBy,
    Agg,
    OrderBy,
}

impl SemKind {
    pub fn udf_name(self) -> &'static str {
        match self {
            SemKind::Where => "SEM_WHERE",
            SemKind::Select => "SEM_SELECT",
            SemKind::Join => "SEM_JOIN",
            SemKind::Distinct => "SEM_DISTINCT",
            SemKind::ExceptAll => "SEM_EXCEPT_ALL",
            SemKind::IntersectAll => "SEM_INTERSECT_ALL",
            SemKind::GroupBy => "SEM_GROUP_BY",
            SemKind::Agg => "SEM_AGG",
            SemKind::OrderBy => "SEM_ORDER_BY",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<SemKind> {
        let upper = name.to_ascii_uppercase();
        [
            SemKind::Where,
            SemKind::Select,
            SemKind::Join,
            SemKind::Distinct,
            SemKind::ExceptAll,
            SemKind::IntersectAll,
            SemKind::GroupBy,
            SemKind::Agg,
            SemKind::OrderBy,
        ]
        .into_iter()
        .find(|k| k.udf_name() == upper)
    }

    /// Whether the UDF's non-string arguments are query/attribute text
    /// rather than a prompt. These kinds carry no template; a lone
    /// string argument is a backend tag.
    fn is_set_like(self) -> bool {
        matches!(
            self,
            SemKind::Distinct | SemKind::ExceptAll | SemKind::IntersectAll | SemKind::GroupBy
        )
    }
}

/// One extracted semantic UDF invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SemCall {
    pub kind: SemKind,
    /// The natural-language prompt, for kinds that take one.
    pub template: Option<String>,
    /// Optional backend tag (`'lotus'`, `'docetl'`, `'palimpzest'`).
    pub backend: Option<String>,
    /// Raw non-string argument texts in order: attribute names, nested
    /// query texts, or the integer k.
    pub args: Vec<String>,
    /// Byte span of `SEM_X( ... )` in the source, closing paren
    /// inclusive.
    pub span: (usize, usize),
    /// Output alias when the call is followed by `AS identifier`.
    pub alias: Option<String>,
}

/// Verify parenthesis balance over the token stream, reporting the
/// offset of the offending parenthesis.
fn check_balance(sql: &str, tokens: &[Token]) -> Result<()> {
    let mut stack = Vec::new();
    for t in tokens {
        match t.kind {
            TokenKind::Punct('(') => stack.push(t.start),
            TokenKind::Punct(')') if stack.pop().is_none() => {
                return Err(syntax_at(sql, t.start, "unbalanced ')'"));
            }
            _ => {}
        }
    }
    if let Some(open) = stack.first() {
        return Err(syntax_at(sql, *open, "unbalanced '('"));
    }
    Ok(())
}

/// Index of the `)` matching the `(` at `open`, which must hold a `(`.
pub(crate) fn matching_close(tokens: &[Token], open: usize) -> usize {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.kind {
            TokenKind::Punct('(') => depth += 1,
            TokenKind::Punct(')') => {
                depth -= 1;
                if depth == 0 {
                    return i;
                }
            }
            _ => {}
        }
    }
    unreachable!("balance was checked before matching")
}

/// Extract all top-level semantic UDF calls in source order.
pub fn scan_semantic_calls(sql: &str) -> Result<Vec<SemCall>> {
    let tokens = lex(sql)?;
    check_balance(sql, &tokens)?;
    let mut calls = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let TokenKind::Ident(name) = &tokens[i].kind else {
            i += 1;
            continue;
        };
        if !name.to_ascii_uppercase().starts_with("SEM_") {
            i += 1;
            continue;
        }
        let Some(kind) = SemKind::from_name(name) else {
            return Err(Error::UnsupportedOperator {
                name: name.clone(),
                offset: tokens[i].start,
            });
        };
        if !tokens.get(i + 1).is_some_and(|t| t.is_punct('(')) {
            return Err(syntax_at(
                sql,
                tokens[i].start,
                format!("{} must be called with parentheses", kind.udf_name()),
            ));
        }
        let close = matching_close(&tokens, i + 1);
        let call = build_call(sql, &tokens, kind, i, close)?;
        calls.push(call);
        // Skip the whole call so nested SEM_* stay un-reported, then look
        // for a trailing alias.
        i = close + 1;
        if tokens.get(i).is_some_and(|t| t.is_kw("AS")) {
            if let Some(TokenKind::Ident(alias)) = tokens.get(i + 1).map(|t| &t.kind) {
                calls.last_mut().expect("just pushed").alias = Some(alias.clone());
                i += 2;
            }
        }
    }
    Ok(calls)
}

/// Assemble one SemCall from tokens `start ..= close` (`SEM_X ( args )`).
pub(crate) fn build_call(
    sql: &str,
    tokens: &[Token],
    kind: SemKind,
    start: usize,
    close: usize,
) -> Result<SemCall> {
    let at = tokens[start].start;
    let span = (at, tokens[close].end);
    let mut template = None;
    let mut backend = None;
    let mut args = Vec::new();

    // Split tokens between the parens on top-level commas.
    let inner = &tokens[start + 2..close];
    let mut groups: Vec<&[Token]> = Vec::new();
    let mut depth = 0usize;
    let mut group_start = 0usize;
    for (i, t) in inner.iter().enumerate() {
        match t.kind {
            TokenKind::Punct('(') => depth += 1,
            TokenKind::Punct(')') => depth -= 1,
            TokenKind::Punct(',') if depth == 0 => {
                groups.push(&inner[group_start..i]);
                group_start = i + 1;
            }
            _ => {}
        }
    }
    if !inner.is_empty() || group_start > 0 {
        groups.push(&inner[group_start..]);
    }

    for group in groups {
        let [only] = group else {
            if group.is_empty() {
                return Err(syntax_at(sql, at, "empty argument"));
            }
            let first = group.first().expect("non-empty");
            let last = group.last().expect("non-empty");
            args.push(sql[first.start..last.end].trim().to_string());
            continue;
        };
        if let TokenKind::Str(s) = &only.kind {
            let slot = if kind.is_set_like() || template.is_some() {
                &mut backend
            } else {
                &mut template
            };
            if slot.is_some() {
                return Err(syntax_at(
                    sql,
                    only.start,
                    format!("too many string arguments to {}", kind.udf_name()),
                ));
            }
            *slot = Some(s.clone());
        } else {
            args.push(sql[only.start..only.end].to_string());
        }
    }

    let arity_err = |msg: &str| Err(syntax_at(sql, at, format!("{}: {msg}", kind.udf_name())));
    match kind {
        SemKind::Where | SemKind::Select => {
            if template.is_none() {
                return arity_err("a prompt string is required");
            }
            if !args.is_empty() {
                return arity_err("only a prompt and an optional backend tag are allowed");
            }
        }
        SemKind::Join => {
            if template.is_none() {
                return arity_err("a prompt string is required");
            }
            if args.len() != 2 {
                return arity_err("exactly two input tables are required");
            }
        }
        SemKind::Distinct => {
            if args.len() != 1 {
                return arity_err("exactly one argument (attribute or query) is required");
            }
        }
        SemKind::ExceptAll | SemKind::IntersectAll => {
            if args.len() != 2 {
                return arity_err("exactly two input queries are required");
            }
        }
        SemKind::GroupBy => {
            if args.len() != 2 {
                return arity_err("an attribute and a group count are required");
            }
        }
        SemKind::Agg | SemKind::OrderBy => {
            if template.is_none() {
                return arity_err("a prompt string is required");
            }
            if args.len() > 1 {
                return arity_err("at most one attribute argument is allowed");
            }
        }
    }

    Ok(SemCall {
        kind,
        template,
        backend,
        args,
        span,
        alias: None,
    })
}
