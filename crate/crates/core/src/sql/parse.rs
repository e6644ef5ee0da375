//! Recursive-descent parser: query text to logical plan.
//!
//! Clauses assemble in standard evaluation order: FROM, WHERE
//! (conventional conjuncts first, then semantic conjuncts cascaded in
//! source order with the first conjunct innermost), GROUP BY, the SELECT
//! list (semantic projection columns appended before the final
//! projection), DISTINCT / SEM_DISTINCT, ORDER BY, LIMIT. Semantic UDFs
//! are recognized wherever their clause allows them and nowhere else;
//! a UDF in the wrong clause is a syntax error naming the clause.

use crate::algebra::{
    AggExpr, AggFunc, CmpOp, Plan, ProjectItem, ScalarExpr, SortKey, Template, GROUP_ID,
};
use crate::error::{Error, Result};
use crate::relation::{ColRef, Value, ValueKind};
use crate::sql::lex::{lex, syntax_at, Token, TokenKind};
use crate::sql::scan::{build_call, matching_close, scan_semantic_calls, SemCall, SemKind};

/// A parsed query: the logical plan plus the semantic calls found in the
/// source text (top level, source order).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQuery {
    pub plan: Plan,
    pub sem_calls: Vec<SemCall>,
    pub source: String,
}

/// Parse a full query, returning the plan together with the extracted
/// semantic calls.
pub fn parse_query(sql: &str) -> Result<ParsedQuery> {
    let sem_calls = scan_semantic_calls(sql)?;
    let plan = parse_tokens(sql)?;
    Ok(ParsedQuery {
        plan,
        sem_calls,
        source: sql.to_string(),
    })
}

/// Parse query text to a plan only; used for nested query arguments.
pub(crate) fn parse_plan(sql: &str) -> Result<Plan> {
    // Scanning validates parenthesis balance and SEM_* names with the
    // same errors top-level text would get.
    scan_semantic_calls(sql)?;
    parse_tokens(sql)
}

fn parse_tokens(sql: &str) -> Result<Plan> {
    let tokens = lex(sql)?;
    let mut p = Parser {
        sql,
        tokens,
        pos: 0,
    };
    let plan = p.parse_query_expr()?;
    p.eat_punct(';');
    if let Some(t) = p.cur() {
        return Err(syntax_at(sql, t.start, "unexpected trailing input"));
    }
    Ok(plan)
}

const RESERVED: &[&str] = &[
    "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "LIMIT", "AND", "OR", "NOT",
    "AS", "JOIN", "INNER", "ON", "UNION", "EXCEPT", "INTERSECT", "ALL", "CAST", "ASC", "DESC",
    "TRUE", "FALSE", "NULL",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| word.eq_ignore_ascii_case(k))
}

/// One item of a SELECT list, before assembly.
enum SelectItem {
    Star,
    Expr(ProjectItem),
    Agg(AggExpr),
    SemMap { template: Template, alias: String },
    SemAgg {
        attr: Option<ColRef>,
        template: Template,
        alias: String,
    },
    SemDistinct { attr: ColRef },
}

/// Boolean expression tree that may still hold semantic predicates.
enum BoolAst {
    Sem { template: Template, offset: usize },
    Leaf(ScalarExpr),
    And(Box<BoolAst>, Box<BoolAst>),
    Or(Box<BoolAst>, Box<BoolAst>),
    Not(Box<BoolAst>),
}

enum GroupClause {
    Conventional(Vec<ColRef>),
    Semantic { attr: ColRef, k: usize },
}

enum OrderClause {
    Conventional(Vec<SortKey>),
    Semantic {
        attr: Option<ColRef>,
        template: Template,
    },
}

struct Parser<'a> {
    sql: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn cur(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.cur().is_some_and(|t| t.is_kw(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err_here(format!("expected {kw}")))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.cur().is_some_and(|t| t.is_punct(c)) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.err_here(format!("expected '{c}'")))
        }
    }

    fn err_here(&self, message: impl Into<String>) -> Error {
        let offset = self.cur().map(|t| t.start).unwrap_or(self.sql.len());
        syntax_at(self.sql, offset, message)
    }

    /// The current token's identifier spelling and offset, if it is a
    /// non-reserved identifier.
    fn cur_name(&self) -> Option<(String, usize)> {
        match self.cur() {
            Some(Token {
                kind: TokenKind::Ident(s),
                start,
                ..
            }) if !is_reserved(s) => Some((s.clone(), *start)),
            _ => None,
        }
    }

    /// Consume a whole `SEM_*(...)` call if one starts here.
    fn try_sem_call(&mut self) -> Result<Option<SemCall>> {
        let Some((name, start)) = self.cur_name() else {
            return Ok(None);
        };
        if !name.to_ascii_uppercase().starts_with("SEM_") {
            return Ok(None);
        }
        let Some(kind) = SemKind::from_name(&name) else {
            return Err(Error::UnsupportedOperator {
                name,
                offset: start,
            });
        };
        if !self
            .tokens
            .get(self.pos + 1)
            .is_some_and(|t| t.is_punct('('))
        {
            return Err(syntax_at(
                self.sql,
                start,
                format!("{} must be called with parentheses", kind.udf_name()),
            ));
        }
        let close = matching_close(&self.tokens, self.pos + 1);
        let call = build_call(self.sql, &self.tokens, kind, self.pos, close)?;
        self.pos = close + 1;
        Ok(Some(call))
    }

    /// Wrap an error from parsing a nested query argument so it points at
    /// the enclosing call.
    fn nested(&self, call: &SemCall, err: Error) -> Error {
        syntax_at(
            self.sql,
            call.span.0,
            format!("in {} argument: {err}", call.kind.udf_name()),
        )
    }

    // ---- query expressions -------------------------------------------

    fn parse_query_expr(&mut self) -> Result<Plan> {
        let mut left = self.parse_intersect_term()?;
        loop {
            let union = self.at_kw("UNION");
            let except = self.at_kw("EXCEPT");
            if !union && !except {
                break;
            }
            self.bump();
            let all = self.eat_kw("ALL");
            let right = Box::new(self.parse_intersect_term()?);
            let l = Box::new(left);
            left = match (union, all) {
                (true, true) => Plan::BagUnion { left: l, right },
                (true, false) => Plan::SetUnion { left: l, right },
                (false, true) => Plan::BagDiff { left: l, right },
                (false, false) => Plan::SetDiff { left: l, right },
            };
        }
        Ok(left)
    }

    fn parse_intersect_term(&mut self) -> Result<Plan> {
        let mut left = self.parse_set_primary()?;
        while self.eat_kw("INTERSECT") {
            let all = self.eat_kw("ALL");
            let right = Box::new(self.parse_set_primary()?);
            let l = Box::new(left);
            left = if all {
                Plan::BagIntersect { left: l, right }
            } else {
                Plan::SetIntersect { left: l, right }
            };
        }
        Ok(left)
    }

    fn parse_set_primary(&mut self) -> Result<Plan> {
        if self.eat_punct('(') {
            let plan = self.parse_query_expr()?;
            self.expect_punct(')')?;
            return Ok(plan);
        }
        if self.at_kw("SELECT") {
            return self.parse_select_query();
        }
        if let Some(call) = self.try_sem_call()? {
            return self.sem_set_plan(call);
        }
        Err(self.err_here("expected SELECT, '(', or a semantic set operator"))
    }

    /// SEM_DISTINCT / SEM_EXCEPT_ALL / SEM_INTERSECT_ALL in query
    /// position.
    fn sem_set_plan(&mut self, call: SemCall) -> Result<Plan> {
        match call.kind {
            SemKind::Distinct => {
                let arg = &call.args[0];
                if ColRef::parse(arg).is_some() {
                    return Err(syntax_at(
                        self.sql,
                        call.span.0,
                        "SEM_DISTINCT(attribute) belongs in the SELECT list; \
                         in query position the argument must be a query",
                    ));
                }
                let inner = parse_plan(arg).map_err(|e| self.nested(&call, e))?;
                Ok(match inner {
                    Plan::SemBagDiff { left, right } => Plan::SemSetDiff { left, right },
                    Plan::SemBagIntersect { left, right } => {
                        Plan::SemSetIntersect { left, right }
                    }
                    Plan::BagUnion { left, right } => Plan::SemSetUnion { left, right },
                    other => Plan::SemDedup {
                        input: Box::new(other),
                        attr: None,
                    },
                })
            }
            SemKind::ExceptAll | SemKind::IntersectAll => {
                let left = parse_plan(&call.args[0]).map_err(|e| self.nested(&call, e))?;
                let right = parse_plan(&call.args[1]).map_err(|e| self.nested(&call, e))?;
                let (left, right) = (Box::new(left), Box::new(right));
                Ok(if call.kind == SemKind::ExceptAll {
                    Plan::SemBagDiff { left, right }
                } else {
                    Plan::SemBagIntersect { left, right }
                })
            }
            other => Err(syntax_at(
                self.sql,
                call.span.0,
                format!("{} is not valid in query position", other.udf_name()),
            )),
        }
    }

    // ---- SELECT queries ----------------------------------------------

    fn parse_select_query(&mut self) -> Result<Plan> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        let items = self.parse_select_list()?;
        self.expect_kw("FROM")?;
        let from = self.parse_from()?;

        let mut where_conv = Vec::new();
        let mut where_sem = Vec::new();
        if self.eat_kw("WHERE") {
            let ast = self.parse_bool_or()?;
            split_conjuncts(self.sql, ast, &mut where_conv, &mut where_sem)?;
        }
        let mut group = None;
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group = Some(self.parse_group_clause()?);
        }
        let mut order = None;
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            order = Some(self.parse_order_clause()?);
        }
        let mut limit = None;
        if self.eat_kw("LIMIT") {
            limit = Some(self.parse_limit()?);
        }
        self.assemble(distinct, items, from, where_conv, where_sem, group, order, limit)
    }

    fn parse_select_list(&mut self) -> Result<Vec<SelectItem>> {
        let mut items = vec![self.parse_select_item()?];
        while self.eat_punct(',') {
            items.push(self.parse_select_item()?);
        }
        Ok(items)
    }

    fn parse_select_item(&mut self) -> Result<SelectItem> {
        if self.eat_punct('*') {
            return Ok(SelectItem::Star);
        }
        if let Some(call) = self.try_sem_call()? {
            return self.sem_select_item(call);
        }
        // Aggregate function?
        if let Some((name, _)) = self.cur_name() {
            let func = match name.to_ascii_uppercase().as_str() {
                "COUNT" => Some(AggFunc::Count),
                "SUM" => Some(AggFunc::Sum),
                "MIN" => Some(AggFunc::Min),
                "MAX" => Some(AggFunc::Max),
                "AVG" => Some(AggFunc::Avg),
                _ => None,
            };
            if let Some(func) = func {
                if self.tokens.get(self.pos + 1).is_some_and(|t| t.is_punct('(')) {
                    return self.parse_agg_item(func);
                }
            }
        }
        let expr = self.parse_operand()?;
        let alias = self.parse_alias()?;
        Ok(SelectItem::Expr(ProjectItem { expr, alias }))
    }

    fn sem_select_item(&mut self, call: SemCall) -> Result<SelectItem> {
        match call.kind {
            SemKind::Select => {
                let template = Template::new(
                    call.template.clone().expect("validated by build_call"),
                    call.backend.clone(),
                );
                let alias = self.parse_alias()?.ok_or_else(|| {
                    syntax_at(self.sql, call.span.0, "SEM_SELECT requires 'AS alias'")
                })?;
                Ok(SelectItem::SemMap { template, alias })
            }
            SemKind::Agg => {
                let attr = match call.args.first() {
                    Some(a) => Some(ColRef::parse(a).ok_or_else(|| {
                        syntax_at(
                            self.sql,
                            call.span.0,
                            format!("SEM_AGG attribute '{a}' is not a column reference"),
                        )
                    })?),
                    None => None,
                };
                let template = Template::new(
                    call.template.clone().expect("validated by build_call"),
                    call.backend.clone(),
                );
                let alias = self.parse_alias()?.ok_or_else(|| {
                    syntax_at(self.sql, call.span.0, "SEM_AGG requires 'AS alias'")
                })?;
                Ok(SelectItem::SemAgg {
                    attr,
                    template,
                    alias,
                })
            }
            SemKind::Distinct => {
                let attr = ColRef::parse(&call.args[0]).ok_or_else(|| {
                    syntax_at(
                        self.sql,
                        call.span.0,
                        "SEM_DISTINCT in the SELECT list takes a column reference",
                    )
                })?;
                Ok(SelectItem::SemDistinct { attr })
            }
            other => Err(syntax_at(
                self.sql,
                call.span.0,
                format!("{} is not valid in the SELECT list", other.udf_name()),
            )),
        }
    }

    fn parse_agg_item(&mut self, func: AggFunc) -> Result<SelectItem> {
        self.bump(); // function name
        self.expect_punct('(')?;
        let arg = if self.eat_punct('*') {
            if func != AggFunc::Count {
                return Err(self.err_here(format!("{}(*) is not supported", func.name())));
            }
            None
        } else {
            Some(self.parse_colref()?)
        };
        self.expect_punct(')')?;
        let alias = self
            .parse_alias()?
            .unwrap_or_else(|| func.name().to_ascii_lowercase());
        Ok(SelectItem::Agg(AggExpr { func, arg, alias }))
    }

    fn parse_alias(&mut self) -> Result<Option<String>> {
        if !self.eat_kw("AS") {
            return Ok(None);
        }
        let Some((name, _)) = self.cur_name() else {
            return Err(self.err_here("expected alias identifier after AS"));
        };
        self.bump();
        Ok(Some(name))
    }

    fn parse_colref(&mut self) -> Result<ColRef> {
        let Some((first, _)) = self.cur_name() else {
            return Err(self.err_here("expected column reference"));
        };
        self.bump();
        if self.eat_punct('.') {
            let Some((second, _)) = self.cur_name() else {
                return Err(self.err_here("expected column name after '.'"));
            };
            self.bump();
            Ok(ColRef::qualified(first, second))
        } else {
            Ok(ColRef::bare(first))
        }
    }

    // ---- scalar expressions ------------------------------------------

    fn parse_operand(&mut self) -> Result<ScalarExpr> {
        if self.at_kw("CAST") {
            self.bump();
            self.expect_punct('(')?;
            let expr = Box::new(self.parse_operand()?);
            self.expect_kw("AS")?;
            let kind = self.parse_type_name()?;
            self.expect_punct(')')?;
            return Ok(ScalarExpr::Cast { expr, kind });
        }
        if self.eat_kw("TRUE") {
            return Ok(ScalarExpr::Literal(Value::Bool(true)));
        }
        if self.eat_kw("FALSE") {
            return Ok(ScalarExpr::Literal(Value::Bool(false)));
        }
        if self.eat_kw("NULL") {
            return Ok(ScalarExpr::Literal(Value::Null));
        }
        match self.cur().map(|t| t.kind.clone()) {
            Some(TokenKind::Number(raw)) => {
                self.bump();
                let value = if raw.contains('.') {
                    Value::Float(raw.parse::<f64>().map_err(|_| {
                        self.err_here(format!("invalid number '{raw}'"))
                    })?)
                } else {
                    Value::Int(raw.parse::<i64>().map_err(|_| {
                        self.err_here(format!("number '{raw}' out of range"))
                    })?)
                };
                Ok(ScalarExpr::Literal(value))
            }
            Some(TokenKind::Str(s)) => {
                self.bump();
                Ok(ScalarExpr::Literal(Value::Text(s)))
            }
            _ => {
                if self.cur_name().is_some() {
                    Ok(ScalarExpr::Column(self.parse_colref()?))
                } else {
                    Err(self.err_here("expected expression"))
                }
            }
        }
    }

    fn parse_type_name(&mut self) -> Result<ValueKind> {
        let Some((name, _)) = self.cur_name() else {
            return Err(self.err_here("expected type name"));
        };
        self.bump();
        match name.to_ascii_uppercase().as_str() {
            "INT" | "INTEGER" | "BIGINT" => Ok(ValueKind::Int),
            "FLOAT" | "REAL" | "DOUBLE" => Ok(ValueKind::Float),
            "TEXT" | "VARCHAR" | "STRING" | "CHAR" => Ok(ValueKind::Text),
            "BOOL" | "BOOLEAN" => Ok(ValueKind::Bool),
            other => Err(self.err_here(format!("unknown type name '{other}'"))),
        }
    }

    // ---- boolean expressions -----------------------------------------

    fn parse_bool_or(&mut self) -> Result<BoolAst> {
        let mut left = self.parse_bool_and()?;
        while self.eat_kw("OR") {
            let right = self.parse_bool_and()?;
            left = BoolAst::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_bool_and(&mut self) -> Result<BoolAst> {
        let mut left = self.parse_bool_not()?;
        while self.eat_kw("AND") {
            let right = self.parse_bool_not()?;
            left = BoolAst::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_bool_not(&mut self) -> Result<BoolAst> {
        if self.eat_kw("NOT") {
            let inner = self.parse_bool_not()?;
            return Ok(BoolAst::Not(Box::new(inner)));
        }
        self.parse_bool_primary()
    }

    fn parse_bool_primary(&mut self) -> Result<BoolAst> {
        let offset = self.cur().map(|t| t.start).unwrap_or(self.sql.len());
        if let Some(call) = self.try_sem_call()? {
            if call.kind != SemKind::Where {
                return Err(syntax_at(
                    self.sql,
                    call.span.0,
                    format!("{} is not valid in WHERE", call.kind.udf_name()),
                ));
            }
            let template = Template::new(
                call.template.clone().expect("validated by build_call"),
                call.backend.clone(),
            );
            return Ok(BoolAst::Sem { template, offset });
        }
        if self.eat_punct('(') {
            let inner = self.parse_bool_or()?;
            self.expect_punct(')')?;
            return Ok(inner);
        }
        let left = self.parse_operand()?;
        let op = match self.cur().map(|t| t.kind.clone()) {
            Some(TokenKind::Op(sym)) => {
                self.bump();
                Some(match sym.as_str() {
                    "=" => CmpOp::Eq,
                    "<>" | "!=" => CmpOp::Ne,
                    "<" => CmpOp::Lt,
                    "<=" => CmpOp::Le,
                    ">" => CmpOp::Gt,
                    ">=" => CmpOp::Ge,
                    other => {
                        return Err(self.err_here(format!("unknown operator '{other}'")))
                    }
                })
            }
            _ => None,
        };
        match op {
            Some(op) => {
                let right = self.parse_operand()?;
                Ok(BoolAst::Leaf(ScalarExpr::Compare {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                }))
            }
            // A bare operand is a truth-valued predicate (e.g. a boolean
            // column produced by substitution).
            None => Ok(BoolAst::Leaf(left)),
        }
    }

    /// Parse an ON condition: conventional boolean expression only.
    fn parse_on_condition(&mut self) -> Result<ScalarExpr> {
        let ast = self.parse_bool_or()?;
        ensure_conventional(self.sql, &ast, "JOIN ON")?;
        Ok(to_scalar(ast))
    }

    // ---- FROM ----------------------------------------------------------

    fn parse_from(&mut self) -> Result<Plan> {
        let mut left = self.parse_join_chain()?;
        while self.eat_punct(',') {
            let right = self.parse_join_chain()?;
            left = Plan::Product {
                left: Box::new(left),
                right: Box::new(right),
            };
        }
        Ok(left)
    }

    fn parse_join_chain(&mut self) -> Result<Plan> {
        let mut left = self.parse_table_ref()?;
        loop {
            if self.at_kw("INNER") {
                self.bump();
                self.expect_kw("JOIN")?;
            } else if !self.eat_kw("JOIN") {
                break;
            }
            let right = self.parse_table_ref()?;
            self.expect_kw("ON")?;
            let on = self.parse_on_condition()?;
            left = Plan::Join {
                left: Box::new(left),
                right: Box::new(right),
                on,
            };
        }
        Ok(left)
    }

    fn parse_table_ref(&mut self) -> Result<Plan> {
        if let Some(call) = self.try_sem_call()? {
            if call.kind != SemKind::Join {
                return Err(syntax_at(
                    self.sql,
                    call.span.0,
                    format!("{} is not valid in FROM", call.kind.udf_name()),
                ));
            }
            let left = parse_table_arg(self.sql, &call, &call.args[0])?;
            let right = parse_table_arg(self.sql, &call, &call.args[1])?;
            let template = Template::new(
                call.template.clone().expect("validated by build_call"),
                call.backend.clone(),
            );
            return Ok(Plan::SemJoin {
                left: Box::new(left),
                right: Box::new(right),
                template,
            });
        }
        let Some((table, _)) = self.cur_name() else {
            return Err(self.err_here("expected table name"));
        };
        self.bump();
        let alias = if self.eat_kw("AS") {
            let Some((a, _)) = self.cur_name() else {
                return Err(self.err_here("expected alias after AS"));
            };
            self.bump();
            Some(a)
        } else if let Some((a, _)) = self.cur_name() {
            self.bump();
            Some(a)
        } else {
            None
        };
        Ok(Plan::Scan { table, alias })
    }

    // ---- GROUP BY / ORDER BY / LIMIT -----------------------------------

    fn parse_group_clause(&mut self) -> Result<GroupClause> {
        if let Some(call) = self.try_sem_call()? {
            if call.kind != SemKind::GroupBy {
                return Err(syntax_at(
                    self.sql,
                    call.span.0,
                    format!("{} is not valid in GROUP BY", call.kind.udf_name()),
                ));
            }
            let attr = ColRef::parse(&call.args[0]).ok_or_else(|| {
                syntax_at(
                    self.sql,
                    call.span.0,
                    format!("SEM_GROUP_BY attribute '{}' is not a column reference", call.args[0]),
                )
            })?;
            let k = call.args[1].parse::<usize>().map_err(|_| {
                syntax_at(
                    self.sql,
                    call.span.0,
                    format!("SEM_GROUP_BY group count '{}' is not an integer", call.args[1]),
                )
            })?;
            if self.cur().is_some_and(|t| t.is_punct(',')) {
                return Err(self.err_here("SEM_GROUP_BY cannot be mixed with other grouping keys"));
            }
            return Ok(GroupClause::Semantic { attr, k });
        }
        let mut cols = vec![self.parse_colref()?];
        while self.eat_punct(',') {
            cols.push(self.parse_colref()?);
        }
        Ok(GroupClause::Conventional(cols))
    }

    fn parse_order_clause(&mut self) -> Result<OrderClause> {
        if let Some(call) = self.try_sem_call()? {
            if call.kind != SemKind::OrderBy {
                return Err(syntax_at(
                    self.sql,
                    call.span.0,
                    format!("{} is not valid in ORDER BY", call.kind.udf_name()),
                ));
            }
            let attr = match call.args.first() {
                Some(a) => Some(ColRef::parse(a).ok_or_else(|| {
                    syntax_at(
                        self.sql,
                        call.span.0,
                        format!("SEM_ORDER_BY attribute '{a}' is not a column reference"),
                    )
                })?),
                None => None,
            };
            if self.at_kw("ASC") || self.at_kw("DESC") {
                return Err(self.err_here(
                    "SEM_ORDER_BY always sorts descending by relevance; ASC/DESC is not allowed",
                ));
            }
            if self.cur().is_some_and(|t| t.is_punct(',')) {
                return Err(self.err_here("SEM_ORDER_BY cannot be mixed with other sort keys"));
            }
            let template = Template::new(
                call.template.clone().expect("validated by build_call"),
                call.backend.clone(),
            );
            return Ok(OrderClause::Semantic { attr, template });
        }
        let mut keys = vec![self.parse_sort_key()?];
        while self.eat_punct(',') {
            keys.push(self.parse_sort_key()?);
        }
        Ok(OrderClause::Conventional(keys))
    }

    fn parse_sort_key(&mut self) -> Result<SortKey> {
        let expr = self.parse_operand()?;
        let desc = if self.eat_kw("DESC") {
            true
        } else {
            self.eat_kw("ASC");
            false
        };
        Ok(SortKey { expr, desc })
    }

    fn parse_limit(&mut self) -> Result<usize> {
        match self.cur().map(|t| t.kind.clone()) {
            Some(TokenKind::Number(raw)) if !raw.contains('.') => {
                self.bump();
                raw.parse::<usize>()
                    .map_err(|_| self.err_here(format!("LIMIT '{raw}' out of range")))
            }
            _ => Err(self.err_here("expected an integer after LIMIT")),
        }
    }

    // ---- assembly ------------------------------------------------------

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        distinct: bool,
        items: Vec<SelectItem>,
        from: Plan,
        where_conv: Vec<ScalarExpr>,
        where_sem: Vec<Template>,
        group: Option<GroupClause>,
        order: Option<OrderClause>,
        limit: Option<usize>,
    ) -> Result<Plan> {
        let mut plan = from;
        if let Some(pred) = where_conv
            .into_iter()
            .reduce(|a, b| ScalarExpr::And(Box::new(a), Box::new(b)))
        {
            plan = Plan::Select {
                input: Box::new(plan),
                predicate: pred,
            };
        }
        for template in where_sem {
            plan = Plan::SemSelect {
                input: Box::new(plan),
                template,
            };
        }

        // Classify the select list.
        let star = items.iter().any(|i| matches!(i, SelectItem::Star));
        let n_aggs = items.iter().filter(|i| matches!(i, SelectItem::Agg(_))).count();
        let n_semaggs = items
            .iter()
            .filter(|i| matches!(i, SelectItem::SemAgg { .. }))
            .count();
        let n_semmaps = items
            .iter()
            .filter(|i| matches!(i, SelectItem::SemMap { .. }))
            .count();
        let n_semdistinct = items
            .iter()
            .filter(|i| matches!(i, SelectItem::SemDistinct { .. }))
            .count();

        let bind = |msg: &str| Err(Error::Binding(msg.to_string()));
        if star && items.len() > 1 {
            return bind("'*' must be the only item in the SELECT list");
        }
        if n_semaggs > 1 {
            return bind("at most one SEM_AGG is allowed per query");
        }
        if n_semaggs > 0 && n_aggs > 0 {
            return bind("SEM_AGG cannot be combined with conventional aggregates");
        }
        if (n_aggs > 0 || n_semaggs > 0) && (n_semmaps > 0 || n_semdistinct > 0) {
            return bind("SEM_SELECT / SEM_DISTINCT cannot be combined with aggregation");
        }
        if n_semdistinct > 1 {
            return bind("at most one SEM_DISTINCT is allowed in the SELECT list");
        }
        if distinct && n_semdistinct > 0 {
            return bind("DISTINCT and SEM_DISTINCT cannot be combined");
        }

        // Grouping.
        let mut group_cols: Vec<ColRef> = Vec::new();
        let mut grouped = false;
        match &group {
            Some(GroupClause::Semantic { attr, k }) => {
                plan = Plan::SemGroup {
                    input: Box::new(plan),
                    attr: attr.clone(),
                    k: *k,
                };
                group_cols = vec![ColRef::bare(GROUP_ID)];
                grouped = true;
            }
            Some(GroupClause::Conventional(cols)) => {
                group_cols = cols.clone();
                grouped = true;
            }
            None => {}
        }
        if star && grouped {
            return bind("'*' cannot be combined with GROUP BY");
        }

        if n_semaggs > 0 {
            plan = self.assemble_sem_agg(plan, &items, &group_cols, &group)?;
        } else if n_aggs > 0 {
            plan = self.assemble_agg(plan, &items, &group_cols, &group)?;
        } else {
            // Plain GROUP BY without aggregates annotates rows with
            // group_id; rows and columns are preserved.
            if let Some(GroupClause::Conventional(cols)) = &group {
                plan = Plan::Group {
                    input: Box::new(plan),
                    attrs: cols.clone(),
                };
            }
            // Semantic projection columns, in select-list order.
            for item in &items {
                if let SelectItem::SemMap { template, alias } = item {
                    plan = Plan::SemProjectCol {
                        input: Box::new(plan),
                        template: template.clone(),
                        alias: alias.clone(),
                    };
                }
            }
            if !star {
                let proj: Vec<ProjectItem> = items
                    .iter()
                    .map(|item| match item {
                        SelectItem::Expr(p) => p.clone(),
                        SelectItem::SemMap { alias, .. } => ProjectItem {
                            expr: ScalarExpr::Column(ColRef::bare(alias.clone())),
                            alias: None,
                        },
                        SelectItem::SemDistinct { attr } => ProjectItem {
                            expr: ScalarExpr::Column(attr.clone()),
                            alias: None,
                        },
                        _ => unreachable!("aggregates handled above"),
                    })
                    .collect();
                plan = Plan::Project {
                    input: Box::new(plan),
                    items: proj,
                };
            }
        }

        if distinct {
            plan = Plan::Dedup {
                input: Box::new(plan),
            };
        }
        if let Some(SelectItem::SemDistinct { attr }) = items
            .iter()
            .find(|i| matches!(i, SelectItem::SemDistinct { .. }))
        {
            plan = Plan::SemDedup {
                input: Box::new(plan),
                attr: Some(attr.clone()),
            };
        }

        match order {
            Some(OrderClause::Conventional(keys)) => {
                plan = Plan::Sort {
                    input: Box::new(plan),
                    keys,
                };
            }
            Some(OrderClause::Semantic { attr, template }) => {
                plan = Plan::SemSort {
                    input: Box::new(plan),
                    attr,
                    template,
                };
            }
            None => {}
        }
        if let Some(k) = limit {
            plan = Plan::TopK {
                input: Box::new(plan),
                k,
            };
        }
        Ok(plan)
    }

    /// Aggregation with conventional functions: every plain item must be
    /// a grouping column; output order follows the select list.
    fn assemble_agg(
        &self,
        input: Plan,
        items: &[SelectItem],
        group_cols: &[ColRef],
        group: &Option<GroupClause>,
    ) -> Result<Plan> {
        let mut emit = Vec::new();
        let mut funcs = Vec::new();
        for item in items {
            match item {
                SelectItem::Expr(p) => {
                    let ScalarExpr::Column(r) = &p.expr else {
                        return Err(Error::Binding(format!(
                            "'{}' must be a grouping column or an aggregate",
                            p.expr
                        )));
                    };
                    if !group_cols.contains(r) {
                        return Err(Error::Binding(format!(
                            "column {r} must appear in GROUP BY or inside an aggregate"
                        )));
                    }
                    if p.alias.is_some() {
                        return Err(Error::Binding(
                            "aliases on grouping columns are not supported with aggregates"
                                .to_string(),
                        ));
                    }
                    emit.push(r.clone());
                }
                SelectItem::Agg(a) => funcs.push(a.clone()),
                _ => unreachable!("classification rejected other kinds"),
            }
        }
        if group.is_none() && !emit.is_empty() {
            return Err(Error::Binding(
                "plain columns require GROUP BY when aggregating".to_string(),
            ));
        }
        let agg = Plan::Agg {
            input: Box::new(input),
            group_by: group_cols.to_vec(),
            emit: emit.clone(),
            funcs: funcs.clone(),
        };
        // Re-project to the select-list order.
        let proj: Vec<ProjectItem> = items
            .iter()
            .map(|item| match item {
                SelectItem::Expr(p) => p.clone(),
                SelectItem::Agg(a) => ProjectItem {
                    expr: ScalarExpr::Column(ColRef::bare(a.alias.clone())),
                    alias: None,
                },
                _ => unreachable!(),
            })
            .collect();
        Ok(Plan::Project {
            input: Box::new(agg),
            items: proj,
        })
    }

    /// Semantic aggregation: one SEM_AGG plus optional grouping columns.
    fn assemble_sem_agg(
        &self,
        input: Plan,
        items: &[SelectItem],
        group_cols: &[ColRef],
        group: &Option<GroupClause>,
    ) -> Result<Plan> {
        let mut sem = None;
        for item in items {
            match item {
                SelectItem::Expr(p) => {
                    let ScalarExpr::Column(r) = &p.expr else {
                        return Err(Error::Binding(format!(
                            "'{}' must be a grouping column alongside SEM_AGG",
                            p.expr
                        )));
                    };
                    if !group_cols.contains(r) {
                        return Err(Error::Binding(format!(
                            "column {r} must appear in GROUP BY alongside SEM_AGG"
                        )));
                    }
                    if p.alias.is_some() {
                        return Err(Error::Binding(
                            "aliases on grouping columns are not supported with SEM_AGG"
                                .to_string(),
                        ));
                    }
                }
                SelectItem::SemAgg {
                    attr,
                    template,
                    alias,
                } => sem = Some((attr.clone(), template.clone(), alias.clone())),
                _ => unreachable!("classification rejected other kinds"),
            }
        }
        let (attr, template, alias) = sem.expect("n_semaggs == 1");
        if group.is_none()
            && items
                .iter()
                .any(|i| matches!(i, SelectItem::Expr(_)))
        {
            return Err(Error::Binding(
                "plain columns require GROUP BY when aggregating".to_string(),
            ));
        }
        let agg = Plan::SemAgg {
            input: Box::new(input),
            group_by: group_cols.to_vec(),
            attr,
            template,
            alias: alias.clone(),
        };
        let proj: Vec<ProjectItem> = items
            .iter()
            .map(|item| match item {
                SelectItem::Expr(p) => p.clone(),
                SelectItem::SemAgg { alias, .. } => ProjectItem {
                    expr: ScalarExpr::Column(ColRef::bare(alias.clone())),
                    alias: None,
                },
                _ => unreachable!(),
            })
            .collect();
        Ok(Plan::Project {
            input: Box::new(agg),
            items: proj,
        })
    }
}

/// Parse a `table [alias]` argument of SEM_JOIN.
fn parse_table_arg(sql: &str, call: &SemCall, text: &str) -> Result<Plan> {
    let err = || {
        syntax_at(
            sql,
            call.span.0,
            format!("SEM_JOIN table argument '{text}' must be 'table [alias]'"),
        )
    };
    let tokens = lex(text).map_err(|_| err())?;
    let names: Vec<&str> = tokens
        .iter()
        .map(|t| match &t.kind {
            TokenKind::Ident(s) if !is_reserved(s) || s.eq_ignore_ascii_case("AS") => s.as_str(),
            _ => "",
        })
        .collect();
    if names.iter().any(|s| s.is_empty()) {
        return Err(err());
    }
    match names.as_slice() {
        [table] => Ok(Plan::Scan {
            table: table.to_string(),
            alias: None,
        }),
        [table, alias] if !alias.eq_ignore_ascii_case("AS") => Ok(Plan::Scan {
            table: table.to_string(),
            alias: Some(alias.to_string()),
        }),
        [table, kw, alias] if kw.eq_ignore_ascii_case("AS") => Ok(Plan::Scan {
            table: table.to_string(),
            alias: Some(alias.to_string()),
        }),
        _ => Err(err()),
    }
}

/// Split a WHERE tree on top-level ANDs, in source order.
fn split_conjuncts(
    sql: &str,
    ast: BoolAst,
    conv: &mut Vec<ScalarExpr>,
    sem: &mut Vec<Template>,
) -> Result<()> {
    match ast {
        BoolAst::And(a, b) => {
            split_conjuncts(sql, *a, conv, sem)?;
            split_conjuncts(sql, *b, conv, sem)?;
            Ok(())
        }
        BoolAst::Sem { template, .. } => {
            sem.push(template);
            Ok(())
        }
        other => {
            ensure_conventional(sql, &other, "OR, NOT, or parentheses")?;
            conv.push(to_scalar(other));
            Ok(())
        }
    }
}

/// Reject semantic predicates nested under OR / NOT / parentheses.
fn ensure_conventional(sql: &str, ast: &BoolAst, context: &str) -> Result<()> {
    match ast {
        BoolAst::Sem { offset, .. } => Err(syntax_at(
            sql,
            *offset,
            format!(
                "SEM_WHERE may only appear as a bare top-level AND conjunct, not inside {context}"
            ),
        )),
        BoolAst::Leaf(_) => Ok(()),
        BoolAst::And(a, b) | BoolAst::Or(a, b) => {
            ensure_conventional(sql, a, context)?;
            ensure_conventional(sql, b, context)
        }
        BoolAst::Not(a) => ensure_conventional(sql, a, context),
    }
}

fn to_scalar(ast: BoolAst) -> ScalarExpr {
    match ast {
        BoolAst::Leaf(e) => e,
        BoolAst::And(a, b) => {
            ScalarExpr::And(Box::new(to_scalar(*a)), Box::new(to_scalar(*b)))
        }
        BoolAst::Or(a, b) => ScalarExpr::Or(Box::new(to_scalar(*a)), Box::new(to_scalar(*b))),
        BoolAst::Not(a) => ScalarExpr::Not(Box::new(to_scalar(*a))),
        BoolAst::Sem { .. } => unreachable!("callers reject semantic predicates first"),
    }
}
