//! Scalar expressions: column references, literals, comparisons, boolean
//! connectives, and CAST.

use std::fmt;

use crate::error::{Error, Result};
use crate::relation::{format_float, ColRef, Schema, Tuple, Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Column(ColRef),
    Literal(Value),
    Compare {
        op: CmpOp,
        left: Box<ScalarExpr>,
        right: Box<ScalarExpr>,
    },
    And(Box<ScalarExpr>, Box<ScalarExpr>),
    Or(Box<ScalarExpr>, Box<ScalarExpr>),
    Not(Box<ScalarExpr>),
    Cast {
        expr: Box<ScalarExpr>,
        kind: ValueKind,
    },
}

impl ScalarExpr {
    pub fn col(r: ColRef) -> ScalarExpr {
        ScalarExpr::Column(r)
    }

    /// Every column reference in the expression, in occurrence order.
    pub fn columns(&self) -> Vec<ColRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<ColRef>) {
        match self {
            ScalarExpr::Column(r) => out.push(r.clone()),
            ScalarExpr::Literal(_) => {}
            ScalarExpr::Compare { left, right, .. } => {
                left.collect_columns(out);
                right.collect_columns(out);
            }
            ScalarExpr::And(a, b) | ScalarExpr::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            ScalarExpr::Not(e) | ScalarExpr::Cast { expr: e, .. } => e.collect_columns(out),
        }
    }

    /// Replace every column reference via `subst`; used by projection
    /// composition to inline inner projection expressions.
    pub fn substitute(&self, subst: &dyn Fn(&ColRef) -> Option<ScalarExpr>) -> Option<ScalarExpr> {
        Some(match self {
            ScalarExpr::Column(r) => subst(r)?,
            ScalarExpr::Literal(v) => ScalarExpr::Literal(v.clone()),
            ScalarExpr::Compare { op, left, right } => ScalarExpr::Compare {
                op: *op,
                left: Box::new(left.substitute(subst)?),
                right: Box::new(right.substitute(subst)?),
            },
            ScalarExpr::And(a, b) => ScalarExpr::And(
                Box::new(a.substitute(subst)?),
                Box::new(b.substitute(subst)?),
            ),
            ScalarExpr::Or(a, b) => ScalarExpr::Or(
                Box::new(a.substitute(subst)?),
                Box::new(b.substitute(subst)?),
            ),
            ScalarExpr::Not(e) => ScalarExpr::Not(Box::new(e.substitute(subst)?)),
            ScalarExpr::Cast { expr, kind } => ScalarExpr::Cast {
                expr: Box::new(expr.substitute(subst)?),
                kind: *kind,
            },
        })
    }

    /// The kind this expression produces over `schema`.
    pub fn derive_kind(&self, schema: &Schema) -> Result<ValueKind> {
        match self {
            ScalarExpr::Column(r) => Ok(schema.columns[schema.resolve_ref(r)?].kind),
            ScalarExpr::Literal(v) => v.kind().ok_or_else(|| {
                Error::Binding("NULL literal has no kind; cast it explicitly".into())
            }),
            ScalarExpr::Compare { left, right, .. } => {
                left.derive_kind(schema)?;
                right.derive_kind(schema)?;
                Ok(ValueKind::Bool)
            }
            ScalarExpr::And(a, b) | ScalarExpr::Or(a, b) => {
                a.derive_kind(schema)?;
                b.derive_kind(schema)?;
                Ok(ValueKind::Bool)
            }
            ScalarExpr::Not(e) => {
                e.derive_kind(schema)?;
                Ok(ValueKind::Bool)
            }
            ScalarExpr::Cast { expr, kind } => {
                expr.derive_kind(schema)?;
                Ok(*kind)
            }
        }
    }

    /// Evaluate over one row. Comparison with a NULL operand is false
    /// (never an error), matching the filter semantics of `sql_eq`.
    pub fn eval(&self, schema: &Schema, row: &Tuple) -> Result<Value> {
        match self {
            ScalarExpr::Column(r) => Ok(row.values[schema.resolve_ref(r)?].clone()),
            ScalarExpr::Literal(v) => Ok(v.clone()),
            ScalarExpr::Compare { op, left, right } => {
                let l = left.eval(schema, row)?;
                let r = right.eval(schema, row)?;
                if l.is_null() || r.is_null() {
                    return Ok(Value::Bool(false));
                }
                let verdict = match op {
                    CmpOp::Eq => l.sql_eq(&r),
                    CmpOp::Ne => !l.sql_eq(&r),
                    CmpOp::Lt => l.sql_cmp(&r)?.is_lt(),
                    CmpOp::Le => l.sql_cmp(&r)?.is_le(),
                    CmpOp::Gt => l.sql_cmp(&r)?.is_gt(),
                    CmpOp::Ge => l.sql_cmp(&r)?.is_ge(),
                };
                Ok(Value::Bool(verdict))
            }
            ScalarExpr::And(a, b) => {
                Ok(Value::Bool(truth(&a.eval(schema, row)?)? && truth(&b.eval(schema, row)?)?))
            }
            ScalarExpr::Or(a, b) => {
                Ok(Value::Bool(truth(&a.eval(schema, row)?)? || truth(&b.eval(schema, row)?)?))
            }
            ScalarExpr::Not(e) => Ok(Value::Bool(!truth(&e.eval(schema, row)?)?)),
            ScalarExpr::Cast { expr, kind } => cast_value(expr.eval(schema, row)?, *kind),
        }
    }

    /// Evaluate as a filter predicate; NULL counts as false.
    pub fn eval_predicate(&self, schema: &Schema, row: &Tuple) -> Result<bool> {
        match self.eval(schema, row)? {
            Value::Null => Ok(false),
            v => truth(&v),
        }
    }
}

/// Boolean coercion for predicate contexts.
fn truth(v: &Value) -> Result<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Null => Ok(false),
        other => Err(Error::Binding(format!(
            "expected a boolean condition, found {}",
            other.kind().map(|k| k.name()).unwrap_or("null")
        ))),
    }
}

/// CAST semantics: NULL stays NULL; any value casts to Text via its
/// rendering; numeric and text-to-numeric casts as usual; bad parses are
/// argument errors.
pub fn cast_value(v: Value, kind: ValueKind) -> Result<Value> {
    if v.is_null() {
        return Ok(Value::Null);
    }
    let bad = |v: &Value, kind: ValueKind| {
        Error::Argument(format!("cannot cast {} to {}", v.render(), kind.name()))
    };
    Ok(match (v, kind) {
        (v, ValueKind::Text) => Value::Text(v.render()),
        (Value::Int(i), ValueKind::Int) => Value::Int(i),
        (Value::Int(i), ValueKind::Float) => Value::Float(i as f64),
        (Value::Float(f), ValueKind::Float) => Value::Float(f),
        (Value::Float(f), ValueKind::Int) => Value::Int(f.trunc() as i64),
        (Value::Bool(b), ValueKind::Bool) => Value::Bool(b),
        (Value::Text(t), ValueKind::Int) => Value::Int(
            t.trim()
                .parse::<i64>()
                .map_err(|_| bad(&Value::Text(t.clone()), kind))?,
        ),
        (Value::Text(t), ValueKind::Float) => Value::Float(
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(&Value::Text(t.clone()), kind))?,
        ),
        (Value::Text(t), ValueKind::Bool) => match t.trim().to_ascii_lowercase().as_str() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => return Err(bad(&Value::Text(t.clone()), kind)),
        },
        (v, kind) => return Err(bad(&v, kind)),
    })
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarExpr::Column(r) => write!(f, "{r}"),
            ScalarExpr::Literal(Value::Text(t)) => write!(f, "'{}'", t.replace('\'', "''")),
            ScalarExpr::Literal(Value::Float(x)) => f.write_str(&display_float(*x)),
            ScalarExpr::Literal(v) => write!(f, "{v}"),
            ScalarExpr::Compare { op, left, right } => {
                write!(f, "{left} {} {right}", op.symbol())
            }
            ScalarExpr::And(a, b) => write!(f, "({a} AND {b})"),
            ScalarExpr::Or(a, b) => write!(f, "({a} OR {b})"),
            ScalarExpr::Not(e) => write!(f, "NOT ({e})"),
            ScalarExpr::Cast { expr, kind } => {
                write!(f, "CAST({expr} AS {})", kind.name().to_uppercase())
            }
        }
    }
}

/// Float literals always display with a decimal point so they re-parse as
/// floats.
fn display_float(x: f64) -> String {
    let s = format_float(x);
    if s.contains(['.', 'e', 'E', 'n', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Column;

    fn schema() -> Schema {
        Schema::new(vec![
            Column::qualified("t", "x", ValueKind::Int),
            Column::qualified("t", "s", ValueKind::Text),
        ])
    }

    fn row(x: Value, s: Value) -> Tuple {
        Tuple::new(vec![x, s])
    }

    #[test]
    fn comparison_with_null_is_false_not_error() {
        let e = ScalarExpr::Compare {
            op: CmpOp::Gt,
            left: Box::new(ScalarExpr::col(ColRef::bare("x"))),
            right: Box::new(ScalarExpr::Literal(Value::Int(0))),
        };
        let s = schema();
        assert_eq!(
            e.eval(&s, &row(Value::Null, Value::Text("a".into()))).unwrap(),
            Value::Bool(false)
        );
        assert_eq!(
            e.eval(&s, &row(Value::Int(3), Value::Text("a".into()))).unwrap(),
            Value::Bool(true)
        );
    }

    #[test]
    fn cast_text_to_float_and_back() {
        assert_eq!(
            cast_value(Value::Text("9.3".into()), ValueKind::Float).unwrap(),
            Value::Float(9.3)
        );
        assert_eq!(
            cast_value(Value::Float(9.3), ValueKind::Text).unwrap(),
            Value::Text("9.3".into())
        );
        assert!(cast_value(Value::Text("nope".into()), ValueKind::Float).is_err());
        assert_eq!(cast_value(Value::Null, ValueKind::Float).unwrap(), Value::Null);
    }

    #[test]
    fn kind_derivation_follows_cast() {
        let s = schema();
        let e = ScalarExpr::Cast {
            expr: Box::new(ScalarExpr::col(ColRef::qualified("t", "s"))),
            kind: ValueKind::Float,
        };
        assert_eq!(e.derive_kind(&s).unwrap(), ValueKind::Float);
        assert!(ScalarExpr::col(ColRef::bare("missing")).derive_kind(&s).is_err());
    }

    #[test]
    fn display_round_trips_shape() {
        let e = ScalarExpr::And(
            Box::new(ScalarExpr::Compare {
                op: CmpOp::Ge,
                left: Box::new(ScalarExpr::col(ColRef::qualified("t", "x"))),
                right: Box::new(ScalarExpr::Literal(Value::Int(2))),
            }),
            Box::new(ScalarExpr::Not(Box::new(ScalarExpr::Literal(Value::Bool(
                false,
            ))))),
        );
        assert_eq!(e.to_string(), "(t.x >= 2 AND NOT (false))");
    }

    #[test]
    fn float_literals_display_with_decimal_point() {
        assert_eq!(
            ScalarExpr::Literal(Value::Float(5.0)).to_string(),
            "5.0"
        );
    }

    #[test]
    fn substitution_inlines_columns() {
        let outer = ScalarExpr::Compare {
            op: CmpOp::Eq,
            left: Box::new(ScalarExpr::col(ColRef::bare("a"))),
            right: Box::new(ScalarExpr::Literal(Value::Int(1))),
        };
        let inlined = outer
            .substitute(&|r: &ColRef| {
                (r.name == "a").then(|| ScalarExpr::col(ColRef::qualified("t", "x")))
            })
            .unwrap();
        assert_eq!(inlined.columns(), vec![ColRef::qualified("t", "x")]);
        assert!(outer
            .substitute(&|_: &ColRef| None)
            .is_none());
    }
}
