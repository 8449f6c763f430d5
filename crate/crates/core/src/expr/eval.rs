use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};
use crate::value::{is_integral, Kind, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("kind mismatch in `{op}`: got {got}")]
    KindMismatch { op: &'static str, got: String },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("`else` is only valid as a whole guard")]
    MisplacedElse,
}

fn mismatch(op: &'static str, kinds: &[Kind]) -> EvalError {
    let got = kinds
        .iter()
        .map(|k| k.name())
        .collect::<Vec<_>>()
        .join(", ");
    EvalError::KindMismatch { op, got }
}

/// Evaluate `expr` against `env`. `and`/`or` short-circuit; everything else
/// is strict. A top-level `else` evaluates to `true`.
pub fn eval_expr(expr: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    match expr {
        Expr::Else => Ok(Value::Bool(true)),
        _ => eval(expr, env),
    }
}

fn eval_bool(expr: &Expr, env: &BTreeMap<String, Value>, op: &'static str) -> Result<bool, EvalError> {
    match eval(expr, env)? {
        Value::Bool(b) => Ok(b),
        other => Err(mismatch(op, &[other.kind()])),
    }
}

fn eval(expr: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UndefinedVariable(name.clone())),
        Expr::Else => Err(EvalError::MisplacedElse),
        Expr::List(items) => items
            .iter()
            .map(|e| eval(e, env))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List),
        Expr::Unary(UnaryOp::Not, e) => Ok(Value::Bool(!eval_bool(e, env, "not")?)),
        Expr::Unary(UnaryOp::Neg, e) => match eval(e, env)? {
            Value::Number(n) => Ok(Value::Number(-n)),
            other => Err(mismatch("neg", &[other.kind()])),
        },
        Expr::Len(e) => match eval(e, env)? {
            Value::List(items) => Ok(Value::Number(items.len() as f64)),
            Value::String(s) => Ok(Value::Number(s.chars().count() as f64)),
            Value::Record(fields) => Ok(Value::Number(fields.len() as f64)),
            other => Err(mismatch("len", &[other.kind()])),
        },
        Expr::Index(base, index) => {
            let base = eval(base, env)?;
            let index = eval(index, env)?;
            index_value(base, &index)
        }
        Expr::Binary(BinaryOp::And, a, b) => {
            Ok(Value::Bool(eval_bool(a, env, "and")? && eval_bool(b, env, "and")?))
        }
        Expr::Binary(BinaryOp::Or, a, b) => {
            Ok(Value::Bool(eval_bool(a, env, "or")? || eval_bool(b, env, "or")?))
        }
        Expr::Binary(op, a, b) => {
            let lhs = eval(a, env)?;
            let rhs = eval(b, env)?;
            binary(*op, lhs, rhs)
        }
    }
}

fn position(index: &Value, len: usize) -> Result<usize, EvalError> {
    let n = match index {
        Value::Number(n) if is_integral(*n) => *n as i64,
        other => return Err(mismatch("index", &[other.kind()])),
    };
    // negative indices count from the end
    let resolved = if n < 0 { len as i64 + n } else { n };
    if resolved < 0 || resolved as usize >= len {
        return Err(EvalError::IndexOutOfRange { index: n, len });
    }
    Ok(resolved as usize)
}

fn index_value(base: Value, index: &Value) -> Result<Value, EvalError> {
    match base {
        Value::List(mut items) => {
            let i = position(index, items.len())?;
            Ok(items.swap_remove(i))
        }
        Value::String(s) => {
            let chars: Vec<char> = s.chars().collect();
            let i = position(index, chars.len())?;
            Ok(Value::String(String::from(chars[i])))
        }
        Value::Record(mut fields) => match index {
            Value::String(key) => fields
                .remove(key.as_str())
                .ok_or_else(|| EvalError::MissingKey(key.clone())),
            other => Err(mismatch("index", &[Kind::Record, other.kind()])),
        },
        other => Err(mismatch("index", &[other.kind(), index.kind()])),
    }
}

fn binary(op: BinaryOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    match op {
        Eq => Ok(Value::Bool(lhs == rhs)),
        Ne => Ok(Value::Bool(lhs != rhs)),
        In => match &rhs {
            Value::List(items) => Ok(Value::Bool(items.contains(&lhs))),
            Value::String(hay) => match &lhs {
                Value::String(needle) => Ok(Value::Bool(hay.contains(needle.as_str()))),
                other => Err(mismatch("in", &[other.kind(), Kind::String])),
            },
            Value::Record(fields) => match &lhs {
                Value::String(key) => Ok(Value::Bool(fields.contains_key(key.as_str()))),
                other => Err(mismatch("in", &[other.kind(), Kind::Record])),
            },
            other => Err(mismatch("in", &[lhs.kind(), other.kind()])),
        },
        Lt | Le | Gt | Ge => {
            let ord = match (&lhs, &rhs) {
                (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
                (Value::String(a), Value::String(b)) => Some(a.cmp(b)),
                _ => None,
            }
            .ok_or_else(|| mismatch(op.symbol(), &[lhs.kind(), rhs.kind()]))?;
            Ok(Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        Add | Sub | Mul | Div => {
            let (a, b) = match (&lhs, &rhs) {
                (Value::Number(a), Value::Number(b)) => (*a, *b),
                _ => return Err(mismatch(op.symbol(), &[lhs.kind(), rhs.kind()])),
            };
            Ok(Value::Number(match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                _ => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
            }))
        }
        And | Or => unreachable!("short-circuit operators are handled in eval"),
    }
}
