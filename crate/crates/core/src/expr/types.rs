use alloc::collections::BTreeMap;
use alloc::string::String;

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp};
use crate::value::Kind;

pub type TypeEnv = BTreeMap<String, Kind>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("`{op}` cannot take {lhs}{}", rhs.map(|k| alloc::format!(" and {k}")).unwrap_or_default())]
    Operands { op: &'static str, lhs: Kind, rhs: Option<Kind> },
    #[error("`else` is only valid as a whole guard")]
    MisplacedElse,
}

fn operands(op: &'static str, lhs: Kind, rhs: Option<Kind>) -> TypeError {
    TypeError::Operands { op, lhs, rhs }
}

/// Static kind of `expr` under `env`. `Any` propagates from indexing and
/// untyped variables; the evaluator re-checks at runtime.
pub fn infer_kind(expr: &Expr, env: &TypeEnv) -> Result<Kind, TypeError> {
    match expr {
        Expr::Else => Ok(Kind::Bool),
        _ => infer(expr, env),
    }
}

fn infer(expr: &Expr, env: &TypeEnv) -> Result<Kind, TypeError> {
    use Kind::*;
    Ok(match expr {
        Expr::Lit(v) => v.kind(),
        Expr::Var(name) => *env
            .get(name)
            .ok_or_else(|| TypeError::UndeclaredVariable(name.clone()))?,
        Expr::Else => return Err(TypeError::MisplacedElse),
        Expr::List(items) => {
            for item in items {
                infer(item, env)?;
            }
            List
        }
        Expr::Unary(UnaryOp::Not, e) => {
            let k = infer(e, env)?;
            if !Bool.accepts(k) {
                return Err(operands("not", k, None));
            }
            Bool
        }
        Expr::Unary(UnaryOp::Neg, e) => {
            let k = infer(e, env)?;
            if !Number.accepts(k) {
                return Err(operands("-", k, None));
            }
            Number
        }
        Expr::Len(e) => match infer(e, env)? {
            List | String | Record | Any => Number,
            k => return Err(operands("len", k, None)),
        },
        Expr::Index(base, index) => {
            let b = infer(base, env)?;
            let i = infer(index, env)?;
            match (b, i) {
                (Any, _) => Any,
                (List, Number | Any) => Any,
                (String, Number | Any) => String,
                (Record, String | Any) => Any,
                _ => return Err(operands("index", b, Some(i))),
            }
        }
        Expr::Binary(op, a, b) => {
            let l = infer(a, env)?;
            let r = infer(b, env)?;
            match op {
                BinaryOp::And | BinaryOp::Or => {
                    if !Bool.accepts(l) || !Bool.accepts(r) {
                        return Err(operands(op.symbol(), l, Some(r)));
                    }
                    Bool
                }
                BinaryOp::Eq | BinaryOp::Ne => Bool,
                BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                    let ok = matches!(
                        (l, r),
                        (Number | Any, Number | Any) | (String | Any, String | Any)
                    );
                    if !ok {
                        return Err(operands(op.symbol(), l, Some(r)));
                    }
                    Bool
                }
                BinaryOp::In => match r {
                    List | Any => Bool,
                    String | Record if String.accepts(l) => Bool,
                    _ => return Err(operands("in", l, Some(r))),
                },
                BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                    if !Number.accepts(l) || !Number.accepts(r) {
                        return Err(operands(op.symbol(), l, Some(r)));
                    }
                    Number
                }
            }
        }
    })
}
