use core::fmt;

use super::{BinaryOp, Expr, UnaryOp};
use crate::value::{fmt_number, Value};

const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const UNARY: u8 = 7;
const POSTFIX: u8 = 8;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => match op {
            BinaryOp::Or => OR,
            BinaryOp::And => AND,
            BinaryOp::Add | BinaryOp::Sub => ADD,
            BinaryOp::Mul | BinaryOp::Div => MUL,
            _ => CMP,
        },
        Expr::Unary(UnaryOp::Not, _) => NOT,
        Expr::Unary(UnaryOp::Neg, _) => UNARY,
        Expr::Lit(Value::Number(n)) if n.is_sign_negative() => UNARY,
        _ => POSTFIX,
    }
}

fn starts_with_number(e: &Expr) -> bool {
    match e {
        Expr::Lit(Value::Number(_)) => true,
        Expr::Index(base, _) => starts_with_number(base),
        _ => false,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Text form accepted by [`super::parse_expr`], with minimal parentheses.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(Value::String(s)) => write_str_lit(f, s),
            Expr::Lit(Value::Number(n)) => {
                if n.is_sign_negative() && *n == 0.0 {
                    f.write_str("-0")
                } else {
                    fmt_number(*n, f)
                }
            }
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Else => f.write_str("else"),
            Expr::Unary(UnaryOp::Not, e) => {
                f.write_str("not ")?;
                write_at(f, e, NOT)
            }
            Expr::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                // keep `-(3)` distinct from the literal `-3`
                if starts_with_number(e) || precedence(e) < UNARY {
                    write!(f, "({e})")
                } else {
                    write!(f, "{e}")
                }
            }
            Expr::Binary(op, a, b) => {
                let p = precedence(self);
                if p == CMP {
                    write_at(f, a, ADD)?;
                    write!(f, " {} ", op.symbol())?;
                    write_at(f, b, ADD)
                } else {
                    write_at(f, a, p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_at(f, b, p + 1)
                }
            }
            Expr::Len(e) => write!(f, "len({e})"),
            Expr::Index(a, b) => {
                write_at(f, a, POSTFIX)?;
                write!(f, "[{b}]")
            }
            Expr::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
        }
    }
}
