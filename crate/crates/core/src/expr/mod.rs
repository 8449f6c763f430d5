//! Guard and argument expressions.
//!
//! Text grammar (C-like precedence, lowest first):
//!
//! ```text
//! expr    := or
//! or      := and ("or" and)*
//! and     := not ("and" not)*
//! not     := "not" not | cmp
//! cmp     := add (("==" | "!=" | "<" | "<=" | ">" | ">=" | "in") add)?
//! add     := mul (("+" | "-") mul)*
//! mul     := unary (("*" | "/") unary)*
//! unary   := "-" unary | postfix
//! postfix := primary ("[" expr "]")*
//! primary := number | string | "true" | "false" | "null" | "else"
//!          | "len" "(" expr ")" | ident | "[" (expr ("," expr)*)? "]" | "(" expr ")"
//! ```
//!
//! `else` is only meaningful as a whole transition guard. JSON form: leaves
//! `{"lit": v}` / `{"var": name}`, everything else `{"op": name, "args": [...]}`.

mod eval;
mod parse;
mod render;
mod types;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::value::Value;

pub use eval::{eval_expr, EvalError};
pub use parse::{parse_expr, ParseError};
pub use types::{infer_kind, TypeError, TypeEnv};
pub(crate) use parse::is_identifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub(crate) fn json_name(self) -> &'static str {
        match self {
            BinaryOp::Or => "or",
            BinaryOp::And => "and",
            BinaryOp::Eq => "eq",
            BinaryOp::Ne => "ne",
            BinaryOp::Lt => "lt",
            BinaryOp::Le => "le",
            BinaryOp::Gt => "gt",
            BinaryOp::Ge => "ge",
            BinaryOp::In => "in",
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "or",
            BinaryOp::And => "and",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::In => "in",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    fn from_json_name(name: &str) -> Option<Self> {
        Some(match name {
            "or" => BinaryOp::Or,
            "and" => BinaryOp::And,
            "eq" => BinaryOp::Eq,
            "ne" => BinaryOp::Ne,
            "lt" => BinaryOp::Lt,
            "le" => BinaryOp::Le,
            "gt" => BinaryOp::Gt,
            "ge" => BinaryOp::Ge,
            "in" => BinaryOp::In,
            "add" => BinaryOp::Add,
            "sub" => BinaryOp::Sub,
            "mul" => BinaryOp::Mul,
            "div" => BinaryOp::Div,
            _ => return None,
        })
    }

    /// The comparison that holds exactly when `self` does not.
    pub(crate) fn negated(self) -> Option<BinaryOp> {
        Some(match self {
            BinaryOp::Eq => BinaryOp::Ne,
            BinaryOp::Ne => BinaryOp::Eq,
            BinaryOp::Lt => BinaryOp::Ge,
            BinaryOp::Ge => BinaryOp::Lt,
            BinaryOp::Gt => BinaryOp::Le,
            BinaryOp::Le => BinaryOp::Gt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Scalar literal: number, string, bool or null.
    Lit(Value),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Len(Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    /// Catch-all transition guard.
    Else,
}

impl Expr {
    pub fn lit(v: impl Into<Value>) -> Self {
        Expr::Lit(v.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn is_else(&self) -> bool {
        matches!(self, Expr::Else)
    }

    /// Guards that hold regardless of the environment.
    pub fn is_trivially_true(&self) -> bool {
        matches!(self, Expr::Else | Expr::Lit(Value::Bool(true)))
    }

    /// Variable names referenced anywhere in the expression.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(name) => out.push(name),
            Expr::Lit(_) | Expr::Else => {}
            Expr::Unary(_, e) | Expr::Len(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::List(items) => items.iter().for_each(|e| e.collect_vars(out)),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Expr::Lit(v) => json!({ "lit": v.to_json() }),
            Expr::Var(name) => json!({ "var": name }),
            Expr::Unary(UnaryOp::Not, e) => json!({ "op": "not", "args": [e.to_json()] }),
            Expr::Unary(UnaryOp::Neg, e) => json!({ "op": "neg", "args": [e.to_json()] }),
            Expr::Binary(op, a, b) => json!({ "op": op.json_name(), "args": [a.to_json(), b.to_json()] }),
            Expr::Len(e) => json!({ "op": "len", "args": [e.to_json()] }),
            Expr::Index(a, b) => json!({ "op": "index", "args": [a.to_json(), b.to_json()] }),
            Expr::List(items) => json!({ "op": "list", "args": items.iter().map(Expr::to_json).collect::<Vec<_>>() }),
            Expr::Else => json!({ "op": "else", "args": [] }),
        }
    }

    pub fn from_json(json: &serde_json::Value) -> Result<Expr, String> {
        let obj = json
            .as_object()
            .ok_or_else(|| "expression must be a JSON object".to_string())?;
        if let Some(lit) = obj.get("lit") {
            return match lit {
                serde_json::Value::Array(_) | serde_json::Value::Object(_) => {
                    Err("literal must be a number, string, bool or null".to_string())
                }
                other => Ok(Expr::Lit(Value::from_json(other))),
            };
        }
        if let Some(var) = obj.get("var") {
            return var
                .as_str()
                .map(Expr::var)
                .ok_or_else(|| "variable name must be a string".to_string());
        }
        let op = obj
            .get("op")
            .and_then(|o| o.as_str())
            .ok_or_else(|| "expression needs one of `lit`, `var` or `op`".to_string())?;
        let args = match obj.get("args") {
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .map(Expr::from_json)
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err("`args` must be an array".to_string()),
            None => Vec::new(),
        };
        let arity = |n: usize| -> Result<(), String> {
            if args.len() == n {
                Ok(())
            } else {
                Err(alloc::format!("`{op}` takes {n} argument(s), got {}", args.len()))
            }
        };
        let mut it = args.clone().into_iter();
        let mut next = || Box::new(it.next().unwrap_or(Expr::Else));
        Ok(match op {
            "not" => {
                arity(1)?;
                Expr::Unary(UnaryOp::Not, next())
            }
            "neg" => {
                arity(1)?;
                Expr::Unary(UnaryOp::Neg, next())
            }
            "len" => {
                arity(1)?;
                Expr::Len(next())
            }
            "index" => {
                arity(2)?;
                let base = next();
                Expr::Index(base, next())
            }
            "list" => Expr::List(args),
            "else" => {
                arity(0)?;
                Expr::Else
            }
            other => {
                let bin = BinaryOp::from_json_name(other)
                    .ok_or_else(|| alloc::format!("unknown operator `{other}`"))?;
                arity(2)?;
                let lhs = next();
                Expr::Binary(bin, lhs, next())
            }
        })
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = serde_json::Value::deserialize(deserializer)?;
        Expr::from_json(&json).map_err(D::Error::custom)
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[cfg(test)]
mod tests;
