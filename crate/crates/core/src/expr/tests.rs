use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::value::{Kind, Value};

fn env(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn eval_text(src: &str, e: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    eval_expr(&parse_expr(src).unwrap(), e)
}

#[test]
fn unknown_list_guard_fires() {
    let unknown = Value::List(vec![Value::from(vec![10i64, 1]), Value::from(vec![12i64, 5])]);
    let e = env(&[("unknown", unknown)]);
    assert_eq!(eval_text("len(unknown) > 0", &e), Ok(Value::Bool(true)));
}

#[test]
fn arithmetic_precedence() {
    assert_eq!(eval_text("1 + 2 * 3", &BTreeMap::new()), Ok(Value::Number(7.0)));
    assert_eq!(eval_text("(1 + 2) * 3", &BTreeMap::new()), Ok(Value::Number(9.0)));
    assert_eq!(eval_text("10 - 4 - 3", &BTreeMap::new()), Ok(Value::Number(3.0)));
}

#[test]
fn boolean_connectives() {
    let e = env(&[("x", Value::Bool(true))]);
    assert_eq!(eval_text("x and false", &e), Ok(Value::Bool(false)));
    assert_eq!(eval_text("not x or x", &e), Ok(Value::Bool(true)));
}

#[test]
fn short_circuit_skips_undefined_rhs() {
    assert_eq!(eval_text("false and missing", &BTreeMap::new()), Ok(Value::Bool(false)));
    assert_eq!(eval_text("true or missing", &BTreeMap::new()), Ok(Value::Bool(true)));
    assert_eq!(
        eval_text("true and missing", &BTreeMap::new()),
        Err(EvalError::UndefinedVariable("missing".into()))
    );
}

#[test]
fn bandwidth_guard() {
    let e = env(&[("total", Value::Number(90.0)), ("delta", Value::Number(10.0))]);
    assert_eq!(eval_text("total + delta <= 100", &e), Ok(Value::Bool(true)));
    let e = env(&[("total", Value::Number(100.0)), ("delta", Value::Number(20.0))]);
    assert_eq!(eval_text("total + delta <= 100", &e), Ok(Value::Bool(false)));
}

#[test]
fn indexing_and_membership() {
    let rec = crate::value::record([("known", Value::Bool(true)), ("name", Value::str("Ada"))]);
    let e = env(&[("r", rec), ("xs", Value::from(vec!["a", "b"]))]);
    assert_eq!(eval_text("r[\"known\"]", &e), Ok(Value::Bool(true)));
    assert_eq!(eval_text("'b' in xs", &e), Ok(Value::Bool(true)));
    assert_eq!(eval_text("xs[-1]", &e), Ok(Value::str("b")));
    assert_eq!(eval_text("'name' in r", &e), Ok(Value::Bool(true)));
    assert!(matches!(eval_text("xs[5]", &e), Err(EvalError::IndexOutOfRange { .. })));
    assert!(matches!(eval_text("r['zzz']", &e), Err(EvalError::MissingKey(_))));
}

#[test]
fn kind_mismatch_and_division() {
    let e = env(&[("s", Value::str("x"))]);
    assert!(matches!(eval_text("s + 1", &e), Err(EvalError::KindMismatch { .. })));
    assert_eq!(eval_text("1 / 0", &e), Err(EvalError::DivisionByZero));
}

#[test]
fn parse_errors() {
    assert!(parse_expr("len(").is_err());
    assert!(parse_expr("a +").is_err());
    assert!(parse_expr("teleport(3)").is_err());
    assert!(parse_expr("a b").is_err());
    assert!(parse_expr("'open").is_err());
    assert!(parse_expr("a @ b").is_err());
}

#[test]
fn type_checks() {
    let mut tenv = TypeEnv::new();
    tenv.insert("unknown".into(), Kind::List);
    tenv.insert("total".into(), Kind::Number);
    tenv.insert("delta".into(), Kind::Any);
    let infer = |s: &str| infer_kind(&parse_expr(s).unwrap(), &tenv);
    assert_eq!(infer("len(unknown) > 0"), Ok(Kind::Bool));
    assert_eq!(infer("total + delta <= 100"), Ok(Kind::Bool));
    assert_eq!(infer("else"), Ok(Kind::Bool));
    assert_eq!(infer("ghost > 1"), Err(TypeError::UndeclaredVariable("ghost".into())));
    assert!(matches!(infer("unknown + 1"), Err(TypeError::Operands { .. })));
    assert!(matches!(infer("not else"), Err(TypeError::MisplacedElse)));
}

#[test]
fn json_form() {
    let e = parse_expr("len(unknown) > 0").unwrap();
    let j = e.to_json();
    assert_eq!(
        j,
        serde_json::json!({"op": "gt", "args": [
            {"op": "len", "args": [{"var": "unknown"}]},
            {"lit": 0}
        ]})
    );
    assert_eq!(Expr::from_json(&j), Ok(e));
    assert!(Expr::from_json(&serde_json::json!({"op": "teleport", "args": []})).is_err());
    assert!(Expr::from_json(&serde_json::json!({"op": "len", "args": []})).is_err());
}

#[test]
fn rendering_is_minimal() {
    let cases = [
        "total + delta <= 100",
        "len(unknown) > 0",
        "(a or b) and c",
        "not (a and b)",
        "a - (b - c)",
        "-(3)",
        "(-3)[0]",
        "x[\"known\"]",
        "[a, 1, \"s\"]",
    ];
    for src in cases {
        assert_eq!(parse_expr(src).unwrap().to_string(), src);
    }
}

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![Just("a"), Just("b"), Just("count"), Just("_i"), Just("total")].prop_map(String::from)
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-1000i64..1000).prop_map(|n| Expr::Lit(Value::Number(n as f64))),
        (-100.0f64..100.0).prop_map(|n| Expr::Lit(Value::Number(n))),
        "[a-z \"'\\\\]{0,6}".prop_map(|s| Expr::Lit(Value::String(s))),
        any::<bool>().prop_map(|b| Expr::Lit(Value::Bool(b))),
        Just(Expr::Lit(Value::Null)),
        ident().prop_map(Expr::Var),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let ops = [
        BinaryOp::Or,
        BinaryOp::And,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::In,
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
    ];
    leaf().prop_recursive(5, 48, 4, move |inner| {
        prop_oneof![
            (proptest::sample::select(ops.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            inner.clone().prop_map(|e| Expr::Unary(UnaryOp::Not, Box::new(e))),
            inner.clone().prop_map(|e| Expr::Unary(UnaryOp::Neg, Box::new(e))),
            inner.clone().prop_map(|e| Expr::Len(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Index(Box::new(a), Box::new(b))),
            proptest::collection::vec(inner, 0..3).prop_map(Expr::List),
        ]
    })
}

proptest! {
    #[test]
    fn text_round_trip(e in arb_expr()) {
        let text = e.to_string();
        let back = parse_expr(&text);
        prop_assert_eq!(back.as_ref(), Ok(&e), "rendered as {}", text);
    }

    #[test]
    fn json_round_trip(e in arb_expr()) {
        let back = Expr::from_json(&e.to_json());
        prop_assert_eq!(back, Ok(e));
    }

    #[test]
    fn well_typed_closed_expressions_do_not_kind_mismatch(e in arb_expr()) {
        // Closed under an env where every variable is bound to a number.
        let tenv: TypeEnv = ["a", "b", "count", "_i", "total"]
            .into_iter()
            .map(|v| (String::from(v), Kind::Number))
            .collect();
        let venv: BTreeMap<String, Value> = tenv.keys().map(|k| (k.clone(), Value::Number(2.0))).collect();
        if let Ok(kind) = infer_kind(&e, &tenv) {
            match eval_expr(&e, &venv) {
                Ok(v) => prop_assert!(kind.accepts(v.kind()), "{} inferred {} got {:?}", e, kind, v),
                Err(EvalError::KindMismatch { .. }) => {
                    // only Any-typed subterms (indexing) may defer a mismatch to runtime
                    prop_assert!(has_index(&e), "{} mismatched at runtime", e);
                }
                Err(_) => {}
            }
        }
    }
}

fn has_index(e: &Expr) -> bool {
    match e {
        Expr::Index(..) => true,
        Expr::Lit(_) | Expr::Var(_) | Expr::Else => false,
        Expr::Unary(_, x) | Expr::Len(x) => has_index(x),
        Expr::Binary(_, a, b) => has_index(a) || has_index(b),
        Expr::List(items) => items.iter().any(has_index),
    }
}

#[test]
fn variables_are_collected() {
    let e = parse_expr("total + delta <= limit and len(xs) > 0").unwrap();
    let vars: Vec<&str> = e.variables();
    assert_eq!(vars, vec!["total", "delta", "limit", "xs"]);
}
