//! Pre-execution feasibility checks for programs and sketches.
//!
//! [`validate`] never stops at the first problem: every failure becomes an
//! [`Issue`] in the [`ValidationReport`], so a regeneration prompt can list
//! all of them at once.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::executor::ERROR_VAR;
use crate::expr::{infer_kind, is_identifier, Expr, TypeEnv, UnaryOp};
use crate::graph::check_reachability;
use crate::program::{FsmProgram, FsmSketch};
use crate::registry::Registry;
use crate::value::Kind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum IssueKind {
    Schema { message: String },
    UnknownFunction { state: String, owner: String, function: String },
    ArityMismatch { state: String, owner: String, function: String, expected: usize, got: usize },
    ArgumentType { state: String, call: String, message: String },
    BindKind { state: String, var: String, message: String },
    Unreachable { state: String },
    NoPathToTerminal { state: String },
    MissingTransition { state: String },
    GuardType { from: String, to: String, message: String },
    NonexhaustiveGuards { state: String },
    ShadowedTransitions { state: String },
    HardwareUnavailable { owner: String },
}

impl IssueKind {
    pub fn class(&self) -> &'static str {
        match self {
            IssueKind::Schema { .. } => "SchemaError",
            IssueKind::UnknownFunction { .. } => "UnknownFunction",
            IssueKind::ArityMismatch { .. } => "ArityMismatch",
            IssueKind::ArgumentType { .. } | IssueKind::BindKind { .. } | IssueKind::GuardType { .. } => "TypeError",
            IssueKind::Unreachable { .. } | IssueKind::NoPathToTerminal { .. } | IssueKind::MissingTransition { .. } => {
                "ReachabilityError"
            }
            IssueKind::NonexhaustiveGuards { .. } | IssueKind::ShadowedTransitions { .. } => "NonexhaustiveGuards",
            IssueKind::HardwareUnavailable { .. } => "HardwareUnavailable",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::Schema { message } => f.write_str(message),
            IssueKind::UnknownFunction { state, owner, function } => {
                write!(f, "state `{state}` calls unknown function {owner}.{function}")
            }
            IssueKind::ArityMismatch { state, owner, function, expected, got } => {
                write!(f, "state `{state}`: {owner}.{function} expects {expected} argument(s), got {got}")
            }
            IssueKind::ArgumentType { state, call, message } => write!(f, "state `{state}`, {call}: {message}"),
            IssueKind::BindKind { state, var, message } => write!(f, "state `{state}` binds `{var}`: {message}"),
            IssueKind::Unreachable { state } => write!(f, "state `{state}` is unreachable from the initial state"),
            IssueKind::NoPathToTerminal { state } => write!(f, "no terminal state is reachable from `{state}`"),
            IssueKind::MissingTransition { state } => write!(f, "non-terminal state `{state}` has no outgoing transition"),
            IssueKind::GuardType { from, to, message } => write!(f, "guard {from} -> {to}: {message}"),
            IssueKind::NonexhaustiveGuards { state } => {
                write!(f, "guards out of `{state}` may all be false; add an `else` transition")
            }
            IssueKind::ShadowedTransitions { state } => {
                write!(f, "transitions declared after `else` in `{state}` can never fire")
            }
            IssueKind::HardwareUnavailable { owner } => write!(f, "device `{owner}` does not respond"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    #[serde(flatten)]
    pub kind: IssueKind,
}

impl Issue {
    fn error(kind: IssueKind) -> Self {
        Issue { severity: Severity::Error, kind }
    }

    fn warning(kind: IssueKind) -> Self {
        Issue { severity: Severity::Warning, kind }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.class(), self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has(&self, class: &str) -> bool {
        self.errors().any(|i| i.kind.class() == class)
    }

    /// One `Class: message` line per error.
    pub fn describe_errors(&self) -> String {
        self.errors().map(ToString::to_string).collect::<Vec<_>>().join("\n")
    }
}

struct Names<'a> {
    index: BTreeMap<&'a str, usize>,
}

impl<'a> Names<'a> {
    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// Shared structural checks over state names, initial/terminals and
/// transition endpoints. Returns the name index when it is usable for graph
/// checks.
fn check_structure<'a>(
    states: &[&'a str],
    initial: &str,
    terminals: &[String],
    edges: &[(&str, &str)],
    issues: &mut Vec<Issue>,
) -> Option<Names<'a>> {
    let schema = |message: String| Issue::error(IssueKind::Schema { message });
    if states.is_empty() {
        issues.push(schema("program has no states".into()));
        return None;
    }
    let mut index = BTreeMap::new();
    for (i, name) in states.iter().enumerate() {
        if !is_identifier(name) {
            issues.push(schema(format!("state name `{name}` is not an identifier")));
        }
        if index.insert(*name, i).is_some() {
            issues.push(schema(format!("duplicate state `{name}`")));
        }
    }
    let names = Names { index };
    let mut usable = true;
    if names.get(initial).is_none() {
        issues.push(schema(format!("initial state `{initial}` is not declared")));
        usable = false;
    }
    if terminals.is_empty() {
        issues.push(schema("no terminal states".into()));
        usable = false;
    }
    for t in terminals {
        if names.get(t).is_none() {
            issues.push(schema(format!("terminal state `{t}` is not declared")));
            usable = false;
        }
    }
    for (from, to) in edges {
        for end in [from, to] {
            if names.get(end).is_none() {
                issues.push(schema(format!("transition {from} -> {to} names undeclared state `{end}`")));
                usable = false;
            }
        }
    }
    usable.then_some(names)
}

fn check_graph(
    states: &[&str],
    names: &Names<'_>,
    initial: &str,
    terminals: &[String],
    edges: &[(&str, &str)],
    issues: &mut Vec<Issue>,
) {
    let idx: Vec<(usize, usize)> = edges
        .iter()
        .filter_map(|(a, b)| Some((names.get(a)?, names.get(b)?)))
        .collect();
    let terms: Vec<usize> = terminals.iter().filter_map(|t| names.get(t)).collect();
    let Some(init) = names.get(initial) else { return };
    let found = check_reachability(states.len(), &idx, init, &terms);
    for s in found.unreachable {
        issues.push(Issue::error(IssueKind::Unreachable { state: states[s].into() }));
    }
    for s in found.dead_ends {
        issues.push(Issue::error(IssueKind::NoPathToTerminal { state: states[s].into() }));
    }
    for (i, name) in states.iter().enumerate() {
        if !terms.contains(&i) && !idx.iter().any(|&(a, _)| a == i) {
            issues.push(Issue::error(IssueKind::MissingTransition { state: (*name).into() }));
        }
    }
}

/// Structural checks on a stage sketch: declared endpoints, initial and
/// terminals, reachability, and an exit from every non-terminal stage.
pub fn check_sketch(sketch: &FsmSketch) -> ValidationReport {
    let mut issues = Vec::new();
    let states = sketch.state_names();
    let edges: Vec<(&str, &str)> = sketch
        .transitions
        .iter()
        .map(|t| (t.from.as_str(), t.to.as_str()))
        .collect();
    if let Some(names) = check_structure(&states, &sketch.initial, &sketch.terminals, &edges, &mut issues) {
        check_graph(&states, &names, &sketch.initial, &sketch.terminals, &edges, &mut issues);
    }
    ValidationReport { issues }
}

/// Whether the guards, in order, are certain to cover every environment.
fn exhaustive(guards: &[&Expr]) -> bool {
    if guards.iter().any(|g| g.is_trivially_true()) {
        return true;
    }
    for (i, a) in guards.iter().enumerate() {
        for b in &guards[i + 1..] {
            if complementary(a, b) || complementary(b, a) {
                return true;
            }
        }
    }
    false
}

fn complementary(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Binary(op, l1, r1), Expr::Binary(op2, l2, r2)) => {
            op.negated() == Some(*op2) && l1 == l2 && r1 == r2
        }
        (Expr::Unary(UnaryOp::Not, inner), other) => inner.as_ref() == other,
        _ => false,
    }
}

/// Kinds the program may rely on: its declared vars plus `_error`.
pub fn type_env(program: &FsmProgram) -> TypeEnv {
    let mut env = program.vars.clone();
    env.entry(ERROR_VAR.into()).or_insert(Kind::String);
    env
}

/// Check `program` against the registry and the current device state.
pub fn validate<C>(program: &FsmProgram, registry: &Registry<C>, ctx: &C) -> ValidationReport {
    let mut issues = Vec::new();
    let states: Vec<&str> = program.states.iter().map(|s| s.name.as_str()).collect();
    let edges: Vec<(&str, &str)> = program
        .transitions
        .iter()
        .map(|t| (t.from.as_str(), t.to.as_str()))
        .collect();
    if let Some(names) = check_structure(&states, &program.initial, &program.terminals, &edges, &mut issues) {
        check_graph(&states, &names, &program.initial, &program.terminals, &edges, &mut issues);
    }
    for name in program.vars.keys() {
        if !is_identifier(name) {
            issues.push(Issue::error(IssueKind::Schema {
                message: format!("variable name `{name}` is not an identifier"),
            }));
        }
    }

    let env = type_env(program);
    let mut owners = BTreeSet::new();
    for state in &program.states {
        for call in &state.actions {
            let label = format!("{}.{}", call.owner, call.function);
            let Some(d) = registry.descriptor(&call.owner, &call.function) else {
                issues.push(Issue::error(IssueKind::UnknownFunction {
                    state: state.name.clone(),
                    owner: call.owner.clone(),
                    function: call.function.clone(),
                }));
                continue;
            };
            owners.insert(call.owner.as_str());
            if d.params.len() != call.args.len() {
                issues.push(Issue::error(IssueKind::ArityMismatch {
                    state: state.name.clone(),
                    owner: call.owner.clone(),
                    function: call.function.clone(),
                    expected: d.params.len(),
                    got: call.args.len(),
                }));
            } else {
                for (param, arg) in d.params.iter().zip(&call.args) {
                    let message = match infer_kind(arg, &env) {
                        Ok(k) if param.kind.accepts(k) => continue,
                        Ok(k) if arg.is_else() => format!("`else` is not a value (parameter `{}`, {k})", param.name),
                        Ok(k) => format!("parameter `{}` expects {}, got {k}", param.name, param.kind),
                        Err(e) => format!("parameter `{}`: {e}", param.name),
                    };
                    issues.push(Issue::error(IssueKind::ArgumentType {
                        state: state.name.clone(),
                        call: label.clone(),
                        message,
                    }));
                }
            }
            if let Some(var) = &call.bind {
                let problem = match env.get(var) {
                    _ if !is_identifier(var) => Some(format!("`{var}` is not an identifier")),
                    None => Some("variable is not declared".to_string()),
                    Some(k) if k.unify(d.returns).is_none() => {
                        Some(format!("declared {k} but {label} returns {}", d.returns))
                    }
                    Some(_) => None,
                };
                if let Some(message) = problem {
                    issues.push(Issue::error(IssueKind::BindKind {
                        state: state.name.clone(),
                        var: var.clone(),
                        message,
                    }));
                }
            }
        }
    }

    for t in &program.transitions {
        let message = match infer_kind(&t.guard, &env) {
            Ok(Kind::Bool | Kind::Any) => continue,
            Ok(k) => format!("guard must be bool, got {k}"),
            Err(e) => e.to_string(),
        };
        issues.push(Issue::error(IssueKind::GuardType { from: t.from.clone(), to: t.to.clone(), message }));
    }

    for state in &program.states {
        if program.is_terminal(&state.name) {
            continue;
        }
        let guards: Vec<&Expr> = program.outgoing(&state.name).map(|t| &t.guard).collect();
        if guards.is_empty() {
            // already reported as MissingTransition
            continue;
        }
        if let Some(pos) = guards.iter().position(|g| g.is_else()) {
            if pos + 1 != guards.len() {
                issues.push(Issue::warning(IssueKind::ShadowedTransitions { state: state.name.clone() }));
            }
        } else if !exhaustive(&guards) {
            issues.push(Issue::error(IssueKind::NonexhaustiveGuards { state: state.name.clone() }));
        }
    }

    let alive = registry.ping_devices(ctx, owners.iter().copied());
    for (owner, up) in alive {
        if !up {
            issues.push(Issue::error(IssueKind::HardwareUnavailable { owner }));
        }
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::register_runtime_apis;
    use crate::expr::parse_expr;
    use crate::program::{ApiCall, ApiFunctionDescriptor, ProgramState, SketchState, SketchTransition, Transition};
    use crate::value::Value;
    use alloc::vec;

    fn registry() -> Registry<bool> {
        let mut r = Registry::new();
        register_runtime_apis(&mut r);
        r.register_api(
            ApiFunctionDescriptor::new("lamp", "level", &[("room", Kind::String)], Kind::Number),
            |_: &mut bool, _: &[Value]| Ok(Value::Number(3.0)),
        )
        .unwrap();
        r.register_liveness("lamp", |on: &bool| *on);
        r
    }

    fn program(actions: Vec<ApiCall>, transitions: &[(&str, &str, &str)]) -> FsmProgram {
        let mut vars = BTreeMap::new();
        vars.insert("level".to_string(), Kind::Number);
        FsmProgram {
            initial: "read".into(),
            terminals: vec!["bright".into(), "dim".into()],
            vars,
            states: vec![
                ProgramState { name: "read".into(), actions },
                ProgramState { name: "bright".into(), actions: vec![] },
                ProgramState { name: "dim".into(), actions: vec![] },
            ],
            transitions: transitions
                .iter()
                .map(|(a, b, g)| Transition { from: (*a).into(), to: (*b).into(), guard: parse_expr(g).unwrap() })
                .collect(),
        }
    }

    fn read() -> ApiCall {
        ApiCall::new("lamp", "level", vec![parse_expr("\"hall\"").unwrap()], Some("level"))
    }

    fn classes(r: &ValidationReport) -> Vec<&'static str> {
        r.errors().map(|i| i.kind.class()).collect()
    }

    #[test]
    fn well_formed_program_passes() {
        let p = program(vec![read()], &[("read", "bright", "level > 2"), ("read", "dim", "else")]);
        let r = validate(&p, &registry(), &true);
        assert!(r.is_valid(), "{}", r.describe_errors());
        assert_eq!(r.warnings().count(), 0);
    }

    #[test]
    fn complementary_comparisons_are_exhaustive() {
        let p = program(vec![read()], &[("read", "bright", "level > 2"), ("read", "dim", "level <= 2")]);
        assert!(validate(&p, &registry(), &true).is_valid());
        let p = program(vec![read()], &[("read", "bright", "level > 2"), ("read", "dim", "level < 2")]);
        assert_eq!(classes(&validate(&p, &registry(), &true)), vec!["NonexhaustiveGuards"]);
    }

    #[test]
    fn else_before_other_guards_is_a_warning() {
        let p = program(vec![read()], &[("read", "dim", "else"), ("read", "bright", "level > 2")]);
        let r = validate(&p, &registry(), &true);
        assert!(r.is_valid());
        assert_eq!(r.warnings().count(), 1);
    }

    #[test]
    fn reports_every_failure() {
        let bad_call = ApiCall::new("lamp", "teleport", vec![], None);
        let wrong_arity = ApiCall::new("lamp", "level", vec![], Some("level"));
        let wrong_kind = ApiCall::new("lamp", "level", vec![parse_expr("3").unwrap()], Some("level"));
        let p = program(
            vec![bad_call, wrong_arity, wrong_kind],
            &[("read", "bright", "missing > 2"), ("read", "dim", "else")],
        );
        let r = validate(&p, &registry(), &true);
        assert_eq!(classes(&r), vec!["UnknownFunction", "ArityMismatch", "TypeError", "TypeError"]);
    }

    #[test]
    fn unreachable_and_dead_end_states() {
        let mut p = program(vec![read()], &[("read", "bright", "true")]);
        p.states.push(ProgramState { name: "loop".into(), actions: vec![] });
        p.transitions.push(Transition { from: "loop".into(), to: "loop".into(), guard: Expr::lit(true) });
        let r = validate(&p, &registry(), &true);
        let c = classes(&r);
        assert!(c.iter().filter(|c| **c == "ReachabilityError").count() >= 3, "{c:?}");
        assert!(r.errors().any(|i| i.kind == IssueKind::NoPathToTerminal { state: "loop".into() }));
        assert!(r.errors().any(|i| i.kind == IssueKind::Unreachable { state: "dim".into() }));
    }

    #[test]
    fn powered_off_device_is_unavailable() {
        let p = program(vec![read()], &[("read", "bright", "true")]);
        let r = validate(&p, &registry(), &false);
        assert!(r.has("HardwareUnavailable"));
    }

    #[test]
    fn schema_errors_for_dangling_names() {
        let mut p = program(vec![read()], &[("read", "bright", "true"), ("read", "nowhere", "else")]);
        p.initial = "start".into();
        let r = validate(&p, &registry(), &true);
        assert!(r.has("SchemaError"));
        assert!(r.errors().filter(|i| i.kind.class() == "SchemaError").count() >= 2);
    }

    #[test]
    fn bind_kind_conflict() {
        let mut p = program(vec![read()], &[("read", "bright", "true")]);
        p.vars.insert("level".into(), Kind::List);
        assert!(validate(&p, &registry(), &true).has("TypeError"));
    }

    #[test]
    fn sketch_checks() {
        let sketch = FsmSketch {
            states: vec![
                SketchState { name: "a".into(), goal: "start".into() },
                SketchState { name: "b".into(), goal: "middle".into() },
                SketchState { name: "c".into(), goal: "end".into() },
            ],
            initial: "a".into(),
            terminals: vec!["c".into()],
            transitions: vec![SketchTransition { from: "a".into(), to: "b".into(), condition: "always".into() }],
        };
        let r = check_sketch(&sketch);
        assert!(r.errors().any(|i| i.kind == IssueKind::MissingTransition { state: "b".into() }));
        assert!(r.errors().any(|i| i.kind == IssueKind::Unreachable { state: "c".into() }));
    }

    #[test]
    fn issues_serialize_with_class_tag() {
        let issue = Issue::error(IssueKind::HardwareUnavailable { owner: "turtlebot".into() });
        let j = serde_json::to_value(&issue).unwrap();
        assert_eq!(j["class"], "hardware_unavailable");
        assert_eq!(j["severity"], "error");
    }
}
