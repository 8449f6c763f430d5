use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::clock::ManualClock;
use crate::expr::parse_expr;
use crate::program::{ApiCall, ProgramState, Transition};

/// Counter device: `counter.bump()` increments, `counter.fail()` errors
/// (fail_state), `counter.halt()` errors (terminate).
fn registry() -> Registry<u32> {
    let mut r = Registry::new();
    register_runtime_apis(&mut r);
    r.register_api(
        ApiFunctionDescriptor::new("counter", "bump", &[], Kind::Number).latency(40),
        |c: &mut u32, _: &[Value]| {
            *c += 1;
            Ok(Value::Number(*c as f64))
        },
    )
    .unwrap();
    r.register_api(ApiFunctionDescriptor::new("counter", "fail", &[], Kind::Null), |_: &mut u32, _: &[Value]| {
        Err(ApiError::new("sensor offline"))
    })
    .unwrap();
    r.register_api(
        ApiFunctionDescriptor::new("counter", "halt", &[], Kind::Null).terminating(),
        |_: &mut u32, _: &[Value]| Err(ApiError::new("limit reached")),
    )
    .unwrap();
    r
}

fn call(owner: &str, f: &str, args: &[&str], bind: Option<&str>) -> ApiCall {
    ApiCall::new(owner, f, args.iter().map(|a| parse_expr(a).unwrap()).collect(), bind)
}

fn program(states: Vec<(&str, Vec<ApiCall>)>, transitions: &[(&str, &str, &str)], terminals: &[&str]) -> FsmProgram {
    FsmProgram {
        initial: states[0].0.into(),
        terminals: terminals.iter().map(|t| String::from(*t)).collect(),
        vars: BTreeMap::new(),
        states: states
            .into_iter()
            .map(|(name, actions)| ProgramState { name: name.into(), actions })
            .collect(),
        transitions: transitions
            .iter()
            .map(|(a, b, g)| Transition { from: (*a).into(), to: (*b).into(), guard: parse_expr(g).unwrap() })
            .collect(),
    }
}

fn exec(p: &FsmProgram, budget: u64) -> (ExecutionReport, u32) {
    let r = registry();
    let mut ctx = 0u32;
    let clock = ManualClock::new(0);
    let report = run(p, &r, &mut ctx, RunOptions { budget, simulate_latency: false }, &clock);
    (report, ctx)
}

#[test]
fn always_true_loop_exhausts_budget() {
    let p = program(vec![("a", vec![]), ("b", vec![])], &[("a", "b", "true"), ("b", "a", "true")], &["b"]);
    let (report, _) = exec(&p, DEFAULT_BUDGET);
    assert_eq!(
        report.status,
        ExecutionStatus::Failed { error: ExecError::BudgetExceeded { budget: 1000 } }
    );
    assert_eq!(report.steps_used, 1000);
    assert_eq!(report.visited_states.len(), 1001);
}

#[test]
fn steps_count_calls_plus_transitions() {
    let p = program(
        vec![
            ("start", vec![call("counter", "bump", &[], Some("n")), call("counter", "bump", &[], Some("n"))]),
            ("loop", vec![call("counter", "bump", &[], Some("n"))]),
            ("done", vec![]),
        ],
        &[("start", "loop", "true"), ("loop", "loop", "n < 5"), ("loop", "done", "else")],
        &["done"],
    );
    let (report, ctx) = exec(&p, 1000);
    assert_eq!(report.status, ExecutionStatus::Success);
    // calls: 2 + 3 (n = 3, 4, 5); transitions: start->loop, loop->loop x2, loop->done
    assert_eq!(ctx, 5);
    assert_eq!(report.steps_used, 5 + 4);
    assert_eq!(report.api_calls(), 5);
    assert_eq!(report.visited_states, vec!["start", "loop", "loop", "loop", "done"]);
    assert_eq!(report.outputs.get("n"), Some(&Value::Number(5.0)));
}

#[test]
fn first_true_guard_wins() {
    let two = |first: &str, second: &str| {
        program(
            vec![("s", vec![call("counter", "bump", &[], Some("n"))]), ("x", vec![]), ("y", vec![])],
            &[("s", first, "n > 0"), ("s", second, "n >= 1")],
            &["x", "y"],
        )
    };
    let (a, _) = exec(&two("x", "y"), 100);
    let (b, _) = exec(&two("y", "x"), 100);
    assert_eq!(a.visited_states.last().map(String::as_str), Some("x"));
    assert_eq!(b.visited_states.last().map(String::as_str), Some("y"));
}

#[test]
fn stuck_in_non_terminal() {
    let p = program(vec![("s", vec![]), ("t", vec![])], &[("s", "t", "false")], &["t"]);
    let (report, _) = exec(&p, 100);
    assert_eq!(report.status, ExecutionStatus::Failed { error: ExecError::Stuck { state: "s".into() } });
}

#[test]
fn terminate_policy_ends_run() {
    let p = program(
        vec![("s", vec![call("counter", "halt", &[], None), call("counter", "bump", &[], None)])],
        &[],
        &["s"],
    );
    let (report, ctx) = exec(&p, 100);
    assert_eq!(report.status, ExecutionStatus::Terminated { reason: "limit reached".into() });
    assert_eq!(ctx, 0, "actions after a terminating error do not run");
    assert_eq!(report.logs.len(), 1);
}

#[test]
fn runtime_terminate_carries_reason() {
    let p = program(vec![("s", vec![call("runtime", "terminate", &["\"over 100\""], None)])], &[], &["s"]);
    let (report, _) = exec(&p, 100);
    assert_eq!(report.status, ExecutionStatus::Terminated { reason: "over 100".into() });
}

#[test]
fn failed_state_lets_guards_recover() {
    let p = program(
        vec![
            ("s", vec![call("counter", "fail", &[], None), call("counter", "bump", &[], None)]),
            ("recover", vec![call("counter", "bump", &[], None)]),
        ],
        &[("s", "recover", "_error != \"\"")],
        &["recover"],
    );
    let (report, ctx) = exec(&p, 100);
    assert_eq!(report.status, ExecutionStatus::Success);
    assert_eq!(ctx, 1);
    assert_eq!(report.logs[0].level, LogLevel::Error);
}

#[test]
fn failed_state_without_recovery_is_reported() {
    let p = program(vec![("s", vec![call("counter", "fail", &[], None)])], &[], &["s"]);
    let (report, _) = exec(&p, 100);
    assert!(matches!(
        report.status,
        ExecutionStatus::Failed { error: ExecError::ApiFailure { .. } }
    ));
}

#[test]
fn unknown_function_is_a_failed_status() {
    let p = program(vec![("s", vec![call("counter", "teleport", &[], None)])], &[], &["s"]);
    let (report, _) = exec(&p, 100);
    assert_eq!(report.status.clone(), ExecutionStatus::Failed {
        error: ExecError::UnknownFunction { owner: "counter".into(), function: "teleport".into() }
    });
}

#[test]
fn latency_simulation_advances_virtual_clock() {
    let p = program(
        vec![("s", vec![call("counter", "bump", &[], None), call("counter", "bump", &[], None)])],
        &[],
        &["s"],
    );
    let r = registry();
    let clock = ManualClock::new(1_000);
    let report = run(&p, &r, &mut 0u32, RunOptions { budget: 10, simulate_latency: true }, &clock);
    assert_eq!(report.wall_time_ms, 80);
    assert!(report.logs.iter().all(|l| l.latency_ms == 40));
}

#[test]
fn scratch_variables_are_not_outputs() {
    let p = program(
        vec![("s", vec![call("runtime", "set", &["1"], Some("_tmp")), call("runtime", "set", &["_tmp + 1"], Some("out"))])],
        &[],
        &["s"],
    );
    let (report, _) = exec(&p, 100);
    assert_eq!(report.outputs.keys().collect::<Vec<_>>(), vec!["out"]);
}

#[test]
fn report_serializes_with_flat_status() {
    let p = program(vec![("s", vec![])], &[], &["s"]);
    let (report, _) = exec(&p, 100);
    let j = serde_json::to_value(&report).unwrap();
    assert_eq!(j["status"], "success");
    let back: ExecutionReport = serde_json::from_value(j).unwrap();
    assert_eq!(back, report);
}
