//! Runs validated FSM programs against a [`Registry`].
//!
//! Semantics: starting at the initial state, execute the state's actions in
//! order (one step per API call, binds update the environment), then take
//! the first outgoing transition whose guard is true (one step per
//! transition). A terminal state with no true guard ends in success; a
//! non-terminal one is stuck. A handler error under the `terminate` policy
//! ends the run as terminated; under `fail_state` it aborts the rest of the
//! state, binds `_error`, and lets the state's guards decide.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::expr::{eval_expr, EvalError};
use crate::program::{ApiFunctionDescriptor, ErrorPolicy, FsmProgram};
use crate::registry::{ApiError, CallError, Registry};
use crate::value::{Kind, Value};

/// Variable bound to the last handler error message of a failed state.
pub const ERROR_VAR: &str = "_error";

/// Owner id of the built-in helpers every program may call.
pub const RUNTIME_OWNER: &str = "runtime";

pub const DEFAULT_BUDGET: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub budget: u64,
    /// Sleep each call's `expected_latency_ms` on the clock.
    pub simulate_latency: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { budget: DEFAULT_BUDGET, simulate_latency: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ExecError {
    Stuck { state: String },
    BudgetExceeded { budget: u64 },
    UnknownFunction { owner: String, function: String },
    ArityMismatch { owner: String, function: String, expected: usize, got: usize },
    KindMismatch { context: String, message: String },
    Eval { state: String, message: String },
    ApiFailure { owner: String, function: String, message: String },
    UnknownState { state: String },
}

impl ExecError {
    pub fn class(&self) -> &'static str {
        match self {
            ExecError::Stuck { .. } => "Stuck",
            ExecError::BudgetExceeded { .. } => "BudgetExceeded",
            ExecError::UnknownFunction { .. } => "UnknownFunction",
            ExecError::ArityMismatch { .. } => "ArityMismatch",
            ExecError::KindMismatch { .. } => "KindMismatch",
            ExecError::Eval { .. } => "EvalError",
            ExecError::ApiFailure { .. } => "ApiFailure",
            ExecError::UnknownState { .. } => "UnknownState",
        }
    }
}

impl core::fmt::Display for ExecError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ExecError::Stuck { state } => write!(f, "no transition out of non-terminal state `{state}`"),
            ExecError::BudgetExceeded { budget } => write!(f, "step budget of {budget} exhausted"),
            ExecError::UnknownFunction { owner, function } => write!(f, "unknown function {owner}.{function}"),
            ExecError::ArityMismatch { owner, function, expected, got } => {
                write!(f, "{owner}.{function} expects {expected} argument(s), got {got}")
            }
            ExecError::KindMismatch { context, message } => write!(f, "{context}: {message}"),
            ExecError::Eval { state, message } => write!(f, "in state `{state}`: {message}"),
            ExecError::ApiFailure { owner, function, message } => write!(f, "{owner}.{function} failed: {message}"),
            ExecError::UnknownState { state } => write!(f, "unknown state `{state}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionStatus {
    Success,
    Terminated { reason: String },
    Failed { error: ExecError },
}

impl ExecutionStatus {
    pub fn is_success(&self) -> bool {
        matches!(self, ExecutionStatus::Success)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Debug,
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub level: LogLevel,
    pub source: String,
    pub message: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    #[serde(flatten)]
    pub status: ExecutionStatus,
    pub visited_states: Vec<String>,
    /// Final bindings, excluding `_`-prefixed scratch variables.
    pub outputs: BTreeMap<String, Value>,
    pub logs: Vec<LogEntry>,
    pub steps_used: u64,
    pub wall_time_ms: u64,
}

impl ExecutionReport {
    pub fn api_calls(&self) -> usize {
        self.logs.len()
    }
}

struct Run<'a, C> {
    registry: &'a Registry<C>,
    clock: &'a dyn Clock,
    options: RunOptions,
    env: BTreeMap<String, Value>,
    visited: Vec<String>,
    logs: Vec<LogEntry>,
    steps: u64,
}

enum ActionOutcome {
    Done,
    StateFailed(ExecError),
    Stop(ExecutionStatus),
}

impl<C> Run<'_, C> {
    fn take_step(&mut self) -> Result<(), ExecutionStatus> {
        if self.steps >= self.options.budget {
            return Err(ExecutionStatus::Failed {
                error: ExecError::BudgetExceeded { budget: self.options.budget },
            });
        }
        self.steps += 1;
        Ok(())
    }

    fn run_actions(&mut self, program: &FsmProgram, state: &str, ctx: &mut C) -> ActionOutcome {
        let Some(st) = program.state(state) else {
            return ActionOutcome::Stop(ExecutionStatus::Failed {
                error: ExecError::UnknownState { state: state.into() },
            });
        };
        for call in &st.actions {
            if let Err(status) = self.take_step() {
                return ActionOutcome::Stop(status);
            }
            let args = match call
                .args
                .iter()
                .map(|a| eval_expr(a, &self.env))
                .collect::<Result<Vec<_>, EvalError>>()
            {
                Ok(args) => args,
                Err(e) => {
                    return ActionOutcome::Stop(ExecutionStatus::Failed {
                        error: ExecError::Eval { state: state.into(), message: e.to_string() },
                    })
                }
            };
            let descriptor = self.registry.descriptor(&call.owner, &call.function);
            let started = self.clock.now_ms();
            if self.options.simulate_latency {
                if let Some(d) = descriptor {
                    self.clock.sleep_ms(d.expected_latency_ms);
                }
            }
            let result = self.registry.call_api(ctx, &call.owner, &call.function, &args);
            let latency_ms = self.clock.now_ms().saturating_sub(started);
            match result {
                Ok(value) => {
                    self.logs.push(LogEntry {
                        level: if call.owner == RUNTIME_OWNER { LogLevel::Debug } else { LogLevel::Info },
                        source: call.owner.clone(),
                        message: alloc::format!("{}.{} ok", call.owner, call.function),
                        latency_ms,
                        payload: Some(value.clone()),
                    });
                    if let Some(var) = &call.bind {
                        self.env.insert(var.clone(), value);
                    }
                }
                Err(CallError::Handler { error, .. }) => {
                    let policy = descriptor.map_or(ErrorPolicy::FailState, |d| d.on_error);
                    self.logs.push(LogEntry {
                        level: match policy {
                            ErrorPolicy::Terminate => LogLevel::Warn,
                            ErrorPolicy::FailState => LogLevel::Error,
                        },
                        source: call.owner.clone(),
                        message: alloc::format!("{}.{} failed: {}", call.owner, call.function, error.message),
                        latency_ms,
                        payload: None,
                    });
                    return match policy {
                        ErrorPolicy::Terminate => {
                            ActionOutcome::Stop(ExecutionStatus::Terminated { reason: error.message })
                        }
                        ErrorPolicy::FailState => {
                            self.env.insert(ERROR_VAR.into(), Value::String(error.message.clone()));
                            ActionOutcome::StateFailed(ExecError::ApiFailure {
                                owner: call.owner.clone(),
                                function: call.function.clone(),
                                message: error.message,
                            })
                        }
                    };
                }
                Err(other) => {
                    self.logs.push(LogEntry {
                        level: LogLevel::Error,
                        source: "executor".into(),
                        message: other.to_string(),
                        latency_ms,
                        payload: None,
                    });
                    let error = match other {
                        CallError::UnknownFunction { owner, function } => ExecError::UnknownFunction { owner, function },
                        CallError::ArityMismatch { owner, function, expected, got } => {
                            ExecError::ArityMismatch { owner, function, expected, got }
                        }
                        other => ExecError::KindMismatch {
                            context: alloc::format!("{}.{}", call.owner, call.function),
                            message: other.to_string(),
                        },
                    };
                    return ActionOutcome::Stop(ExecutionStatus::Failed { error });
                }
            }
        }
        ActionOutcome::Done
    }

    fn choose<'p>(&self, program: &'p FsmProgram, state: &'p str) -> Result<Option<&'p str>, ExecutionStatus> {
        for t in program.outgoing(state) {
            match eval_expr(&t.guard, &self.env) {
                Ok(Value::Bool(true)) => return Ok(Some(&t.to)),
                Ok(Value::Bool(false)) => {}
                Ok(other) => {
                    return Err(ExecutionStatus::Failed {
                        error: ExecError::KindMismatch {
                            context: alloc::format!("guard {} -> {}", t.from, t.to),
                            message: alloc::format!("expected bool, got {}", other.kind()),
                        },
                    })
                }
                Err(e) => {
                    return Err(ExecutionStatus::Failed {
                        error: ExecError::Eval { state: state.into(), message: e.to_string() },
                    })
                }
            }
        }
        Ok(None)
    }
}

/// Execute `program` from its initial state. Never panics on bad programs:
/// every failure becomes an [`ExecutionStatus`].
pub fn run<C>(
    program: &FsmProgram,
    registry: &Registry<C>,
    ctx: &mut C,
    options: RunOptions,
    clock: &dyn Clock,
) -> ExecutionReport {
    let started = clock.now_ms();
    let mut run = Run {
        registry,
        clock,
        options,
        env: BTreeMap::new(),
        visited: Vec::new(),
        logs: Vec::new(),
        steps: 0,
    };
    let mut state = program.initial.clone();
    run.visited.push(state.clone());
    let status = loop {
        let failure = match run.run_actions(program, &state, ctx) {
            ActionOutcome::Done => None,
            ActionOutcome::StateFailed(e) => Some(e),
            ActionOutcome::Stop(status) => break status,
        };
        let next = match run.choose(program, &state) {
            Ok(next) => next,
            Err(status) => break status,
        };
        let Some(next) = next else {
            break match failure {
                Some(error) => ExecutionStatus::Failed { error },
                None if program.is_terminal(&state) => ExecutionStatus::Success,
                None => ExecutionStatus::Failed { error: ExecError::Stuck { state } },
            };
        };
        if let Err(status) = run.take_step() {
            break status;
        }
        state = next.to_string();
        run.visited.push(state.clone());
    };
    let outputs = run
        .env
        .into_iter()
        .filter(|(k, _)| !k.starts_with('_'))
        .collect();
    ExecutionReport {
        status,
        visited_states: run.visited,
        outputs,
        logs: run.logs,
        steps_used: run.steps,
        wall_time_ms: clock.now_ms().saturating_sub(started),
    }
}

/// Descriptors of the built-in `runtime` helpers.
pub fn runtime_descriptors() -> Vec<ApiFunctionDescriptor> {
    alloc::vec![
        ApiFunctionDescriptor::new(RUNTIME_OWNER, "set", &[("value", Kind::Any)], Kind::Any)
            .describe("Return the value unchanged; bind it to store a computed expression."),
        ApiFunctionDescriptor::new(RUNTIME_OWNER, "append", &[("list", Kind::List), ("item", Kind::Any)], Kind::List)
            .describe("Return a copy of the list with the item appended."),
        ApiFunctionDescriptor::new(RUNTIME_OWNER, "terminate", &[("reason", Kind::String)], Kind::Null)
            .describe("Stop the program; the reason is reported to the user.")
            .terminating(),
    ]
}

/// Register the `runtime` helpers on any registry.
pub fn register_runtime_apis<C: 'static>(registry: &mut Registry<C>) {
    for d in runtime_descriptors() {
        let result = match d.name.as_str() {
            "set" => registry.register_api(d, |_: &mut C, args: &[Value]| Ok(args[0].clone())),
            "append" => registry.register_api(d, |_: &mut C, args: &[Value]| {
                let mut items = args[0].as_list().map(<[Value]>::to_vec).unwrap_or_default();
                items.push(args[1].clone());
                Ok(Value::List(items))
            }),
            _ => registry.register_api(d, |_: &mut C, args: &[Value]| {
                Err(ApiError::new(args[0].as_str().unwrap_or("terminated")))
            }),
        };
        // runtime helpers are registered once per registry
        result.expect("runtime helpers registered twice");
    }
}

#[cfg(test)]
mod tests;
