//! Language to program transformation: enrichment, stage sketch, per-stage
//! operations, transition guards and the final merge.
//!
//! Every provider reply that must be structured is JSON. Replies may wrap it
//! in a code fence or surround it with prose; [`extract_json`] finds it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::RUNTIME_OWNER;
use crate::expr::{infer_kind, parse_expr, Expr, TypeEnv};
use crate::llm::{fit_to_budget, CompletionRequest, PromptConfig, PromptMessage, Provider, ProviderError, Purpose};
use crate::memory::{render_api_docs, ContextSnapshot, ResultEntry};
use crate::program::{ApiCall, ApiFunctionDescriptor, FsmProgram, FsmSketch, ProgramState, Transition};
use crate::validate::{check_sketch, ValidationReport};
use crate::value::Kind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedTask {
    pub original: String,
    pub enriched: String,
    pub referenced_devices: Vec<String>,
    pub referenced_modules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{stage} reply is not valid JSON: {message}")]
    Parse { stage: &'static str, message: String },
    #[error("{0}")]
    Structure(String),
    #[error("stage `{state}` calls unknown function {owner}.{function}")]
    UnknownFunction { state: String, owner: String, function: String },
    #[error("stage `{state}`: {owner}.{function} expects {expected} argument(s), got {got}")]
    ArityMismatch { state: String, owner: String, function: String, expected: usize, got: usize },
    #[error("{context}: {message}")]
    ExprParse { context: String, message: String },
    #[error("{0}")]
    Type(String),
    #[error("{}", .0.describe_errors())]
    Invalid(ValidationReport),
}

impl PipelineError {
    pub fn class(&self) -> &str {
        match self {
            PipelineError::Provider(_) => "ProviderError",
            PipelineError::Parse { .. } => "ParseError",
            PipelineError::Structure(_) => "StructureError",
            PipelineError::UnknownFunction { .. } => "UnknownFunction",
            PipelineError::ArityMismatch { .. } => "ArityMismatch",
            PipelineError::ExprParse { .. } => "ExprParseError",
            PipelineError::Type(_) => "TypeError",
            PipelineError::Invalid(r) => r.errors().next().map_or("ValidationError", |i| i.kind.class()),
        }
    }

    /// Whether another generation attempt may fix it.
    pub fn is_retryable(&self) -> bool {
        match self {
            PipelineError::Provider(e) => e.is_retryable(),
            _ => true,
        }
    }
}

/// Everything a generation request is built from.
#[derive(Debug, Clone, Copy)]
pub struct GenContext<'a> {
    pub prompts: &'a PromptConfig,
    pub user_name: &'a str,
    pub context: &'a ContextSnapshot,
    /// The summarized instruction.
    pub task: &'a str,
    /// 0 for the first attempt.
    pub attempt: u32,
    pub max_retries: u32,
    /// `Class: message` of the previous failed attempt.
    pub last_error: Option<&'a str>,
}

impl<'a> GenContext<'a> {
    pub fn new(prompts: &'a PromptConfig, user_name: &'a str, context: &'a ContextSnapshot, task: &'a str) -> Self {
        GenContext { prompts, user_name, context, task, attempt: 0, max_retries: 3, last_error: None }
    }

    fn request(&self, purpose: Purpose, instruction: String) -> CompletionRequest {
        let mut messages = self.prompts.preamble(self.user_name);
        let head = messages.len();
        messages.push(PromptMessage::coordinator(format!(
            "Environment information:\n{}",
            self.context.environment.render()
        )));
        messages.push(PromptMessage::coordinator(format!(
            "API functions available to programs:\n{}",
            render_api_docs(&self.context.api_docs)
        )));
        for entry in &self.context.exec_results {
            if matches!(entry, ResultEntry::Error { task, .. } if task == self.task) {
                messages.push(PromptMessage::coordinator(entry.render()));
            }
        }
        let mut text = format!("Task: {}\n{instruction}", self.task);
        if self.attempt > 0 {
            let _ = write!(
                text,
                "\nRetry {} of {}: the previous attempt failed with {}. Fix the problem and answer again.",
                self.attempt,
                self.max_retries,
                self.last_error.unwrap_or("an unknown error")
            );
        }
        messages.push(PromptMessage::coordinator(text));
        if let Some(budget) = self.prompts.char_budget {
            fit_to_budget(&mut messages, head, 1, budget);
        }
        CompletionRequest::new(purpose, messages)
    }

    fn api(&self, owner: &str, function: &str) -> Option<&'a ApiFunctionDescriptor> {
        self.context.api_docs.iter().find(|d| d.owner == owner && d.name == function)
    }
}

/// The JSON object inside a reply: a fenced block if present, otherwise the
/// span from the first `{` to the last `}`.
pub fn extract_json(text: &str) -> Option<&str> {
    if let Some(start) = text.find("```") {
        let rest = &text[start + 3..];
        let body_start = rest.find('\n').map_or(0, |i| i + 1);
        let body = &rest[body_start..];
        let end = body.find("```").unwrap_or(body.len());
        let block = body[..end].trim();
        if block.starts_with('{') {
            return Some(block);
        }
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn parse_reply<T: serde::de::DeserializeOwned>(stage: &'static str, reply: &str) -> Result<T, PipelineError> {
    let json = extract_json(reply).ok_or_else(|| PipelineError::Parse { stage, message: "no JSON object found".into() })?;
    serde_json::from_str(json).map_err(|e| PipelineError::Parse { stage, message: e.to_string() })
}

fn contains_word(haystack: &str, word: &str) -> bool {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    haystack.match_indices(word).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + word.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

/// Phase one: ask for a concrete plan and note which known devices and
/// modules it names. Unknown names are simply not referenced.
pub fn enrich(provider: &dyn Provider, ctx: &GenContext<'_>) -> Result<EnrichedTask, PipelineError> {
    let request = ctx.request(
        Purpose::Enrich,
        "Rewrite the task as a short plan for your assistants. Name the devices and AI modules you would use by id, with their locations."
            .into(),
    );
    let enriched = provider.complete(&request)?.trim().to_string();
    let env = &ctx.context.environment;
    let mentioned = |id: &str| contains_word(&enriched, id) || contains_word(ctx.task, id);
    Ok(EnrichedTask {
        original: ctx.task.into(),
        referenced_devices: env.devices.iter().map(|d| d.id.clone()).filter(|id| mentioned(id)).collect(),
        referenced_modules: env.modules.iter().map(|m| m.id.clone()).filter(|id| mentioned(id)).collect(),
        enriched,
    })
}

/// Phase two: stage sketch.
pub fn derive_fsm(provider: &dyn Provider, ctx: &GenContext<'_>, task: &EnrichedTask) -> Result<FsmSketch, PipelineError> {
    let request = ctx.request(
        Purpose::FsmDerive,
        format!(
            "Plan: {}\nBreak the task into the stages of a finite-state machine. Reply with JSON only, in the form \
             {{\"states\": [{{\"name\": \"...\", \"goal\": \"...\"}}], \"initial\": \"...\", \"terminals\": [\"...\"], \
             \"transitions\": [{{\"from\": \"...\", \"to\": \"...\", \"condition\": \"...\"}}]}}. Stage names must be identifiers.",
            task.enriched
        ),
    );
    let sketch: FsmSketch = parse_reply("sketch", &provider.complete(&request)?)?;
    let report = check_sketch(&sketch);
    if !report.is_valid() {
        return Err(PipelineError::Structure(report.describe_errors()));
    }
    Ok(sketch)
}

#[derive(Deserialize)]
struct ActionsReply {
    actions: Vec<RawAction>,
}

#[derive(Deserialize)]
struct RawAction {
    owner: String,
    #[serde(rename = "fn")]
    function: String,
    #[serde(default)]
    args: Vec<serde_json::Value>,
    #[serde(default)]
    bind: Option<String>,
}

/// Arguments arrive as expression text or expression JSON.
fn parse_arg(context: &str, arg: &serde_json::Value) -> Result<Expr, PipelineError> {
    let parsed = match arg {
        serde_json::Value::String(src) => parse_expr(src).map_err(|e| e.to_string()),
        other => Expr::from_json(other),
    };
    parsed.map_err(|message| PipelineError::ExprParse { context: context.into(), message })
}

pub type StageOps = BTreeMap<String, Vec<ApiCall>>;

/// Phase three, first sub-phase: the API calls of every stage, one request
/// per stage, resolved against the documented functions.
pub fn generate_stage_ops(provider: &dyn Provider, ctx: &GenContext<'_>, sketch: &FsmSketch) -> Result<StageOps, PipelineError> {
    let overview = sketch
        .states
        .iter()
        .map(|s| format!("{} ({})", s.name, s.goal))
        .collect::<Vec<_>>()
        .join("; ");
    let mut ops = StageOps::new();
    for state in &sketch.states {
        let request = ctx.request(
            Purpose::StageOps,
            format!(
                "Stage: {}\nGoal: {}\nAll stages: {overview}\nWrite the API calls for this stage only. Reply with JSON only, in the form \
                 {{\"actions\": [{{\"owner\": \"...\", \"fn\": \"...\", \"args\": [\"<expression>\"], \"bind\": \"<variable>\"}}]}}. \
                 Arguments are expressions over variables bound by earlier calls; variables starting with _ are scratch and not reported.",
                state.name, state.goal
            ),
        );
        let reply: ActionsReply = parse_reply("stage operations", &provider.complete(&request)?)?;
        let mut calls = Vec::with_capacity(reply.actions.len());
        for raw in reply.actions {
            let d = ctx.api(&raw.owner, &raw.function).ok_or_else(|| PipelineError::UnknownFunction {
                state: state.name.clone(),
                owner: raw.owner.clone(),
                function: raw.function.clone(),
            })?;
            if d.params.len() != raw.args.len() {
                return Err(PipelineError::ArityMismatch {
                    state: state.name.clone(),
                    owner: raw.owner,
                    function: raw.function,
                    expected: d.params.len(),
                    got: raw.args.len(),
                });
            }
            let label = format!("stage `{}`, {}.{}", state.name, raw.owner, raw.function);
            let args = raw.args.iter().map(|a| parse_arg(&label, a)).collect::<Result<Vec<_>, _>>()?;
            calls.push(ApiCall { owner: raw.owner, function: raw.function, args, bind: raw.bind });
        }
        ops.insert(state.name.clone(), calls);
    }
    Ok(ops)
}

/// Kinds of all bound variables, from return kinds (and, for
/// `runtime.set`, the kind of the stored expression).
pub fn infer_vars(sketch: &FsmSketch, ops: &StageOps, api_docs: &[ApiFunctionDescriptor]) -> Result<TypeEnv, PipelineError> {
    let mut vars = TypeEnv::new();
    for state in &sketch.states {
        for call in ops.get(&state.name).into_iter().flatten() {
            let Some(var) = &call.bind else { continue };
            let returns = api_docs
                .iter()
                .find(|d| d.owner == call.owner && d.name == call.function)
                .map_or(Kind::Any, |d| d.returns);
            let kind = if call.owner == RUNTIME_OWNER && call.function == "set" {
                call.args.first().and_then(|a| infer_kind(a, &vars).ok()).unwrap_or(Kind::Any)
            } else {
                returns
            };
            let merged = match vars.get(var) {
                Some(prev) => prev.unify(kind).ok_or_else(|| {
                    PipelineError::Type(format!(
                        "variable `{var}` is bound to both {prev} and {kind} (stage `{}`)",
                        state.name
                    ))
                })?,
                None => kind,
            };
            vars.insert(var.clone(), merged);
        }
    }
    Ok(vars)
}

#[derive(Deserialize)]
struct TransitionsReply {
    transitions: Vec<RawTransition>,
}

#[derive(Deserialize)]
struct RawTransition {
    from: String,
    to: String,
    guard: serde_json::Value,
}

/// Phase three, second sub-phase: one guard per sketch transition, parsed
/// and type-checked. The result follows the sketch's transition order.
pub fn generate_transitions(
    provider: &dyn Provider,
    ctx: &GenContext<'_>,
    sketch: &FsmSketch,
    vars: &TypeEnv,
) -> Result<Vec<Transition>, PipelineError> {
    let mut listing = String::from("Variables:");
    for (name, kind) in vars {
        let _ = write!(listing, " {name} ({kind});");
    }
    listing.push_str("\nConditions:");
    for t in &sketch.transitions {
        let _ = write!(listing, "\n- {} -> {}: {}", t.from, t.to, t.condition);
    }
    let request = ctx.request(
        Purpose::Transitions,
        format!(
            "{listing}\nWrite one guard expression per transition. Guards may use literals, variables, len(x), x[i], \
             + - * /, comparisons, and, or, not, in, and else for the remaining case. Examples: len(items) > 0; \
             total + delta <= 100; else. Reply with JSON only, in the form {{\"transitions\": [{{\"from\": \"...\", \
             \"to\": \"...\", \"guard\": \"<expression>\"}}]}}."
        ),
    );
    let reply: TransitionsReply = parse_reply("transitions", &provider.complete(&request)?)?;
    let mut guards: Vec<Option<RawTransition>> = reply.transitions.into_iter().map(Some).collect();
    let mut env = vars.clone();
    env.entry(crate::executor::ERROR_VAR.into()).or_insert(Kind::String);
    let mut out = Vec::with_capacity(sketch.transitions.len());
    for t in &sketch.transitions {
        let raw = guards
            .iter_mut()
            .find(|g| g.as_ref().is_some_and(|g| g.from == t.from && g.to == t.to))
            .and_then(Option::take)
            .ok_or_else(|| PipelineError::Structure(format!("no guard for transition {} -> {}", t.from, t.to)))?;
        let context = format!("guard {} -> {}", t.from, t.to);
        let guard = parse_arg(&context, &raw.guard)?;
        match infer_kind(&guard, &env) {
            Ok(Kind::Bool | Kind::Any) => {}
            Ok(k) => return Err(PipelineError::Type(format!("{context} must be bool, got {k}"))),
            Err(e) => return Err(PipelineError::Type(format!("{context}: {e}"))),
        }
        out.push(Transition { from: t.from.clone(), to: t.to.clone(), guard });
    }
    if let Some(extra) = guards.into_iter().flatten().next() {
        return Err(PipelineError::Structure(format!(
            "transition {} -> {} is not in the stage plan",
            extra.from, extra.to
        )));
    }
    Ok(out)
}

/// Phase three, final sub-phase: deterministic merge.
pub fn assemble_program(
    sketch: &FsmSketch,
    ops: &StageOps,
    transitions: Vec<Transition>,
    api_docs: &[ApiFunctionDescriptor],
) -> Result<FsmProgram, PipelineError> {
    let vars = infer_vars(sketch, ops, api_docs)?;
    Ok(FsmProgram {
        initial: sketch.initial.clone(),
        terminals: sketch.terminals.clone(),
        vars,
        states: sketch
            .states
            .iter()
            .map(|s| ProgramState { name: s.name.clone(), actions: ops.get(&s.name).cloned().unwrap_or_default() })
            .collect(),
        transitions,
    })
}

/// Provider-assisted merge: the model returns the whole program, which must
/// keep the sketch's structure.
pub fn assemble_with_provider(
    provider: &dyn Provider,
    ctx: &GenContext<'_>,
    sketch: &FsmSketch,
    draft: &FsmProgram,
) -> Result<FsmProgram, PipelineError> {
    let request = ctx.request(
        Purpose::Assemble,
        format!(
            "Merge the stage operations and transitions into one program. Draft:\n{}\nReply with the final program JSON only.",
            draft.to_json_string()
        ),
    );
    let program: FsmProgram = parse_reply("program", &provider.complete(&request)?)?;
    if !preserves_structure(sketch, &program) {
        return Err(PipelineError::Structure("assembled program does not match the stage plan".into()));
    }
    Ok(program)
}

/// State names, initial, terminals and transition endpoints agree.
pub fn preserves_structure(sketch: &FsmSketch, program: &FsmProgram) -> bool {
    sketch.initial == program.initial
        && sketch.terminals == program.terminals
        && sketch.states.iter().map(|s| &s.name).eq(program.states.iter().map(|s| &s.name))
        && sketch
            .transitions
            .iter()
            .map(|t| (&t.from, &t.to))
            .eq(program.transitions.iter().map(|t| (&t.from, &t.to)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sketch: FsmSketch,
    pub program: FsmProgram,
}

/// Phases two and three for an already enriched task.
pub fn generate(provider: &dyn Provider, ctx: &GenContext<'_>, task: &EnrichedTask) -> Result<Generated, PipelineError> {
    let sketch = derive_fsm(provider, ctx, task)?;
    let ops = generate_stage_ops(provider, ctx, &sketch)?;
    let vars = infer_vars(&sketch, &ops, &ctx.context.api_docs)?;
    let transitions = generate_transitions(provider, ctx, &sketch, &vars)?;
    let program = assemble_program(&sketch, &ops, transitions, &ctx.context.api_docs)?;
    Ok(Generated { sketch, program })
}

#[cfg(test)]
mod tests;
