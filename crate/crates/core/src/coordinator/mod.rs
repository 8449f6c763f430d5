//! The workflow engine: chat reply, assistance probe, summary, cache lookup,
//! generation with retries, execution and the user report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::Clock;
use crate::executor::{run, ExecutionReport, ExecutionStatus, LogEntry, RunOptions};
use crate::llm::{
    fit_to_budget, CompletionRequest, PromptConfig, PromptMessage, Provider, Purpose, ASSIST_PROBE, SUMMARY_REQUEST,
};
use crate::memory::{ContextUpdate, ResultEntry, ScriptStore, ShortTermMemory, VerifiedProgram};
use crate::pipeline::{self, EnrichedTask, GenContext, PipelineError};
use crate::program::FsmProgram;
use crate::registry::Registry;
use crate::session::{ChatMessage, Event, EventKind, EventSink, Role, Session, SessionState};
use crate::validate::{validate, ValidationReport};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordinatorConfig {
    /// Generation retries after the first attempt.
    pub retry_bound: u32,
    /// Extra probes when the reply has neither keyword.
    pub probe_reask: u32,
    /// Extra summary requests when the reply is empty.
    pub summary_reask: u32,
    /// Probe even after greetings.
    pub probe_always: bool,
    /// Let the provider do the final merge instead of the built-in one.
    pub provider_assembly: bool,
    pub budget: u64,
    pub simulate_latency: bool,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        let run = RunOptions::default();
        CoordinatorConfig {
            retry_bound: 3,
            probe_reask: 1,
            summary_reask: 1,
            probe_always: false,
            provider_assembly: false,
            budget: run.budget,
            simulate_latency: run.simulate_latency,
        }
    }
}

impl CoordinatorConfig {
    pub fn run_options(&self) -> RunOptions {
        RunOptions { budget: self.budget, simulate_latency: self.simulate_latency }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Filter,
    Probe,
    Summarize,
    Lookup,
    Generate,
    Validate,
    Execute,
    Report,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssistanceVerdict {
    pub needs_help: bool,
    pub raw_reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskWorkflow {
    pub session_id: String,
    pub phase: Phase,
    /// Every phase entered, in order.
    pub phases: Vec<Phase>,
    pub summary: Option<String>,
    /// Index of the last generation attempt (0 when the first one worked).
    pub attempts: u32,
    pub cache_hit: bool,
    pub program: Option<FsmProgram>,
    pub validation: Option<ValidationReport>,
    pub report: Option<ExecutionReport>,
    /// `Class: message` per failed generation attempt.
    pub errors: Vec<String>,
    pub final_text: Option<String>,
}

impl TaskWorkflow {
    fn new(session_id: &str) -> Self {
        TaskWorkflow {
            session_id: session_id.into(),
            phase: Phase::Filter,
            phases: vec![Phase::Filter],
            summary: None,
            attempts: 0,
            cache_hit: false,
            program: None,
            validation: None,
            report: None,
            errors: Vec::new(),
            final_text: None,
        }
    }

    fn enter(&mut self, phase: Phase) {
        self.phase = phase;
        self.phases.push(phase);
    }
}

/// Whether `phases` is a prefix of
/// `Filter Probe Summarize Lookup (Generate Validate)* Execute Report (Done|Failed)`,
/// where `Execute` may only be skipped after a failed final validation.
pub fn phases_follow_flowchart(phases: &[Phase]) -> bool {
    use Phase::*;
    let mut prev: Option<Phase> = None;
    for &p in phases {
        let ok = match (prev, p) {
            (None, Filter) => true,
            (Some(Filter), Probe) => true,
            (Some(Probe), Summarize) => true,
            (Some(Summarize), Lookup) => true,
            (Some(Lookup), Generate | Execute) => true,
            (Some(Generate), Validate) => true,
            (Some(Validate), Generate | Execute | Report) => true,
            (Some(Execute), Report) => true,
            (Some(Report), Done | Failed) => true,
            _ => false,
        };
        if !ok {
            return false;
        }
        prev = Some(p);
    }
    true
}

/// Earliest whole-word "yes" or "no", case-insensitive.
pub fn scan_keyword(reply: &str) -> Option<bool> {
    reply
        .split(|c: char| !c.is_alphanumeric())
        .find_map(|w| match w.to_lowercase().as_str() {
            "yes" => Some(true),
            "no" => Some(false),
            _ => None,
        })
}

const GREETING_WORDS: &[&str] = &[
    "hello", "hi", "hey", "good", "morning", "afternoon", "evening", "night", "thanks", "thank", "you", "bye",
    "goodbye", "how", "are", "there", "cheers", "ok", "okay",
];

/// Messages made only of greeting and pleasantry words.
pub fn is_trivial_greeting(text: &str) -> bool {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect();
    !words.is_empty() && words.iter().all(|w| GREETING_WORDS.contains(&w.as_str()))
}

pub const PROVIDER_DOWN_REPLY: &str =
    "I'm sorry, I cannot reach my planning service right now. Please try again in a moment.";

/// What the coordinator needs from the rest of the system for one turn.
pub struct Services<'a, C> {
    pub provider: &'a dyn Provider,
    pub registry: &'a Registry<C>,
    pub devices: &'a mut C,
    pub cache: &'a dyn ScriptStore,
    pub clock: &'a dyn Clock,
    pub prompts: &'a PromptConfig,
    pub config: &'a CoordinatorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    /// Last user-visible housekeeper text of the turn.
    pub reply: String,
    pub verdict: Option<AssistanceVerdict>,
    pub workflow: Option<TaskWorkflow>,
}

/// Emit the user's message as an event and return it with its seq. The
/// gateway calls this on arrival; handling may happen later.
pub fn user_message(session: &Session, sink: &mut dyn EventSink, text: &str, clock: &dyn Clock) -> ChatMessage {
    let seq = sink.emit(Event::new(EventKind::Message).role(Role::User).text(text));
    ChatMessage {
        session_id: session.id.clone(),
        role: Role::User,
        text: text.into(),
        seq,
        timestamp_ms: clock.now_ms(),
        internal: false,
    }
}

/// Run one user message through the whole flow.
pub fn handle_user_message<C>(
    svc: &mut Services<'_, C>,
    session: &mut Session,
    memory: &mut ShortTermMemory,
    sink: &mut dyn EventSink,
    message: ChatMessage,
) -> TurnOutcome {
    session.state = SessionState::Processing;
    let text = message.text.clone();
    memory.update_context(ContextUpdate::Message(message));
    let mut turn = Turn { svc, session: &*session, memory, sink };
    let outcome = turn.run(&text);
    session.state = SessionState::Idle;
    outcome
}

struct Turn<'t, 'a, C> {
    svc: &'t mut Services<'a, C>,
    session: &'t Session,
    memory: &'t mut ShortTermMemory,
    sink: &'t mut dyn EventSink,
}

impl<C> Turn<'_, '_, C> {
    fn emit(&mut self, event: Event) -> u64 {
        self.sink.emit(event)
    }

    /// Record a dialog message: user-visible ones as `message` events,
    /// coordinator/housekeeper exchanges as `trace` events.
    fn say(&mut self, role: Role, text: &str, internal: bool) {
        let kind = if internal { EventKind::Trace } else { EventKind::Message };
        self.say_as(kind, role, text, internal);
    }

    fn say_as(&mut self, kind: EventKind, role: Role, text: &str, internal: bool) {
        let seq = self.emit(Event::new(kind).role(role).text(text));
        self.memory.update_context(ContextUpdate::Message(ChatMessage {
            session_id: self.session.id.clone(),
            role,
            text: text.into(),
            seq,
            timestamp_ms: self.svc.clock.now_ms(),
            internal,
        }));
    }

    fn dialog_request(&self, purpose: Purpose, extra_rules: &[&str]) -> CompletionRequest {
        let prompts = self.svc.prompts;
        let mut messages = prompts.preamble(&self.session.user_name);
        messages.extend(extra_rules.iter().map(|r| PromptMessage::system(*r)));
        let head = messages.len();
        messages.extend(
            self.memory
                .view()
                .chat_history
                .iter()
                .map(|m| PromptMessage::new(m.role.into(), m.text.clone())),
        );
        if let Some(budget) = prompts.char_budget {
            fit_to_budget(&mut messages, head, 1, budget);
        }
        CompletionRequest::new(purpose, messages)
    }

    fn fail_politely(&mut self, workflow: Option<TaskWorkflow>, verdict: Option<AssistanceVerdict>) -> TurnOutcome {
        self.say_as(EventKind::Failure, Role::Housekeeper, PROVIDER_DOWN_REPLY, false);
        TurnOutcome { reply: PROVIDER_DOWN_REPLY.into(), verdict, workflow }
    }

    fn run(&mut self, text: &str) -> TurnOutcome {
        let request = self.dialog_request(Purpose::Chat, &[]);
        let reply = match self.svc.provider.complete(&request) {
            Ok(r) => r.trim().to_string(),
            Err(e) => {
                log::warn!("chat completion failed: {e}");
                return self.fail_politely(None, None);
            }
        };
        self.say(Role::Housekeeper, &reply, false);

        if !self.svc.config.probe_always && is_trivial_greeting(text) {
            return TurnOutcome { reply, verdict: None, workflow: None };
        }
        let verdict = match self.probe() {
            Some(v) => v,
            None => return self.fail_politely(None, None),
        };
        if !verdict.needs_help {
            return TurnOutcome { reply, verdict: Some(verdict), workflow: None };
        }

        let mut wf = TaskWorkflow::new(&self.session.id);
        wf.enter(Phase::Probe);
        wf.enter(Phase::Summarize);
        let summary = match self.summarize(text) {
            Some(s) => s,
            None => return self.fail_politely(Some(wf), Some(verdict)),
        };
        wf.summary = Some(summary.clone());
        wf.enter(Phase::Lookup);
        let now = self.svc.clock.now_ms();
        let program = match self.svc.cache.lookup(&summary, now) {
            Some(hit) => {
                self.emit(
                    Event::new(EventKind::CacheHit)
                        .text(format!("Found a stored program for \"{}\".", hit.entry.summary))
                        .payload(json!({"summary": hit.entry.summary, "score": hit.score, "use_count": hit.entry.use_count})),
                );
                wf.cache_hit = true;
                hit.entry.program
            }
            None => {
                self.emit(
                    Event::new(EventKind::CacheMiss)
                        .text("No stored program matches; generating a new one.")
                        .payload(json!({"summary": summary})),
                );
                match self.generate_with_retry(&mut wf, &summary) {
                    Some(p) => p,
                    None => {
                        self.report_generation_failure(&mut wf);
                        return TurnOutcome { reply: wf.final_text.clone().unwrap_or_default(), verdict: Some(verdict), workflow: Some(wf) };
                    }
                }
            }
        };
        wf.program = Some(program.clone());
        let report = self.execute(&mut wf, &program, &summary);
        if !wf.cache_hit && report.status.is_success() {
            if let Some(validation) = &wf.validation {
                if let Ok(verified) = VerifiedProgram::new(program, validation, &report) {
                    if let Err(e) = self.svc.cache.store(&summary, verified, self.svc.clock.now_ms()) {
                        log::warn!("{e}");
                    }
                }
            }
        }
        let failed = matches!(report.status, ExecutionStatus::Failed { .. });
        wf.report = Some(report);
        self.compose_report(&mut wf);
        wf.enter(if failed { Phase::Failed } else { Phase::Done });
        TurnOutcome { reply: wf.final_text.clone().unwrap_or_default(), verdict: Some(verdict), workflow: Some(wf) }
    }

    /// `None` when the provider fails.
    fn probe(&mut self) -> Option<AssistanceVerdict> {
        let rule = self.svc.prompts.probe_rule.clone();
        let extra: Vec<&str> = if rule.is_empty() { vec![] } else { vec![rule.as_str()] };
        let mut last = String::new();
        for _ in 0..=self.svc.config.probe_reask {
            self.say(Role::Assistant, ASSIST_PROBE, true);
            let request = self.dialog_request(Purpose::AssistProbe, &extra);
            let reply = match self.svc.provider.complete(&request) {
                Ok(r) => r.trim().to_string(),
                Err(e) => {
                    log::warn!("assistance probe failed: {e}");
                    return None;
                }
            };
            self.say(Role::Housekeeper, &reply, true);
            if let Some(needs_help) = scan_keyword(&reply) {
                return Some(AssistanceVerdict { needs_help, raw_reply: reply });
            }
            log::info!("probe reply has no yes/no keyword: {reply:?}");
            last = reply;
        }
        Some(AssistanceVerdict { needs_help: false, raw_reply: last })
    }

    fn summarize(&mut self, instruction: &str) -> Option<String> {
        for _ in 0..=self.svc.config.summary_reask {
            self.say(Role::Assistant, SUMMARY_REQUEST, true);
            let request = self.dialog_request(Purpose::Summarize, &[]);
            let reply = match self.svc.provider.complete(&request) {
                Ok(r) => r.trim().to_string(),
                Err(e) => {
                    log::warn!("summary request failed: {e}");
                    return None;
                }
            };
            self.say(Role::Housekeeper, &reply, true);
            if !reply.is_empty() {
                return Some(reply);
            }
        }
        Some(instruction.trim().to_string())
    }

    fn generate_with_retry(&mut self, wf: &mut TaskWorkflow, summary: &str) -> Option<FsmProgram> {
        let bound = self.svc.config.retry_bound;
        let mut enriched: Option<EnrichedTask> = None;
        for attempt in 0..=bound {
            wf.attempts = attempt;
            if attempt > 0 {
                let last = wf.errors.last().cloned().unwrap_or_default();
                self.emit(
                    Event::new(EventKind::Retry)
                        .text(format!("Retry {attempt} of {bound}: {last}"))
                        .payload(json!({"attempt": attempt, "error": last})),
                );
            }
            self.emit(
                Event::new(EventKind::Generating)
                    .text(format!("Generating a program (attempt {} of {}).", attempt + 1, bound + 1))
                    .payload(json!({"attempt": attempt})),
            );
            wf.enter(Phase::Generate);
            let result = self.attempt(attempt, bound, summary, wf.errors.last().map(String::as_str), &mut enriched);
            wf.enter(Phase::Validate);
            let error = match result {
                Ok((generated, validation)) => {
                    self.emit(
                        Event::new(EventKind::Program)
                            .text(format!("Program ready after {} attempt(s).", attempt + 1))
                            .payload(json!({
                                "attempt": attempt,
                                "sketch": generated.sketch,
                                "program": generated.program,
                                "warnings": validation.warnings().map(ToString::to_string).collect::<Vec<_>>(),
                            })),
                    );
                    wf.validation = Some(validation);
                    return Some(generated.program);
                }
                Err(e) => e,
            };
            let class = error.class().to_string();
            let message = error.to_string();
            self.memory.update_context(ContextUpdate::Result(ResultEntry::Error {
                task: summary.into(),
                attempt,
                class: class.clone(),
                message: message.clone(),
            }));
            wf.errors.push(format!("{class}: {message}"));
            if !error.is_retryable() {
                break;
            }
        }
        None
    }

    fn attempt(
        &mut self,
        attempt: u32,
        bound: u32,
        summary: &str,
        last_error: Option<&str>,
        enriched: &mut Option<EnrichedTask>,
    ) -> Result<(pipeline::Generated, ValidationReport), PipelineError> {
        let snapshot = self.memory.snapshot();
        let ctx = GenContext {
            prompts: self.svc.prompts,
            user_name: &self.session.user_name,
            context: &snapshot,
            task: summary,
            attempt,
            max_retries: bound,
            last_error,
        };
        let provider = self.svc.provider;
        let task = match enriched {
            Some(t) => t.clone(),
            None => {
                let t = pipeline::enrich(provider, &ctx)?;
                *enriched = Some(t.clone());
                t
            }
        };
        let mut generated = pipeline::generate(provider, &ctx, &task)?;
        if self.svc.config.provider_assembly {
            generated.program = pipeline::assemble_with_provider(provider, &ctx, &generated.sketch, &generated.program)?;
        }
        let validation = validate(&generated.program, self.svc.registry, &*self.svc.devices);
        if !validation.is_valid() {
            return Err(PipelineError::Invalid(validation));
        }
        Ok((generated, validation))
    }

    fn snapshot_event(&mut self, label: &str) {
        if let Some(state) = self.svc.registry.snapshot(&*self.svc.devices) {
            self.emit(Event::new(EventKind::Snapshot).text(label).payload(state));
        }
    }

    fn execute(&mut self, wf: &mut TaskWorkflow, program: &FsmProgram, summary: &str) -> ExecutionReport {
        wf.enter(Phase::Execute);
        let source = if wf.cache_hit { "cache" } else { "generated" };
        self.emit(
            Event::new(EventKind::Executing)
                .text("Executing the program.")
                .payload(json!({"source": source, "program": program})),
        );
        self.snapshot_event("before");
        let options = self.svc.config.run_options();
        let report = run(program, self.svc.registry, &mut *self.svc.devices, options, self.svc.clock);
        self.snapshot_event("after");
        let text = match &report.status {
            ExecutionStatus::Success => "Execution succeeded.".to_string(),
            ExecutionStatus::Terminated { reason } => format!("Execution terminated: {reason}."),
            ExecutionStatus::Failed { error } => format!("Execution failed with {}: {error}.", error.class()),
        };
        self.emit(
            Event::new(EventKind::Execution)
                .text(text)
                .payload(serde_json::to_value(&report).expect("reports serialize")),
        );
        self.memory.update_context(ContextUpdate::Result(ResultEntry::execution(summary, &report)));
        report
    }

    fn compose_report(&mut self, wf: &mut TaskWorkflow) {
        wf.enter(Phase::Report);
        self.emit(Event::new(EventKind::Reporting).text("Composing the report."));
        let report = wf.report.as_ref().expect("executed before reporting");
        let outcome = render_outcome(report);
        let logs = render_logs(&report.logs);
        self.say(Role::Assistant, &outcome, true);
        let mut request = self.dialog_request(Purpose::Report, &[]);
        let at = request.messages.len() - 1;
        request.messages.insert(at, PromptMessage::coordinator(format!("Execution log:\n{logs}")));
        let text = match self.svc.provider.complete(&request) {
            Ok(t) if !t.trim().is_empty() => t.trim().to_string(),
            Ok(_) => outcome,
            Err(e) => {
                log::warn!("report composition failed: {e}");
                outcome
            }
        };
        self.say_as(EventKind::Report, Role::Housekeeper, &text, false);
        wf.final_text = Some(text);
    }

    fn report_generation_failure(&mut self, wf: &mut TaskWorkflow) {
        wf.enter(Phase::Report);
        self.emit(Event::new(EventKind::Reporting).text("Composing the report."));
        let last = wf.errors.last().cloned().unwrap_or_else(|| "unknown error".into());
        let outcome = format!("Script generation failed after {} attempts. Last error: {last}", wf.attempts + 1);
        self.say(Role::Assistant, &outcome, true);
        let request = self.dialog_request(Purpose::Report, &[]);
        let text = match self.svc.provider.complete(&request) {
            Ok(t) if !t.trim().is_empty() => t.trim().to_string(),
            _ => {
                let class = last.split(':').next().unwrap_or("error");
                format!("I'm sorry, I could not prepare a working plan for this task ({class}).")
            }
        };
        self.say_as(EventKind::Failure, Role::Housekeeper, &text, false);
        wf.final_text = Some(text);
        wf.enter(Phase::Failed);
    }
}

/// The coordinator's plain statement of an execution result, handed to the
/// housekeeper for the user report.
pub fn render_outcome(report: &ExecutionReport) -> String {
    let results = report
        .outputs
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect::<Vec<_>>()
        .join("; ");
    let head = match &report.status {
        ExecutionStatus::Success => "Execution succeeded".to_string(),
        ExecutionStatus::Terminated { reason } => format!("Execution terminated: {reason}"),
        ExecutionStatus::Failed { error } => format!("Execution failed with {}: {error}", error.class()),
    };
    match (&report.status, results.is_empty()) {
        (ExecutionStatus::Success, true) => "Execution succeeded with no results.".into(),
        (_, true) => format!("{head}."),
        (_, false) => format!("{head}. Results: {results}."),
    }
}

pub fn render_logs(logs: &[LogEntry]) -> String {
    logs.iter()
        .map(|l| {
            let level = serde_json::to_value(l.level).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            match &l.payload {
                Some(p) if !matches!(p, Value::Null) => format!("[{level}] {}: {} -> {p}", l.source, l.message),
                _ => format!("[{level}] {}: {}", l.source, l.message),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
