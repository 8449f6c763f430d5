//! Headless replays of the two demonstration scenarios.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::ValueEnum;
use hearth_core::clock::ManualClock;
use hearth_core::coordinator::{CoordinatorConfig, TurnOutcome};
use hearth_core::executor::ExecutionStatus;
use hearth_core::fixtures;
use hearth_core::memory::DEFAULT_TAU;
use hearth_core::session::{Event, EventKind, EventLog};
use hearth_core::sim::{FleetAccess, Scene};
use hearth_core::value::Value;

use crate::agent::{Agent, Conversation};
use crate::mock::MockProvider;
use crate::store::SharedCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Scenario1,
    Scenario2,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Scenario1 => "scenario1",
            ScenarioName::Scenario2 => "scenario2",
        }
    }
}

/// Offline agent: bundled mock rules plus `overlays`, a virtual clock and an
/// in-memory script store.
pub fn offline_agent(scene: Scene, overlays: &[&str]) -> anyhow::Result<Agent> {
    let mut mock = MockProvider::bundled();
    for text in overlays.iter().rev() {
        mock = mock.with_overlay(text)?;
    }
    let config = CoordinatorConfig { simulate_latency: false, ..CoordinatorConfig::default() };
    Agent::new(
        Arc::new(mock),
        scene,
        Arc::new(SharedCache::new(DEFAULT_TAU)),
        Arc::new(ManualClock::new(0)),
        config,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

fn check(name: &str, expected: impl ToString, actual: impl ToString) -> Check {
    Check { name: name.into(), expected: expected.to_string(), actual: actual.to_string() }
}

pub struct ScenarioRun {
    pub name: ScenarioName,
    pub events: Vec<Event>,
    pub turns: Vec<TurnOutcome>,
    pub checks: Vec<Check>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn events_jsonl(&self) -> String {
        events_jsonl(&self.events)
    }
}

pub fn events_jsonl(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
        .collect()
}

/// One line per event: seq, kind, role and text (or the payload when there
/// is no text).
pub fn render_transcript(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let role = e.role.map(|r| format!(" {r:?}").to_lowercase()).unwrap_or_default();
        let body = match (&e.text, &e.payload) {
            (Some(t), _) => t.replace('\n', "\n        "),
            (None, Some(p)) => p.to_string(),
            (None, None) => String::new(),
        };
        let _ = writeln!(out, "#{:<4} {kind}{role}: {body}", e.seq);
    }
    out
}

fn last_text(events: &[Event], kind: EventKind) -> String {
    events.iter().rev().find(|e| e.kind == kind).and_then(|e| e.text.clone()).unwrap_or_default()
}

fn strs(items: &[&str]) -> Value {
    Value::List(items.iter().map(|s| Value::str(*s)).collect())
}

fn output(turn: &TurnOutcome, key: &str) -> String {
    turn.workflow
        .as_ref()
        .and_then(|w| w.report.as_ref())
        .and_then(|r| r.outputs.get(key))
        .map_or_else(|| "<missing>".into(), Value::to_string)
}

fn status(turn: &TurnOutcome) -> String {
    match turn.workflow.as_ref().and_then(|w| w.report.as_ref()).map(|r| &r.status) {
        Some(ExecutionStatus::Success) => "success".into(),
        Some(ExecutionStatus::Terminated { reason }) => format!("terminated: {reason}"),
        Some(ExecutionStatus::Failed { error }) => format!("failed: {error}"),
        None => "<no execution>".into(),
    }
}

pub fn run_scenario(name: ScenarioName) -> anyhow::Result<ScenarioRun> {
    match name {
        ScenarioName::Scenario1 => scenario1(),
        ScenarioName::Scenario2 => scenario2(),
    }
}

fn scenario1() -> anyhow::Result<ScenarioRun> {
    let agent = offline_agent(fixtures::scenario1_scene(), &[])?;
    let mut conv: Conversation = agent.conversation("scenario1", "Eason");
    let mut log = EventLog::new();
    let turn = agent.send(&mut conv, &mut log, fixtures::SCENARIO1_INSTRUCTION);
    let events = log.events().to_vec();
    let report = last_text(&events, EventKind::Report);
    let mut checks = vec![
        check("execution status", "success", status(&turn)),
        check("count", "5", output(&turn, "count")),
        check("known", strs(&["Mike", "Ada", "Joe"]), output(&turn, "known")),
        check("unknown_locations", "[[10, 1], [12, 5]]", output(&turn, "unknown_locations")),
    ];
    for token in ["5", "Mike", "Ada", "Joe", "[10, 1]", "[12, 5]"] {
        checks.push(check(&format!("report mentions {token}"), true, report.contains(token)));
    }
    Ok(ScenarioRun { name: ScenarioName::Scenario1, events, turns: vec![turn], checks })
}

fn scenario2() -> anyhow::Result<ScenarioRun> {
    let agent = offline_agent(fixtures::scenario2_scene(), &[])?;
    let mut conv = agent.conversation("scenario2", "Eason");
    let mut log = EventLog::new();
    let router = |a: &Agent| a.fleet.read(|f| f.router().cloned()).map_err(anyhow::Error::from);

    let first = agent.send(&mut conv, &mut log, fixtures::SCENARIO2_INSTRUCTION);
    let after_first = router(&agent)?;
    let split = log.events().len();
    let second = agent.send(&mut conv, &mut log, fixtures::SCENARIO2_INSTRUCTION);
    let after_second = router(&agent)?;
    let events = log.events().to_vec();
    let tail = &events[split..];
    let count = |kind: EventKind| tail.iter().filter(|e| e.kind == kind).count();

    let checks = vec![
        check("first run status", "success", status(&first)),
        check("Eason tier after first run", "Normal", after_first.users.get("Eason").cloned().unwrap_or_default()),
        check("allocated after first run", 100, after_first.allocated()),
        check("second run cache hit", true, second.workflow.as_ref().is_some_and(|w| w.cache_hit)),
        check("second run generating events", 0, count(EventKind::Generating)),
        check(
            "second run status",
            "terminated: total bandwidth would exceed 100 Mbps (projected 120 Mbps)",
            status(&second),
        ),
        check("router unchanged by rejection", true, after_first == after_second),
        check("final report cites the limit", true, last_text(tail, EventKind::Report).contains("100 Mbps")),
    ];
    Ok(ScenarioRun { name: ScenarioName::Scenario2, events, turns: vec![first, second], checks })
}

/// Write `<name>.events.jsonl` and `<name>.transcript.txt` under `dir`.
pub fn write_transcripts(run: &ScenarioRun, dir: &Path) -> anyhow::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let jsonl = dir.join(format!("{}.events.jsonl", run.name.as_str()));
    let human = dir.join(format!("{}.transcript.txt", run.name.as_str()));
    std::fs::write(&jsonl, run.events_jsonl()).with_context(|| format!("cannot write {}", jsonl.display()))?;
    std::fs::write(&human, render_transcript(&run.events)).with_context(|| format!("cannot write {}", human.display()))?;
    Ok((jsonl, human))
}
