//! Sessions, dialog messages and the per-session event log.
//!
//! User messages and coordinator events share one `seq` counter per
//! session, so a client that resumes from `seq` sees both in order.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// The three dialog roles: the employer, the language model acting as a
/// housekeeper, and the coordinator acting as the housekeeper's assistant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Housekeeper,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    #[default]
    Idle,
    Processing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub user_name: String,
    pub created_at_ms: u64,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub session_id: String,
    pub role: Role,
    pub text: String,
    pub seq: u64,
    pub timestamp_ms: u64,
    /// Coordinator/housekeeper exchanges that never reach the user.
    #[serde(default)]
    pub internal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// User-visible chat message (user or housekeeper).
    Message,
    /// Internal coordinator/housekeeper exchange.
    Trace,
    CacheHit,
    CacheMiss,
    Generating,
    Retry,
    Program,
    Executing,
    Execution,
    Snapshot,
    Reporting,
    Report,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

impl Event {
    pub fn new(kind: EventKind) -> Self {
        Event { seq: 0, kind, role: None, text: None, payload: None }
    }

    pub fn role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn payload(mut self, payload: serde_json::Value) -> Self {
        self.payload = Some(payload);
        self
    }
}

/// Where the coordinator sends events. `emit` assigns and returns the seq.
pub trait EventSink {
    fn emit(&mut self, event: Event) -> u64;
}

/// Ordered, append-only event history of one session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_seq(&self) -> u64 {
        self.events.last().map_or(1, |e| e.seq + 1)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events with `seq >= from`.
    pub fn since(&self, from: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.seq < from);
        &self.events[start..]
    }
}

impl EventSink for EventLog {
    fn emit(&mut self, mut event: Event) -> u64 {
        event.seq = self.next_seq();
        let seq = event.seq;
        self.events.push(event);
        seq
    }
}

impl EventSink for Vec<Event> {
    fn emit(&mut self, mut event: Event) -> u64 {
        event.seq = self.last().map_or(1, |e| e.seq + 1);
        let seq = event.seq;
        self.push(event);
        seq
    }
}
