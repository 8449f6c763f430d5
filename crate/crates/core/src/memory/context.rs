//! Short-term memory: the live context handed to the model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::executor::{ExecutionReport, ExecutionStatus};
use crate::program::ApiFunctionDescriptor;
use crate::session::ChatMessage;
use crate::value::Value;

/// Where a device sits: a grid cell, or a named placement such as "mobile".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Location {
    Cell([i64; 2]),
    Named(String),
}

impl core::fmt::Display for Location {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Location::Cell([x, y]) => write!(f, "[{x}, {y}]"),
            Location::Named(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: String,
    pub kind: String,
    pub location: Location,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDescriptor {
    pub id: String,
    pub capability: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnvironmentInfo {
    pub devices: Vec<DeviceDescriptor>,
    pub modules: Vec<ModuleDescriptor>,
    /// Free-form facts about the surroundings (room size, layout).
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EnvironmentInfo {
    pub fn is_empty(&self) -> bool {
        self.devices.is_empty() && self.modules.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.devices.iter().map(|d| d.id.as_str()).chain(self.modules.iter().map(|m| m.id.as_str()))
    }

    /// Plain-text listing for prompts.
    pub fn render(&self) -> String {
        let mut out = String::from("Devices:\n");
        for d in &self.devices {
            let _ = writeln!(out, "- {} ({}) at {}: {}", d.id, d.kind, d.location, d.description);
        }
        out.push_str("AI modules:\n");
        for m in &self.modules {
            let _ = writeln!(out, "- {}: {}", m.id, m.capability);
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

/// Signatures and descriptions, one per line.
pub fn render_api_docs(docs: &[ApiFunctionDescriptor]) -> String {
    let mut out = String::new();
    for d in docs {
        let _ = write!(out, "- {} (about {} ms)", d.signature(), d.expected_latency_ms);
        if !d.description.is_empty() {
            let _ = write!(out, ": {}", d.description);
        }
        out.push('\n');
    }
    out
}

/// An execution outcome or an error report kept for later prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultEntry {
    Execution {
        task: String,
        #[serde(flatten)]
        status: ExecutionStatus,
        outputs: BTreeMap<String, Value>,
        steps_used: u64,
    },
    Error {
        task: String,
        attempt: u32,
        class: String,
        message: String,
    },
}

impl ResultEntry {
    pub fn execution(task: &str, report: &ExecutionReport) -> Self {
        ResultEntry::Execution {
            task: task.into(),
            status: report.status.clone(),
            outputs: report.outputs.clone(),
            steps_used: report.steps_used,
        }
    }

    pub fn render(&self) -> String {
        match self {
            ResultEntry::Execution { task, status, outputs, .. } => {
                let outcome = match status {
                    ExecutionStatus::Success => String::from("succeeded"),
                    ExecutionStatus::Terminated { reason } => format!("terminated: {reason}"),
                    ExecutionStatus::Failed { error } => format!("failed with {}: {error}", error.class()),
                };
                format!("Execution for \"{task}\" {outcome}; outputs {}", Value::Record(outputs.clone()))
            }
            ResultEntry::Error { task, attempt, class, message } => {
                format!("Attempt {attempt} for \"{task}\" failed with {class}: {message}")
            }
        }
    }
}

/// The four context components, copied out as one consistent value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub environment: EnvironmentInfo,
    pub api_docs: Vec<ApiFunctionDescriptor>,
    pub chat_history: Vec<ChatMessage>,
    pub exec_results: Vec<ResultEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContextUpdate {
    Message(ChatMessage),
    Result(ResultEntry),
    /// Device (de)registration: both lists are replaced wholesale.
    Environment { environment: EnvironmentInfo, api_docs: Vec<ApiFunctionDescriptor> },
}

/// Per-session short-term memory. Writers go through [`Self::update_context`];
/// readers take [`Self::snapshot`] copies.
#[derive(Debug, Clone, Default)]
pub struct ShortTermMemory {
    context: ContextSnapshot,
}

impl ShortTermMemory {
    pub fn new(environment: EnvironmentInfo, api_docs: Vec<ApiFunctionDescriptor>) -> Self {
        ShortTermMemory {
            context: ContextSnapshot { environment, api_docs, ..ContextSnapshot::default() },
        }
    }

    pub fn update_context(&mut self, update: ContextUpdate) {
        match update {
            ContextUpdate::Message(m) => self.context.chat_history.push(m),
            ContextUpdate::Result(r) => self.context.exec_results.push(r),
            ContextUpdate::Environment { environment, api_docs } => {
                self.context.environment = environment;
                self.context.api_docs = api_docs;
            }
        }
    }

    pub fn snapshot(&self) -> ContextSnapshot {
        self.context.clone()
    }

    /// Borrowed view for hot paths that do not need a copy.
    pub fn view(&self) -> &ContextSnapshot {
        &self.context
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Role;
    use alloc::vec;

    #[test]
    fn updates_append_and_replace() {
        let mut m = ShortTermMemory::new(EnvironmentInfo::default(), vec![]);
        let msg = ChatMessage {
            session_id: "s".into(),
            role: Role::User,
            text: "hi".into(),
            seq: 1,
            timestamp_ms: 0,
            internal: false,
        };
        let before = m.snapshot();
        m.update_context(ContextUpdate::Message(msg.clone()));
        m.update_context(ContextUpdate::Result(ResultEntry::Error {
            task: "t".into(),
            attempt: 1,
            class: "ParseError".into(),
            message: "no JSON".into(),
        }));
        assert!(before.chat_history.is_empty(), "snapshots are copies");
        let after = m.snapshot();
        assert_eq!(after.chat_history, vec![msg]);
        assert_eq!(after.exec_results[0].render(), "Attempt 1 for \"t\" failed with ParseError: no JSON");

        let env = EnvironmentInfo {
            devices: vec![DeviceDescriptor {
                id: "turtlebot".into(),
                kind: "robot".into(),
                location: Location::Named("mobile".into()),
                description: "mobile robot".into(),
            }],
            modules: vec![],
            notes: vec![],
        };
        m.update_context(ContextUpdate::Environment { environment: env.clone(), api_docs: vec![] });
        assert_eq!(m.snapshot().environment, env);
        assert_eq!(m.snapshot().chat_history.len(), 1);
    }

    #[test]
    fn location_json_forms() {
        assert_eq!(serde_json::to_string(&Location::Cell([0, 7])).unwrap(), "[0,7]");
        assert_eq!(serde_json::from_str::<Location>("\"mobile\"").unwrap(), Location::Named("mobile".into()));
    }
}
