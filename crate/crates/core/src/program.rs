//! FSM sketches and executable FSM programs.
//!
//! An [`FsmSketch`] is the stage plan produced from an enriched task: named
//! stages with goals and natural-language transition conditions. An
//! [`FsmProgram`] is the merged, executable form: per-state API calls and
//! typed guard expressions. Programs serialize with a canonical field order:
//!
//! ```json
//! {"initial": "...", "terminals": [...], "vars": {"name": "kind"},
//!  "states": [{"name": "...", "actions": [{"owner", "fn", "args", "bind"?}]}],
//!  "transitions": [{"from", "to", "guard"}]}
//! ```

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::value::Kind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchState {
    pub name: String,
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchTransition {
    pub from: String,
    pub to: String,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSketch {
    pub states: Vec<SketchState>,
    pub initial: String,
    pub terminals: Vec<String>,
    pub transitions: Vec<SketchTransition>,
}

impl FsmSketch {
    pub fn state_names(&self) -> Vec<&str> {
        self.states.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn is_terminal(&self, name: &str) -> bool {
        self.terminals.iter().any(|t| t == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiCall {
    pub owner: String,
    #[serde(rename = "fn")]
    pub function: String,
    #[serde(default)]
    pub args: Vec<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
}

impl ApiCall {
    pub fn new(owner: &str, function: &str, args: Vec<Expr>, bind: Option<&str>) -> Self {
        ApiCall {
            owner: owner.into(),
            function: function.into(),
            args,
            bind: bind.map(Into::into),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramState {
    pub name: String,
    #[serde(default)]
    pub actions: Vec<ApiCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub guard: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmProgram {
    pub initial: String,
    pub terminals: Vec<String>,
    pub vars: BTreeMap<String, Kind>,
    pub states: Vec<ProgramState>,
    pub transitions: Vec<Transition>,
}

impl FsmProgram {
    pub fn state(&self, name: &str) -> Option<&ProgramState> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn is_terminal(&self, name: &str) -> bool {
        self.terminals.iter().any(|t| t == name)
    }

    /// Outgoing transitions of `state`, in declaration order.
    pub fn outgoing<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// Canonical JSON text.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("programs always serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPolicy {
    /// Abort the rest of the state and let its transitions decide.
    #[default]
    FailState,
    /// End the whole run as terminated with the handler's reason.
    Terminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: Kind,
}

/// What a program may call: owner, name, typed parameters, return kind,
/// expected latency and error policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiFunctionDescriptor {
    pub owner: String,
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Kind,
    pub expected_latency_ms: u64,
    pub description: String,
    #[serde(default)]
    pub on_error: ErrorPolicy,
}

impl ApiFunctionDescriptor {
    pub fn new(owner: &str, name: &str, params: &[(&str, Kind)], returns: Kind) -> Self {
        ApiFunctionDescriptor {
            owner: owner.into(),
            name: name.into(),
            params: params
                .iter()
                .map(|(n, k)| Param { name: (*n).into(), kind: *k })
                .collect(),
            returns,
            expected_latency_ms: 0,
            description: String::new(),
            on_error: ErrorPolicy::FailState,
        }
    }

    pub fn latency(mut self, ms: u64) -> Self {
        self.expected_latency_ms = ms;
        self
    }

    pub fn describe(mut self, text: &str) -> Self {
        self.description = text.into();
        self
    }

    pub fn terminating(mut self) -> Self {
        self.on_error = ErrorPolicy::Terminate;
        self
    }

    /// One-line signature, e.g. `router.set_tier(user: string, tier: string) -> record`.
    pub fn signature(&self) -> String {
        let params = self
            .params
            .iter()
            .map(|p| alloc::format!("{}: {}", p.name, p.kind))
            .collect::<Vec<_>>()
            .join(", ");
        alloc::format!("{}.{}({}) -> {}", self.owner, self.name, params, self.returns)
    }
}
