//! Completion requests, the provider interface and the housekeeper prompt
//! stack.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{ChatMessage, Role};

/// Which pipeline step a request serves. Mock providers keep one rule
/// table per purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Chat,
    AssistProbe,
    Summarize,
    Enrich,
    FsmDerive,
    StageOps,
    Transitions,
    Assemble,
    Report,
}

impl Purpose {
    pub const ALL: [Purpose; 9] = [
        Purpose::Chat,
        Purpose::AssistProbe,
        Purpose::Summarize,
        Purpose::Enrich,
        Purpose::FsmDerive,
        Purpose::StageOps,
        Purpose::Transitions,
        Purpose::Assemble,
        Purpose::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Chat => "chat",
            Purpose::AssistProbe => "assist_probe",
            Purpose::Summarize => "summarize",
            Purpose::Enrich => "enrich",
            Purpose::FsmDerive => "fsm_derive",
            Purpose::StageOps => "stage_ops",
            Purpose::Transitions => "transitions",
            Purpose::Assemble => "assemble",
            Purpose::Report => "report",
        }
    }

    /// Dialog purposes key on what the employer said; pipeline purposes on
    /// the coordinator's instruction.
    fn keys_on_employer(self) -> bool {
        matches!(self, Purpose::Chat | Purpose::AssistProbe | Purpose::Summarize)
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Speaker of a prompt message from the model's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptRole {
    System,
    /// The employer (end user).
    Employer,
    /// The coordinator speaking as the housekeeper's assistant.
    Coordinator,
    /// The model's own earlier turns.
    Housekeeper,
}

impl PromptRole {
    /// Chat-completions wire role.
    pub fn wire(self) -> &'static str {
        match self {
            PromptRole::System => "system",
            PromptRole::Employer | PromptRole::Coordinator => "user",
            PromptRole::Housekeeper => "assistant",
        }
    }
}

impl From<Role> for PromptRole {
    fn from(role: Role) -> Self {
        match role {
            Role::User => PromptRole::Employer,
            Role::Housekeeper => PromptRole::Housekeeper,
            Role::Assistant => PromptRole::Coordinator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: PromptRole,
    pub text: String,
}

impl PromptMessage {
    pub fn new(role: PromptRole, text: impl Into<String>) -> Self {
        PromptMessage { role, text: text.into() }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self::new(PromptRole::System, text)
    }

    pub fn coordinator(text: impl Into<String>) -> Self {
        Self::new(PromptRole::Coordinator, text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub purpose: Purpose,
    pub messages: Vec<PromptMessage>,
}

impl CompletionRequest {
    pub fn new(purpose: Purpose, messages: Vec<PromptMessage>) -> Self {
        CompletionRequest { purpose, messages }
    }

    /// The text rule-based providers match on: the latest employer message
    /// for dialog purposes, otherwise the final message.
    pub fn subject(&self) -> &str {
        let found = if self.purpose.keys_on_employer() {
            self.messages.iter().rev().find(|m| m.role == PromptRole::Employer)
        } else {
            self.messages.last()
        };
        found.map_or("", |m| m.text.as_str())
    }

    pub fn total_chars(&self) -> usize {
        self.messages.iter().map(|m| m.text.chars().count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("no mock rule for purpose `{purpose}` and input {subject:?}")]
    MockRuleMissing { purpose: Purpose, subject: String },
    #[error("malformed provider response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport { retryable: true, .. })
    }
}

/// A language-model backend. Implementations must be shareable across
/// sessions.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;

    fn name(&self) -> &str {
        "provider"
    }
}

impl<F> Provider for F
where
    F: Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self(request)
    }

    fn name(&self) -> &str {
        "closure"
    }
}

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn normalize(text: &str) -> String {
    collapse_whitespace(text).to_lowercase()
}

pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub const DEFAULT_SYSTEM_RULES: [&str; 6] = [
    "You are a serious housekeeper managing the employer's daily life.",
    "You are working remotely and unable to perform tasks personally. However, fortunately, you have numerous assistants available at your employer's house to provide support.",
    "You are not required to answer a question when you lack the necessary information, but assure your employer that you will make an effort to figure it out.",
    "You must not ask your assistants to perform tasks that are not your employer\u{2019}s instructions.",
    "Your reply should be simple and concise.",
    "You should use the same language as your employer.",
];

pub const DEFAULT_USER_INFO: [&str; 2] = ["Your employer is male.", "The name of your employer is {name}."];

pub const ASSIST_PROBE: &str = "Do you require any assistance?";
pub const SUMMARY_REQUEST: &str = "Please repeat the employer's instruction using as few words as possible.";
pub const PROBE_KEYWORD_RULE: &str = "When your assistant asks whether you require any assistance, your reply must include the keyword \"Yes\" if your employer has given you a task that needs the devices or AI modules in the house, and the keyword \"No\" otherwise.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub system_rules: Vec<String>,
    /// Templates; `{name}` is replaced by the session's user name.
    pub user_info: Vec<String>,
    pub probe_rule: String,
    /// Upper bound on request size in characters; oldest history goes first.
    pub char_budget: Option<usize>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            system_rules: DEFAULT_SYSTEM_RULES.iter().map(|s| s.to_string()).collect(),
            user_info: DEFAULT_USER_INFO.iter().map(|s| s.to_string()).collect(),
            probe_rule: PROBE_KEYWORD_RULE.into(),
            char_budget: None,
        }
    }
}

impl PromptConfig {
    /// Role rules and user information, without history.
    pub fn preamble(&self, user_name: &str) -> Vec<PromptMessage> {
        self.system_rules
            .iter()
            .map(|r| PromptMessage::system(r.clone()))
            .chain(self.user_info.iter().map(|t| PromptMessage::system(t.replace("{name}", user_name))))
            .collect()
    }
}

/// Role rules, then user information, then the chat history in order.
pub fn render_prompt_stack(config: &PromptConfig, user_name: &str, history: &[ChatMessage]) -> Vec<PromptMessage> {
    let mut out = config.preamble(user_name);
    out.extend(history.iter().map(|m| PromptMessage::new(m.role.into(), m.text.clone())));
    out
}

/// Drop the oldest messages in `messages[keep_head..len - keep_tail]` until
/// the total size fits `budget` characters (or nothing droppable remains).
pub fn fit_to_budget(messages: &mut Vec<PromptMessage>, keep_head: usize, keep_tail: usize, budget: usize) {
    let size = |m: &PromptMessage| m.text.chars().count();
    let mut total: usize = messages.iter().map(size).sum();
    while total > budget && messages.len() > keep_head + keep_tail {
        total -= size(&messages[keep_head]);
        messages.remove(keep_head);
    }
}
