//! Chat-completions provider over HTTP(S).

use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use hearth_core::llm::{CompletionRequest, Provider, ProviderError};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const ENV_ENDPOINT: &str = "HEARTH_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "HEARTH_LLM_API_KEY";
pub const ENV_MODEL: &str = "HEARTH_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: "https://api.openai.com/v1".into(),
            api_key: None,
            model: "gpt-3.5-turbo".into(),
            timeout_secs: 60,
            max_in_flight: 4,
        }
    }
}

impl LiveConfig {
    /// Defaults overridden by the `HEARTH_LLM_*` environment variables.
    pub fn from_env() -> LiveConfig {
        Self::default().with_env()
    }

    pub fn with_env(mut self) -> LiveConfig {
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_API_KEY) {
            self.api_key = Some(v);
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        self
    }
}

/// Counting gate for concurrent requests.
#[derive(Debug)]
struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn enter(&self) -> GatePass<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.cap {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a Gate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
pub struct LiveProvider {
    config: LiveConfig,
    // Built on first use so it is never created or dropped on an async thread.
    client: OnceLock<reqwest::blocking::Client>,
    gate: Gate,
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

fn transport(message: impl Into<String>, retryable: bool) -> ProviderError {
    ProviderError::Transport { message: message.into(), retryable }
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> LiveProvider {
        let cap = config.max_in_flight.max(1);
        LiveProvider { config, client: OnceLock::new(), gate: Gate { busy: Mutex::new(0), freed: Condvar::new(), cap } }
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    pub fn body(&self, request: &CompletionRequest) -> serde_json::Value {
        let messages: Vec<_> = request
            .messages
            .iter()
            .map(|m| json!({ "role": m.role.wire(), "content": m.text }))
            .collect();
        json!({ "model": self.config.model, "temperature": 0, "messages": messages })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, ProviderError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let built = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.config.timeout_secs))
            .build()
            .map_err(|e| transport(e.to_string(), false))?;
        Ok(self.client.get_or_init(|| built))
    }
}

impl Provider for LiveProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if request.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("no messages".into()));
        }
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let client = self.client()?;
        let _pass = self.gate.enter();
        let mut call = client.post(&url).json(&self.body(request));
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| transport(e.to_string(), true))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let retryable = status.is_server_error() || status.as_u16() == 429;
            return Err(transport(format!("HTTP {status}: {}", text.chars().take(300).collect::<String>()), retryable));
        }
        let reply: Reply = response.json().map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::InvalidResponse("reply has no message content".into()))
    }

    fn name(&self) -> &str {
        "live"
    }
}
