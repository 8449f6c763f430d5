//! Rule-table provider for offline runs.
//!
//! A rule file maps a purpose to a list of `{match: {exact|regex}, response}`
//! rules. Exact rules compare normalized text (lowercase, trimmed, single
//! spaces). Regex rules see the text with whitespace collapsed but case kept,
//! and may use `$1`-style captures in the response.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use hearth_core::llm::{collapse_whitespace, normalize, CompletionRequest, Provider, ProviderError, Purpose};
use regex::Regex;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    #[serde(rename = "match")]
    matcher: RawMatch,
    response: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawMatch {
    Exact(String),
    Regex(String),
}

#[derive(Debug, Clone)]
struct Table {
    exact: Vec<(String, String)>,
    regex: Vec<(Regex, String)>,
}

#[derive(Debug, Clone, Default)]
struct RuleSet {
    tables: BTreeMap<Purpose, Table>,
}

impl RuleSet {
    fn parse(text: &str) -> anyhow::Result<RuleSet> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: BTreeMap<Purpose, Vec<RawRule>> =
            serde_path_to_error::deserialize(de).context("mock rule file does not parse")?;
        let mut tables = BTreeMap::new();
        for (purpose, rules) in raw {
            let mut table = Table { exact: Vec::new(), regex: Vec::new() };
            for (i, rule) in rules.into_iter().enumerate() {
                match rule.matcher {
                    RawMatch::Exact(text) => table.exact.push((normalize(&text), rule.response)),
                    RawMatch::Regex(pattern) => {
                        let re = Regex::new(&pattern)
                            .with_context(|| format!("{purpose}[{i}]: bad regex {pattern:?}"))?;
                        table.regex.push((re, rule.response));
                    }
                }
            }
            tables.insert(purpose, table);
        }
        Ok(RuleSet { tables })
    }

    fn answer(&self, purpose: Purpose, subject: &str) -> Option<String> {
        let table = self.tables.get(&purpose)?;
        let key = normalize(subject);
        if let Some((_, response)) = table.exact.iter().find(|(text, _)| *text == key) {
            return Some(response.clone());
        }
        let collapsed = collapse_whitespace(subject);
        table.regex.iter().find_map(|(re, response)| {
            let caps = re.captures(&collapsed)?;
            let mut out = String::new();
            caps.expand(response, &mut out);
            Some(out)
        })
    }
}

/// Deterministic provider: the reply is a pure function of the request's
/// purpose and subject text.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    /// Consulted in order; overlays are pushed to the front.
    layers: Vec<RuleSet>,
}

impl MockProvider {
    pub fn from_json(text: &str) -> anyhow::Result<MockProvider> {
        Ok(MockProvider { layers: vec![RuleSet::parse(text)?] })
    }

    pub fn from_path(path: &Path) -> anyhow::Result<MockProvider> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The bundled rules for the demonstration scenarios.
    pub fn bundled() -> MockProvider {
        Self::from_json(hearth_core::fixtures::MOCK_PROVIDER).expect("bundled mock rules parse")
    }

    /// Rules that take precedence over everything loaded so far.
    pub fn with_overlay(mut self, text: &str) -> anyhow::Result<MockProvider> {
        self.layers.insert(0, RuleSet::parse(text)?);
        Ok(self)
    }

    pub fn answer(&self, purpose: Purpose, subject: &str) -> Option<String> {
        self.layers.iter().find_map(|l| l.answer(purpose, subject))
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let subject = request.subject();
        self.answer(request.purpose, subject).ok_or_else(|| ProviderError::MockRuleMissing {
            purpose: request.purpose,
            subject: subject.to_string(),
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hearth_core::fixtures::{SCENARIO1_INSTRUCTION, SCENARIO1_SUMMARY};
    use hearth_core::llm::PromptMessage;

    #[test]
    fn exact_rules_ignore_case_and_spacing() {
        let m = MockProvider::bundled();
        let shouted = SCENARIO1_INSTRUCTION.to_uppercase().replace(' ', "   ");
        assert_eq!(m.answer(Purpose::Summarize, &shouted).as_deref(), Some(SCENARIO1_SUMMARY));
        assert_eq!(m.answer(Purpose::Chat, "  Hello ").as_deref(), Some("Hello! How can I help you today?"));
    }

    #[test]
    fn regex_captures_expand() {
        let m = MockProvider::bundled();
        let got = m
            .answer(Purpose::Report, "Execution terminated: the robot is stuck. Results: total = 90.")
            .unwrap();
        assert_eq!(got, "I'm sorry, I had to stop the task: the robot is stuck.");
    }

    #[test]
    fn overlay_wins_and_miss_is_an_error() {
        let m = MockProvider::bundled()
            .with_overlay(r#"{"chat": [{"match": {"exact": "hello"}, "response": "Yo."}]}"#)
            .unwrap();
        assert_eq!(m.answer(Purpose::Chat, "hello").as_deref(), Some("Yo."));
        let req = CompletionRequest::new(Purpose::Assemble, vec![PromptMessage::coordinator("x")]);
        assert!(matches!(m.complete(&req), Err(ProviderError::MockRuleMissing { .. })));
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(MockProvider::from_json(r#"{"chat": [{"match": {"regex": "("}, "response": ""}]}"#).is_err());
        assert!(MockProvider::from_json(r#"{"nope": []}"#).is_err());
        assert!(MockProvider::from_json(r#"{"chat": [{"match": {"fuzzy": "a"}, "response": ""}]}"#).is_err());
    }
}
