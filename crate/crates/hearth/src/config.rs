//! Service configuration file (TOML or JSON).

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use hearth_core::coordinator::CoordinatorConfig;
use hearth_core::executor::DEFAULT_BUDGET;
use hearth_core::llm::PromptConfig;
use hearth_core::memory::DEFAULT_TAU;
use serde::{Deserialize, Serialize};

use crate::live::LiveConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Live,
}

/// Where the scene comes from: a bundled fixture or a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SceneSource {
    Bundled(String),
    File(PathBuf),
}

impl SceneSource {
    /// `builtin:<name>` selects a bundled scene; anything else is a path.
    pub fn parse(text: &str) -> SceneSource {
        match text.strip_prefix("builtin:") {
            Some(name) => SceneSource::Bundled(name.to_string()),
            None => SceneSource::File(PathBuf::from(text)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub scene: String,
    pub provider: ProviderKind,
    /// Rule file for the mock provider; the bundled rules when absent.
    pub mock_rules: Option<PathBuf>,
    /// Extra rule files consulted before `mock_rules`, first one first.
    pub mock_overlays: Vec<PathBuf>,
    pub live: LiveConfig,
    pub tau: f64,
    pub retry_bound: u32,
    pub budget: u64,
    pub simulate_latency: bool,
    /// JSON-lines script store; in-memory when absent.
    pub cache_path: Option<PathBuf>,
    pub prompts: PromptConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: "127.0.0.1".into(),
            port: 8080,
            scene: "builtin:scenario1".into(),
            provider: ProviderKind::Mock,
            mock_rules: None,
            mock_overlays: Vec::new(),
            live: LiveConfig::default(),
            tau: DEFAULT_TAU,
            retry_bound: 3,
            budget: DEFAULT_BUDGET,
            simulate_latency: false,
            cache_path: None,
            prompts: PromptConfig::default(),
        }
    }
}

impl Config {
    /// Read a `.toml` or `.json` file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: Config = if path.extension().is_some_and(|e| e == "json") {
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).with_context(|| format!("in config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("in config {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        config.check()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SceneSource::File(mut p) = self.scene_source() {
            fix(&mut p);
            self.scene = p.to_string_lossy().into_owned();
        }
        if let Some(p) = &mut self.mock_rules {
            fix(p);
        }
        self.mock_overlays.iter_mut().for_each(fix);
        if let Some(p) = &mut self.cache_path {
            fix(p);
        }
    }

    pub fn check(&self) -> anyhow::Result<()> {
        anyhow::ensure!((0.0..=1.0).contains(&self.tau), "tau must be within [0, 1], got {}", self.tau);
        anyhow::ensure!(self.budget > 0, "budget must be positive");
        Ok(())
    }

    pub fn scene_source(&self) -> SceneSource {
        SceneSource::parse(&self.scene)
    }

    pub fn coordinator(&self) -> CoordinatorConfig {
        CoordinatorConfig {
            retry_bound: self.retry_bound,
            budget: self.budget,
            simulate_latency: self.simulate_latency,
            ..CoordinatorConfig::default()
        }
    }
}
