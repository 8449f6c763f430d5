//! Wiring: provider, devices, registry, long-term memory and clock behind
//! one handle that sessions share.

use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use hearth_core::clock::Clock;
use hearth_core::coordinator::{handle_user_message, user_message, CoordinatorConfig, Services, TurnOutcome};
use hearth_core::llm::{PromptConfig, Provider};
use hearth_core::memory::{ScriptStore, ShortTermMemory};
use hearth_core::registry::Registry;
use hearth_core::session::{ChatMessage, EventSink, Session, SessionState};
use hearth_core::sim::{standard_registry, Fleet, FleetAccess, Scene};

use crate::config::{Config, ProviderKind, SceneSource};
use crate::devices::{load_scene, SharedFleet};
use crate::live::LiveProvider;
use crate::mock::MockProvider;
use crate::store::{PersistentCache, SharedCache};

/// Wall clock measured from process start; sleeps for real.
#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

pub type Store = dyn ScriptStore + Send + Sync;

pub struct Agent {
    pub provider: Arc<dyn Provider>,
    pub fleet: SharedFleet,
    pub registry: Arc<Registry<SharedFleet>>,
    pub cache: Arc<Store>,
    pub clock: Arc<dyn Clock>,
    pub prompts: PromptConfig,
    pub config: CoordinatorConfig,
}

/// Per-session state owned by whoever runs the session's turns.
#[derive(Debug, Clone)]
pub struct Conversation {
    pub session: Session,
    pub memory: ShortTermMemory,
}

impl Agent {
    pub fn new(
        provider: Arc<dyn Provider>,
        scene: Scene,
        cache: Arc<Store>,
        clock: Arc<dyn Clock>,
        config: CoordinatorConfig,
    ) -> anyhow::Result<Agent> {
        let fleet = Fleet::new(scene)?;
        let registry = Arc::new(standard_registry(&fleet));
        Ok(Agent {
            provider,
            fleet: SharedFleet::new(fleet),
            registry,
            cache,
            clock,
            prompts: PromptConfig::default(),
            config,
        })
    }

    /// Build everything a config names: scene, provider and script store.
    pub fn from_config(config: &Config, clock: Arc<dyn Clock>) -> anyhow::Result<Agent> {
        let scene = resolve_scene(&config.scene_source())?;
        let provider = build_provider(config)?;
        let cache: Arc<Store> = match &config.cache_path {
            Some(p) => Arc::new(PersistentCache::open(p, config.tau)?),
            None => Arc::new(SharedCache::new(config.tau)),
        };
        let mut agent = Agent::new(provider, scene, cache, clock, config.coordinator())?;
        agent.prompts = config.prompts.clone();
        Ok(agent)
    }

    pub fn conversation(&self, id: &str, user_name: &str) -> Conversation {
        let environment = self.fleet.read(|f| f.environment_info());
        let docs = self.registry.descriptors().cloned().collect();
        Conversation {
            session: Session {
                id: id.into(),
                user_name: user_name.into(),
                created_at_ms: self.clock.now_ms(),
                state: SessionState::Idle,
            },
            memory: ShortTermMemory::new(environment, docs),
        }
    }

    pub fn handle(&self, conv: &mut Conversation, sink: &mut dyn EventSink, message: ChatMessage) -> TurnOutcome {
        let mut devices = self.fleet.clone();
        let mut svc = Services {
            provider: &*self.provider,
            registry: &self.registry,
            devices: &mut devices,
            cache: &*self.cache,
            clock: &*self.clock,
            prompts: &self.prompts,
            config: &self.config,
        };
        handle_user_message(&mut svc, &mut conv.session, &mut conv.memory, sink, message)
    }

    /// Record `text` as the user's message and handle it right away.
    pub fn send(&self, conv: &mut Conversation, sink: &mut dyn EventSink, text: &str) -> TurnOutcome {
        let message = user_message(&conv.session, sink, text, &*self.clock);
        self.handle(conv, sink, message)
    }
}

pub fn resolve_scene(source: &SceneSource) -> anyhow::Result<Scene> {
    match source {
        SceneSource::Bundled(name) => hearth_core::fixtures::scene_by_name(name)
            .with_context(|| format!("no bundled scene named `{name}`"))?
            .map_err(Into::into),
        SceneSource::File(path) => load_scene(path),
    }
}

pub fn build_provider(config: &Config) -> anyhow::Result<Arc<dyn Provider>> {
    Ok(match config.provider {
        ProviderKind::Mock => {
            let mut mock = match &config.mock_rules {
                Some(p) => MockProvider::from_path(p)?,
                None => MockProvider::bundled(),
            };
            for p in config.mock_overlays.iter().rev() {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                mock = mock.with_overlay(&text).with_context(|| format!("in {}", p.display()))?;
            }
            Arc::new(mock)
        }
        ProviderKind::Live => Arc::new(LiveProvider::new(config.live.clone().with_env())),
    })
}
