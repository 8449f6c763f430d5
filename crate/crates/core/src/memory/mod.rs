//! Short-term context and the long-term script cache.

pub mod cache;
pub mod context;
pub mod embed;

pub use cache::{CacheHit, NotVerified, ScriptCache, ScriptCacheEntry, ScriptStore, StoreError, VerifiedProgram, DEFAULT_TAU};
pub use context::{
    render_api_docs, ContextSnapshot, ContextUpdate, DeviceDescriptor, EnvironmentInfo, Location, ModuleDescriptor,
    ResultEntry, ShortTermMemory,
};
pub use embed::{similarity, tokenize, Embedder, HashingEmbedder, EMBEDDING_DIM};
