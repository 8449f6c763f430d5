//! Process side of the home agent: language-model providers, the on-disk
//! script store, configuration, the HTTP gateway and scenario replays.

pub mod agent;
pub mod config;
pub mod devices;
pub mod gateway;
pub mod live;
pub mod mock;
pub mod scenario;
pub mod store;

pub use agent::{Agent, Conversation};
pub use config::Config;
