//! Orchestration core for a chat-driven home agent.
//!
//! A language model turns user instructions into finite-state-machine
//! programs ([`program::FsmProgram`]) through a staged pipeline; the
//! [`coordinator`] filters dialog turns, consults the script cache in
//! [`memory`], validates and runs programs with the [`executor`] against the
//! simulated devices in [`sim`] and the mock perception modules in
//! [`vision`], then reports back.
//!
//! The crate only needs `alloc`. IO, transports, persistence and the process
//! entry points live in the `hearth` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod clock;
pub mod coordinator;
pub mod executor;
pub mod expr;
pub mod fixtures;
pub mod graph;
pub mod llm;
pub mod memory;
pub mod pipeline;
pub mod program;
pub mod registry;
pub mod session;
pub mod sim;
pub mod validate;
pub mod value;
pub mod vision;

pub use executor::{run, ExecutionReport, ExecutionStatus, RunOptions};
pub use program::{ApiCall, FsmProgram, FsmSketch};
pub use registry::Registry;
pub use value::{Kind, Value};
