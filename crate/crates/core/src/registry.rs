//! The API registry: descriptors plus handlers over a device context `C`.
//!
//! Handlers receive `&mut C` so the same registry works over an owned
//! [`crate::sim::Fleet`] in tests and over a lock-per-call handle in a
//! server.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::program::ApiFunctionDescriptor;
use crate::value::Value;

/// Error raised by a handler. The descriptor's policy decides what the
/// executor does with it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct ApiError {
    pub message: String,
}

impl ApiError {
    pub fn new(message: impl Into<String>) -> Self {
        ApiError { message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CallError {
    #[error("unknown function {owner}.{function}")]
    UnknownFunction { owner: String, function: String },
    #[error("{owner}.{function} expects {expected} argument(s), got {got}")]
    ArityMismatch { owner: String, function: String, expected: usize, got: usize },
    #[error("{owner}.{function} argument `{param}` expects {expected}, got {got}")]
    KindMismatch { owner: String, function: String, param: String, expected: String, got: String },
    #[error("{owner}.{function} failed: {error}")]
    Handler { owner: String, function: String, error: ApiError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{owner}.{name} is already registered")]
pub struct DuplicateApi {
    pub owner: String,
    pub name: String,
}

pub type Handler<C> = Box<dyn Fn(&mut C, &[Value]) -> Result<Value, ApiError> + Send + Sync>;
pub type Liveness<C> = Box<dyn Fn(&C) -> bool + Send + Sync>;
pub type Snapshot<C> = Box<dyn Fn(&C) -> serde_json::Value + Send + Sync>;

struct Entry<C> {
    descriptor: ApiFunctionDescriptor,
    handler: Handler<C>,
}

pub struct Registry<C> {
    entries: Vec<Entry<C>>,
    liveness: BTreeMap<String, Liveness<C>>,
    snapshot: Option<Snapshot<C>>,
}

impl<C> Default for Registry<C> {
    fn default() -> Self {
        Registry { entries: Vec::new(), liveness: BTreeMap::new(), snapshot: None }
    }
}

impl<C> core::fmt::Debug for Registry<C> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Registry")
            .field("functions", &self.entries.iter().map(|e| e.descriptor.signature()).collect::<Vec<_>>())
            .field("monitored", &self.liveness.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<C> Registry<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_api<F>(&mut self, descriptor: ApiFunctionDescriptor, handler: F) -> Result<(), DuplicateApi>
    where
        F: Fn(&mut C, &[Value]) -> Result<Value, ApiError> + Send + Sync + 'static,
    {
        if self.descriptor(&descriptor.owner, &descriptor.name).is_some() {
            return Err(DuplicateApi { owner: descriptor.owner, name: descriptor.name });
        }
        self.entries.push(Entry { descriptor, handler: Box::new(handler) });
        Ok(())
    }

    /// Attach a liveness probe to an owner; owners without one are treated as
    /// always alive.
    pub fn register_liveness<F>(&mut self, owner: &str, probe: F)
    where
        F: Fn(&C) -> bool + Send + Sync + 'static,
    {
        self.liveness.insert(owner.to_string(), Box::new(probe));
    }

    pub fn set_snapshot<F>(&mut self, f: F)
    where
        F: Fn(&C) -> serde_json::Value + Send + Sync + 'static,
    {
        self.snapshot = Some(Box::new(f));
    }

    pub fn snapshot(&self, ctx: &C) -> Option<serde_json::Value> {
        self.snapshot.as_ref().map(|f| f(ctx))
    }

    pub fn descriptor(&self, owner: &str, function: &str) -> Option<&ApiFunctionDescriptor> {
        self.entries
            .iter()
            .map(|e| &e.descriptor)
            .find(|d| d.owner == owner && d.name == function)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ApiFunctionDescriptor> {
        self.entries.iter().map(|e| &e.descriptor)
    }

    pub fn has_owner(&self, owner: &str) -> bool {
        self.entries.iter().any(|e| e.descriptor.owner == owner)
    }

    /// Dispatch with arity and kind checks against the descriptor.
    pub fn call_api(&self, ctx: &mut C, owner: &str, function: &str, args: &[Value]) -> Result<Value, CallError> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.descriptor.owner == owner && e.descriptor.name == function)
            .ok_or_else(|| CallError::UnknownFunction { owner: owner.into(), function: function.into() })?;
        let d = &entry.descriptor;
        if d.params.len() != args.len() {
            return Err(CallError::ArityMismatch {
                owner: owner.into(),
                function: function.into(),
                expected: d.params.len(),
                got: args.len(),
            });
        }
        for (param, arg) in d.params.iter().zip(args) {
            if !param.kind.accepts(arg.kind()) {
                return Err(CallError::KindMismatch {
                    owner: owner.into(),
                    function: function.into(),
                    param: param.name.clone(),
                    expected: param.kind.name().into(),
                    got: arg.kind().name().into(),
                });
            }
        }
        (entry.handler)(ctx, args).map_err(|error| CallError::Handler {
            owner: owner.into(),
            function: function.into(),
            error,
        })
    }

    /// Liveness for each requested id that the registry knows; unknown ids
    /// are absent from the result.
    pub fn ping_devices<'a>(&self, ctx: &C, ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, bool> {
        let mut out = BTreeMap::new();
        for id in ids {
            if let Some(probe) = self.liveness.get(id) {
                out.insert(id.to_string(), probe(ctx));
            } else if self.has_owner(id) {
                out.insert(id.to_string(), true);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Kind;
    use alloc::vec;

    fn registry() -> Registry<u32> {
        let mut r = Registry::new();
        r.register_api(
            ApiFunctionDescriptor::new("counter", "add", &[("n", Kind::Number)], Kind::Number),
            |c: &mut u32, args: &[Value]| {
                *c += args[0].as_f64().unwrap() as u32;
                Ok(Value::Number(*c as f64))
            },
        )
        .unwrap();
        r.register_liveness("counter", |c: &u32| *c < 100);
        r
    }

    #[test]
    fn dispatch_and_errors() {
        let r = registry();
        let mut ctx = 1u32;
        assert_eq!(r.call_api(&mut ctx, "counter", "add", &[Value::Number(2.0)]), Ok(Value::Number(3.0)));
        assert!(matches!(
            r.call_api(&mut ctx, "counter", "sub", &[]),
            Err(CallError::UnknownFunction { .. })
        ));
        assert!(matches!(r.call_api(&mut ctx, "counter", "add", &[]), Err(CallError::ArityMismatch { .. })));
        assert!(matches!(
            r.call_api(&mut ctx, "counter", "add", &[Value::str("x")]),
            Err(CallError::KindMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_registration_rejected() {
        let mut r = registry();
        let again = r.register_api(
            ApiFunctionDescriptor::new("counter", "add", &[], Kind::Null),
            |_: &mut u32, _: &[Value]| Ok(Value::Null),
        );
        assert!(again.is_err());
    }

    #[test]
    fn ping_reports_known_owners_only() {
        let r = registry();
        let alive = r.ping_devices(&5, vec!["counter", "ghost"]);
        assert_eq!(alive.get("counter"), Some(&true));
        assert!(!alive.contains_key("ghost"));
        assert_eq!(r.ping_devices(&500, ["counter"]).get("counter"), Some(&false));
    }
}
