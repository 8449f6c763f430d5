//! Long-term memory: verified programs keyed by embedded task summaries.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{similarity, Embedder, HashingEmbedder};
use crate::executor::ExecutionReport;
use crate::program::FsmProgram;
use crate::validate::ValidationReport;

pub const DEFAULT_TAU: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptCacheEntry {
    pub summary: String,
    pub embedding: Vec<f64>,
    pub program: FsmProgram,
    pub created_at_ms: u64,
    pub use_count: u64,
    pub last_used_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheHit {
    pub entry: ScriptCacheEntry,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotVerified {
    #[error("program did not pass validation")]
    Invalid,
    #[error("program has not completed a successful execution")]
    NotExecuted,
}

/// A program that passed validation and ran to success at least once. The
/// only way into the cache.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedProgram(FsmProgram);

impl VerifiedProgram {
    pub fn new(program: FsmProgram, validation: &ValidationReport, run: &ExecutionReport) -> Result<Self, NotVerified> {
        if !validation.is_valid() {
            return Err(NotVerified::Invalid);
        }
        if !run.status.is_success() {
            return Err(NotVerified::NotExecuted);
        }
        Ok(VerifiedProgram(program))
    }

    pub fn program(&self) -> &FsmProgram {
        &self.0
    }

    pub fn into_program(self) -> FsmProgram {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script store failure: {0}")]
pub struct StoreError(pub String);

/// Shared long-term memory as seen by the coordinator. Methods take `&self`
/// so implementations decide how concurrent sessions are serialized.
pub trait ScriptStore {
    fn lookup(&self, summary: &str, now_ms: u64) -> Option<CacheHit>;
    fn store(&self, summary: &str, program: VerifiedProgram, now_ms: u64) -> Result<ScriptCacheEntry, StoreError>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory cache with a linear-scan lookup.
pub struct ScriptCache {
    entries: Vec<ScriptCacheEntry>,
    embedder: Box<dyn Embedder>,
    tau: f64,
}

impl core::fmt::Debug for ScriptCache {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ScriptCache")
            .field("entries", &self.entries.len())
            .field("tau", &self.tau)
            .finish()
    }
}

impl Default for ScriptCache {
    fn default() -> Self {
        ScriptCache::new(DEFAULT_TAU)
    }
}

impl ScriptCache {
    pub fn new(tau: f64) -> Self {
        Self::with_embedder(tau, Box::new(HashingEmbedder::default()))
    }

    pub fn with_embedder(tau: f64, embedder: Box<dyn Embedder>) -> Self {
        ScriptCache { entries: Vec::new(), embedder, tau }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        self.embedder.embed(text)
    }

    pub fn entries(&self) -> &[ScriptCacheEntry] {
        &self.entries
    }

    /// Best match without touching usage stats.
    pub fn best_match(&self, summary: &str) -> Option<(usize, f64)> {
        let query = self.embed(summary);
        let tokens = super::embed::tokenize(summary);
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            // Identical token sequences score 1 even when hash collisions
            // cancel the vector out.
            let score = if super::embed::tokenize(&e.summary) == tokens {
                1.0
            } else {
                similarity(&query, &e.embedding).unwrap_or(0.0)
            };
            let better = match best {
                None => true,
                Some((j, s)) => score > s || (score == s && e.last_used_ms > self.entries[j].last_used_ms),
            };
            if better {
                best = Some((i, score));
            }
        }
        best
    }

    /// Highest-similarity entry if it scores at least τ; ties go to the most
    /// recently used. A hit bumps `use_count` and `last_used_ms`.
    pub fn lookup(&mut self, summary: &str, now_ms: u64) -> Option<CacheHit> {
        let (i, score) = self.best_match(summary)?;
        if score < self.tau {
            return None;
        }
        let entry = &mut self.entries[i];
        entry.use_count += 1;
        entry.last_used_ms = entry.last_used_ms.max(now_ms);
        Some(CacheHit { entry: entry.clone(), score })
    }

    /// Insert, or replace the entry with the exact same summary while
    /// keeping its usage history.
    pub fn store(&mut self, summary: &str, program: VerifiedProgram, now_ms: u64) -> &ScriptCacheEntry {
        let embedding = self.embed(summary);
        let program = program.into_program();
        if let Some(i) = self.entries.iter().position(|e| e.summary == summary) {
            let e = &mut self.entries[i];
            e.program = program;
            e.embedding = embedding;
            e.last_used_ms = e.last_used_ms.max(now_ms);
            return &self.entries[i];
        }
        self.entries.push(ScriptCacheEntry {
            summary: summary.into(),
            embedding,
            program,
            created_at_ms: now_ms,
            use_count: 0,
            last_used_ms: now_ms,
        });
        self.entries.last().expect("just pushed")
    }

    /// Put back a previously persisted entry (replacing one with the same
    /// summary). The embedding is recomputed so scores stay exact.
    pub fn restore(&mut self, mut entry: ScriptCacheEntry) {
        entry.embedding = self.embed(&entry.summary);
        match self.entries.iter().position(|e| e.summary == entry.summary) {
            Some(i) => self.entries[i] = entry,
            None => self.entries.push(entry),
        }
    }
}

impl ScriptStore for RefCell<ScriptCache> {
    fn lookup(&self, summary: &str, now_ms: u64) -> Option<CacheHit> {
        self.borrow_mut().lookup(summary, now_ms)
    }

    fn store(&self, summary: &str, program: VerifiedProgram, now_ms: u64) -> Result<ScriptCacheEntry, StoreError> {
        Ok(self.borrow_mut().store(summary, program, now_ms).clone())
    }

    fn len(&self) -> usize {
        self.borrow().entries.len()
    }
}
