//! Long-term memory on disk: one JSON object per line, later lines win.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::Context;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use hearth_core::memory::{CacheHit, ScriptCache, ScriptCacheEntry, ScriptStore, StoreError, VerifiedProgram};
use hearth_core::program::FsmProgram;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    summary: String,
    /// Little-endian f32 components, base64. Informational: embeddings are
    /// recomputed from `summary` on load.
    embedding: String,
    program: FsmProgram,
    created_at_ms: u64,
    use_count: u64,
    last_used_ms: u64,
}

pub fn encode_embedding(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| (*x as f32).to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_embedding(text: &str) -> anyhow::Result<Vec<f32>> {
    let bytes = STANDARD.decode(text)?;
    anyhow::ensure!(bytes.len() % 4 == 0, "embedding byte length {} is not a multiple of 4", bytes.len());
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

impl Record {
    fn from_entry(e: &ScriptCacheEntry) -> Record {
        Record {
            summary: e.summary.clone(),
            embedding: encode_embedding(&e.embedding),
            program: e.program.clone(),
            created_at_ms: e.created_at_ms,
            use_count: e.use_count,
            last_used_ms: e.last_used_ms,
        }
    }

    fn into_entry(self) -> ScriptCacheEntry {
        ScriptCacheEntry {
            summary: self.summary,
            embedding: Vec::new(),
            program: self.program,
            created_at_ms: self.created_at_ms,
            use_count: self.use_count,
            last_used_ms: self.last_used_ms,
        }
    }
}

/// Script cache backed by a JSON-lines file. Every store and every hit
/// appends a record; opening the file compacts it to one line per entry.
#[derive(Debug)]
pub struct PersistentCache {
    path: PathBuf,
    inner: Mutex<ScriptCache>,
}

impl PersistentCache {
    pub fn open(path: impl Into<PathBuf>, tau: f64) -> anyhow::Result<PersistentCache> {
        let path = path.into();
        let mut cache = ScriptCache::new(tau);
        let mut lines = 0;
        if path.exists() {
            let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                lines += 1;
                let record: Record = serde_json::from_str(&line)
                    .with_context(|| format!("{}:{}: bad cache record", path.display(), i + 1))?;
                decode_embedding(&record.embedding)
                    .with_context(|| format!("{}:{}: bad embedding", path.display(), i + 1))?;
                cache.restore(record.into_entry());
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        let store = PersistentCache { path, inner: Mutex::new(cache) };
        if lines > store.len() {
            store.compact()?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entries(&self) -> Vec<ScriptCacheEntry> {
        self.lock().entries().to_vec()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ScriptCache> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Rewrite the file with exactly one line per entry.
    pub fn compact(&self) -> anyhow::Result<()> {
        let cache = self.lock();
        let tmp = self.path.with_extension("jsonl.tmp");
        {
            let mut f = File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?;
            for e in cache.entries() {
                writeln!(f, "{}", serde_json::to_string(&Record::from_entry(e))?)?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        Ok(())
    }

    fn append(&self, entry: &ScriptCacheEntry) -> Result<(), StoreError> {
        let line = serde_json::to_string(&Record::from_entry(entry)).map_err(|e| StoreError(e.to_string()))?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| StoreError(format!("{}: {e}", self.path.display())))?;
        writeln!(f, "{line}").map_err(|e| StoreError(format!("{}: {e}", self.path.display())))
    }
}

impl ScriptStore for PersistentCache {
    fn lookup(&self, summary: &str, now_ms: u64) -> Option<CacheHit> {
        let hit = self.lock().lookup(summary, now_ms)?;
        if let Err(e) = self.append(&hit.entry) {
            log::warn!("could not record cache use: {e}");
        }
        Some(hit)
    }

    fn store(&self, summary: &str, program: VerifiedProgram, now_ms: u64) -> Result<ScriptCacheEntry, StoreError> {
        let entry = self.lock().store(summary, program, now_ms).clone();
        self.append(&entry)?;
        Ok(entry)
    }

    fn len(&self) -> usize {
        self.lock().entries().len()
    }
}

/// In-memory store shareable across threads.
#[derive(Debug, Default)]
pub struct SharedCache(Mutex<ScriptCache>);

impl SharedCache {
    pub fn new(tau: f64) -> SharedCache {
        SharedCache(Mutex::new(ScriptCache::new(tau)))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ScriptCache> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl ScriptStore for SharedCache {
    fn lookup(&self, summary: &str, now_ms: u64) -> Option<CacheHit> {
        self.lock().lookup(summary, now_ms)
    }

    fn store(&self, summary: &str, program: VerifiedProgram, now_ms: u64) -> Result<ScriptCacheEntry, StoreError> {
        Ok(self.lock().store(summary, program, now_ms).clone())
    }

    fn len(&self) -> usize {
        self.lock().entries().len()
    }
}
