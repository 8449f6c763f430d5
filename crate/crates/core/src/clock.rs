//! Time sources. The executor and coordinator only read time through
//! [`Clock`], so runs can be replayed on a virtual clock.

use core::sync::atomic::{AtomicU64, Ordering};

pub trait Clock: Send + Sync {
    /// Milliseconds since an arbitrary epoch.
    fn now_ms(&self) -> u64;
    /// Wait for `ms` milliseconds (simulated device latency).
    fn sleep_ms(&self, ms: u64);
}

/// Virtual clock: `sleep_ms` advances time instantly.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: AtomicU64,
}

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock { now: AtomicU64::new(start_ms) }
    }

    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }
}
