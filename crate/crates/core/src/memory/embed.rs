//! Text embeddings for cache keys and cosine similarity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;
use xxhash_rust::xxh64::xxh64;

pub const EMBEDDING_DIM: usize = 256;

/// Fixed seed so hashes (and stored embeddings) agree across processes.
pub const HASH_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Maps text to a vector; implementations must be deterministic.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Bucket index and sign of one token under the signed feature hash.
pub fn token_slot(token: &str, dim: usize) -> (usize, f64) {
    let h = xxh64(token.as_bytes(), HASH_SEED);
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h % dim as u64) as usize, sign)
}

/// Signed feature hashing over tokens, L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(EMBEDDING_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            let (slot, sign) = token_slot(&token, self.dim);
            v[slot] += sign;
        }
        normalize(&mut v);
        v
    }
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Scale to unit length; zero vectors stay zero.
pub fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("vectors have different dimensions ({left} vs {right})")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Cosine similarity in [-1, 1]; 0 when either side is the zero vector.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64, DimensionMismatch> {
    if a.len() != b.len() {
        return Err(DimensionMismatch { left: a.len(), right: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
