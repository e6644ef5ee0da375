//! Deterministic token-hash embeddings.
//!
//! Texts are lowercased, split on non-alphanumeric characters, and each
//! token is FNV-1a hashed into one of [`EMBED_DIM`] buckets; the bucket
//! counts are L2-normalized. Crude, but fully deterministic and
//! platform-independent, which is what the mock and embedding backends
//! need: similarity fixtures stay stable across runs and machines.

use crate::error::{Error, Result};

/// Dimension of every embedding produced in this crate.
pub const EMBED_DIM: usize = 64;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(token: &str) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in token.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Embed a text as an L2-normalized bag-of-words histogram.
///
/// A text with no alphanumeric tokens embeds to the zero vector; callers
/// that go on to compare such vectors get the zero-norm error from
/// [`cosine`] and must fall back explicitly.
pub fn hash_embed(text: &str) -> Vec<f64> {
    let mut buckets = vec![0.0f64; EMBED_DIM];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let token = token.to_lowercase();
        let bucket = (fnv1a(&token) % EMBED_DIM as u64) as usize;
        buckets[bucket] += 1.0;
    }
    let norm = buckets.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut buckets {
            *x /= norm;
        }
    }
    buckets
}

/// Cosine similarity of two equal-dimension vectors.
///
/// Errors on a dimension mismatch or when either vector has zero norm
/// (similarity is undefined there, and silently returning 0 would make
/// "not similar" indistinguishable from "no content").
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "embedding dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let norm_u = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_u == 0.0 || norm_v == 0.0 {
        return Err(Error::Argument(
            "undefined similarity: zero-norm vector".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(dot / (norm_u * norm_v))
}

/// Embedding-similarity text equivalence at threshold `theta`.
///
/// Zero-norm texts (nothing tokenizable) fall back to exact string
/// equality so degenerate inputs still compare reflexively.
pub fn texts_equivalent(a: &str, b: &str, theta: f64) -> bool {
    let ua = hash_embed(a);
    let ub = hash_embed(b);
    match cosine(&ua, &ub) {
        Ok(sim) => sim >= theta,
        Err(_) => a == b,
    }
}
