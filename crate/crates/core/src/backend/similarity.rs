//! Embedding-similarity backend: every capability reduced to cosine
//! geometry over the deterministic token-hash embedder.
//!
//! No rules and no network. Weaker than the mock at following intent, but
//! honestly deterministic, which makes it the reference implementation
//! for the similarity-defined operators (equivalence, dedup, grouping).

use std::time::Instant;

use crate::backend::embed::{cosine, hash_embed, texts_equivalent};
use crate::backend::{require_template, CallLog, Capability, SemanticBackend};
use crate::error::Result;

pub struct EmbeddingBackend {
    theta: f64,
    log: CallLog,
}

impl EmbeddingBackend {
    pub fn new(theta: f64) -> EmbeddingBackend {
        EmbeddingBackend {
            theta,
            log: CallLog::new(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Cosine of two texts, 0.0 when either side has nothing to embed.
    fn sim(a: &str, b: &str) -> f64 {
        cosine(&hash_embed(a), &hash_embed(b)).unwrap_or(0.0)
    }
}

impl Default for EmbeddingBackend {
    fn default() -> EmbeddingBackend {
        EmbeddingBackend::new(0.8)
    }
}

impl SemanticBackend for EmbeddingBackend {
    fn name(&self) -> &str {
        "embedding"
    }

    /// True iff the rendering's embedding is within θ of the template's.
    fn predicate(&self, template: &str, row_rendering: &str) -> Result<bool> {
        require_template(template)?;
        let started = Instant::now();
        let verdict = Self::sim(template, row_rendering) >= self.theta;
        self.log.record(
            Capability::Predicate,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(verdict)
    }

    /// The rendered value most similar to the template; ties and
    /// unembeddable templates resolve to the earliest value.
    fn map(&self, template: &str, row_rendering: &str) -> Result<String> {
        require_template(template)?;
        let started = Instant::now();
        let mut best: Option<(f64, &str)> = None;
        for line in row_rendering.lines() {
            let value = match line.split_once(": ") {
                Some((_, v)) => v,
                None => line,
            };
            if value.trim().is_empty() {
                continue;
            }
            let s = Self::sim(template, value);
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, value));
            }
        }
        let out = best.map(|(_, v)| v.to_string()).unwrap_or_default();
        self.log.record(
            Capability::Map,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(out)
    }

    fn equivalent(&self, a: &str, b: &str) -> Result<bool> {
        let started = Instant::now();
        let verdict = texts_equivalent(a, b, self.theta);
        self.log.record(
            Capability::Equivalent,
            None,
            started.elapsed().as_micros() as u64,
        );
        Ok(verdict)
    }

    /// Cosine similarity to the template, clamped into [0, 1].
    fn score(&self, template: &str, row_rendering: &str) -> Result<f64> {
        require_template(template)?;
        let started = Instant::now();
        let score = Self::sim(template, row_rendering).clamp(0.0, 1.0);
        self.log.record(
            Capability::Score,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(score)
    }

    /// The medoid value: the one nearest the centroid of all values.
    /// Ties resolve to the earliest value.
    fn aggregate(&self, template: &str, values: &[String]) -> Result<String> {
        require_template(template)?;
        let started = Instant::now();
        let out = if values.is_empty() {
            String::new()
        } else {
            let embeddings: Vec<Vec<f64>> = values.iter().map(|v| hash_embed(v)).collect();
            let dim = embeddings[0].len();
            let mut centroid = vec![0.0f64; dim];
            for e in &embeddings {
                for (c, x) in centroid.iter_mut().zip(e) {
                    *c += x;
                }
            }
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (i, e) in embeddings.iter().enumerate() {
                let s = cosine(&centroid, e).unwrap_or(0.0);
                if s > best.0 {
                    best = (s, i);
                }
            }
            values[best.1].clone()
        };
        self.log.record(
            Capability::Aggregate,
            Some(template),
            started.elapsed().as_micros() as u64,
        );
        Ok(out)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let started = Instant::now();
        let vector = hash_embed(text);
        self.log.record(
            Capability::Embed,
            None,
            started.elapsed().as_micros() as u64,
        );
        Ok(vector)
    }

    fn call_log(&self) -> &CallLog {
        &self.log
    }
}
