//! The semantic capability interface and its implementations.
//!
//! A [`SemanticBackend`] supplies the six capabilities semantic operators
//! are built from: boolean predicates, row-to-text maps, text equivalence,
//! relevance scores, list aggregation, and embeddings. Three
//! implementations ship: a deterministic rule-driven mock, a pure
//! embedding-similarity backend, and an HTTP LLM client.

pub mod embed;
pub mod llm;
pub mod mock;
pub mod similarity;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};

pub use embed::{cosine, hash_embed, EMBED_DIM};
pub use llm::{llm_complete, LlmBackend, LlmEndpointConfig};
pub use mock::{MockBackend, MockRuleSet};
pub use similarity::EmbeddingBackend;

/// Which capability a logged call went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Predicate,
    Map,
    Equivalent,
    Score,
    Aggregate,
    Embed,
    /// Raw transport completion, outside the six semantic capabilities.
    Complete,
}

const SEMANTIC_CAPABILITIES: usize = 6;

/// Counter snapshot for the six semantic capabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CallCounts {
    pub predicate: u64,
    pub map: u64,
    pub equivalent: u64,
    pub score: u64,
    pub aggregate: u64,
    pub embed: u64,
}

impl CallCounts {
    pub fn total(&self) -> u64 {
        self.predicate + self.map + self.equivalent + self.score + self.aggregate + self.embed
    }

    /// Counter difference against an earlier snapshot of the same log.
    pub fn since(&self, earlier: &CallCounts) -> CallCounts {
        CallCounts {
            predicate: self.predicate.saturating_sub(earlier.predicate),
            map: self.map.saturating_sub(earlier.map),
            equivalent: self.equivalent.saturating_sub(earlier.equivalent),
            score: self.score.saturating_sub(earlier.score),
            aggregate: self.aggregate.saturating_sub(earlier.aggregate),
            embed: self.embed.saturating_sub(earlier.embed),
        }
    }
}

/// One logged call.
#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    pub seq: u64,
    pub capability: Capability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub latency_micros: u64,
}

/// Internally synchronized call log. Every semantic call a backend serves
/// increments exactly one capability counter and appends one record, so
/// executor-level call accounting can be audited against it.
#[derive(Debug, Default)]
pub struct CallLog {
    counters: [AtomicU64; SEMANTIC_CAPABILITIES],
    complete: AtomicU64,
    entries: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> CallLog {
        CallLog::default()
    }

    pub fn record(&self, capability: Capability, template: Option<&str>, latency_micros: u64) {
        match capability {
            Capability::Complete => {
                self.complete.fetch_add(1, Ordering::Relaxed);
            }
            other => {
                self.counters[other as usize].fetch_add(1, Ordering::Relaxed);
            }
        }
        let mut entries = self.entries.lock().expect("call log poisoned");
        let seq = entries.len() as u64;
        entries.push(CallRecord {
            seq,
            capability,
            template: template.map(str::to_string),
            latency_micros,
        });
    }

    /// Snapshot of the six semantic-capability counters.
    pub fn counts(&self) -> CallCounts {
        CallCounts {
            predicate: self.counters[Capability::Predicate as usize].load(Ordering::Relaxed),
            map: self.counters[Capability::Map as usize].load(Ordering::Relaxed),
            equivalent: self.counters[Capability::Equivalent as usize].load(Ordering::Relaxed),
            score: self.counters[Capability::Score as usize].load(Ordering::Relaxed),
            aggregate: self.counters[Capability::Aggregate as usize].load(Ordering::Relaxed),
            embed: self.counters[Capability::Embed as usize].load(Ordering::Relaxed),
        }
    }

    pub fn complete_count(&self) -> u64 {
        self.complete.load(Ordering::Relaxed)
    }

    /// Dump every record as JSON lines.
    pub fn to_jsonl(&self) -> String {
        let entries = self.entries.lock().expect("call log poisoned");
        let mut out = String::new();
        for record in entries.iter() {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// The capability interface every backend implements.
///
/// `row_rendering` is the textual view of the row the call is about:
/// either the columns a template's placeholders reference, or the whole
/// row as `alias.column: value` lines when the template names none. The
/// raw template travels separately so rule- or prompt-based backends can
/// inspect it.
///
/// Implementations must be safe for concurrent invocation; the executor
/// fans out independent calls within one operator.
pub trait SemanticBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Evaluate a boolean semantic predicate over one rendered row.
    fn predicate(&self, template: &str, row_rendering: &str) -> Result<bool>;

    /// Transform one rendered row into a text value.
    fn map(&self, template: &str, row_rendering: &str) -> Result<String>;

    /// Similarity-based equality. Reflexive and symmetric by construction;
    /// transitivity is not guaranteed.
    fn equivalent(&self, a: &str, b: &str) -> Result<bool>;

    /// Relevance of one rendered row to the template, in [0, 1].
    fn score(&self, template: &str, row_rendering: &str) -> Result<f64>;

    /// Aggregate a list of rendered values into one text.
    fn aggregate(&self, template: &str, values: &[String]) -> Result<String>;

    /// Fixed-dimension embedding of a text.
    fn embed(&self, text: &str) -> Result<Vec<f64>>;

    fn call_log(&self) -> &CallLog;
}

pub(crate) fn require_template(template: &str) -> Result<()> {
    if template.trim().is_empty() {
        Err(Error::Argument("empty template".into()))
    } else {
        Ok(())
    }
}
