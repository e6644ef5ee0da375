//! HTTP LLM backend speaking the de-facto chat-completion JSON protocol.
//!
//! Requests are temperature-0 with constrained-output framing ("return
//! True or False") so answers parse deterministically. Transport failures
//! retry with exponential backoff up to the configured cap; timeouts,
//! HTTP status failures, and malformed bodies surface as distinct error
//! kinds. A process-local semaphore enforces the request concurrency cap
//! so executor fan-out cannot stampede an endpoint.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::backend::embed::{hash_embed, texts_equivalent};
use crate::backend::{require_template, CallLog, Capability, SemanticBackend};
use crate::error::{Error, Result, TransportErrorKind};

const RETRY_BASE_MS: u64 = 50;

const PREDICATE_SYSTEM: &str = "You evaluate a boolean condition about one row of data. \
     Respond with exactly one word: True or False.";
const MAP_SYSTEM: &str = "You transform one row of data into a short text according to \
     the instruction. Respond with the text only, no preamble.";
const SCORE_SYSTEM: &str = "You rate how well one row of data satisfies the instruction. \
     Respond with a single decimal number between 0 and 1.";
const AGGREGATE_SYSTEM: &str = "You aggregate a list of values into one short text \
     according to the instruction. Respond with the text only, no preamble.";
const JUDGE_SYSTEM: &str = "You decide whether two texts mean the same thing. \
     Respond with exactly one word: True or False.";

/// Connection settings for a chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct LlmEndpointConfig {
    /// Full completion URL, e.g. `http://127.0.0.1:8080/v1/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token; `None`
    /// for unauthenticated endpoints.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    /// Additional attempts after the first failure.
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// Maximum in-flight requests from this process.
    pub concurrency: usize,
}

impl Default for LlmEndpointConfig {
    fn default() -> LlmEndpointConfig {
        LlmEndpointConfig {
            base_url: String::new(),
            model: "default".into(),
            api_key_env: None,
            temperature: 0.0,
            max_retries: 2,
            timeout_secs: 30,
            concurrency: 4,
        }
    }
}

/// How the LLM backend answers `equivalent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EquivalenceMode {
    /// Local token-hash embeddings at threshold θ (no network).
    #[default]
    Embedding,
    /// Ask the model for a True/False judgment.
    LlmJudge,
}

/// Counting semaphore: caps concurrent HTTP requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.sem.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.sem.available.notify_one();
    }
}

fn bearer_token(config: &LlmEndpointConfig) -> Result<Option<String>> {
    match &config.api_key_env {
        None => Ok(None),
        Some(var) => match std::env::var(var) {
            Ok(key) => Ok(Some(key)),
            Err(_) => Err(Error::Config(format!(
                "API key environment variable {var} is not set"
            ))),
        },
    }
}

fn classify(err: &ureq::Error) -> (TransportErrorKind, bool) {
    match err {
        ureq::Error::StatusCode(code) => {
            let retryable = *code == 429 || *code >= 500;
            (TransportErrorKind::HttpStatus(*code), retryable)
        }
        ureq::Error::Timeout(_) => (TransportErrorKind::Timeout, true),
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            (TransportErrorKind::Connect, true)
        }
        _ => (TransportErrorKind::Connect, false),
    }
}

/// One request + retry loop; returns the assistant message text.
fn request_completion(config: &LlmEndpointConfig, system: &str, user: &str) -> Result<String> {
    if config.base_url.is_empty() {
        return Err(Error::Config("LLM endpoint URL is empty".into()));
    }
    let token = bearer_token(config)?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .build()
        .into();
    let body = json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
    });

    let attempts = config.max_retries.saturating_add(1);
    let mut last: Option<Error> = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(RETRY_BASE_MS << (attempt - 1)));
        }
        let mut request = agent.post(&config.base_url);
        if let Some(token) = &token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        match request.send_json(&body) {
            Ok(mut response) => {
                let parsed: Value = response.body_mut().read_json().map_err(|e| {
                    Error::Transport {
                        kind: TransportErrorKind::MalformedBody,
                        message: format!("response body is not JSON: {e}"),
                    }
                })?;
                let content = parsed
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Transport {
                        kind: TransportErrorKind::MalformedBody,
                        message: format!("no choices[0].message.content in: {parsed}"),
                    })?;
                return Ok(content.to_string());
            }
            Err(err) => {
                let (kind, retryable) = classify(&err);
                let wrapped = Error::Transport {
                    kind,
                    message: err.to_string(),
                };
                if !retryable {
                    return Err(wrapped);
                }
                last = Some(wrapped);
            }
        }
    }
    Err(last.unwrap_or_else(|| Error::Transport {
        kind: TransportErrorKind::Connect,
        message: "no attempt was made".into(),
    }))
}

/// Raw transport call: send one chat completion and log it under the
/// `complete` capability (count and latency).
pub fn llm_complete(
    config: &LlmEndpointConfig,
    system: &str,
    user: &str,
    log: &CallLog,
) -> Result<String> {
    let started = Instant::now();
    let outcome = request_completion(config, system, user);
    log.record(
        Capability::Complete,
        None,
        started.elapsed().as_micros() as u64,
    );
    outcome
}

/// Chat-completion [`SemanticBackend`].
pub struct LlmBackend {
    config: LlmEndpointConfig,
    theta: f64,
    equivalence: EquivalenceMode,
    semaphore: Semaphore,
    log: CallLog,
}

impl LlmBackend {
    pub fn new(config: LlmEndpointConfig, theta: f64) -> LlmBackend {
        let semaphore = Semaphore::new(config.concurrency);
        LlmBackend {
            config,
            theta,
            equivalence: EquivalenceMode::Embedding,
            semaphore,
            log: CallLog::new(),
        }
    }

    pub fn with_equivalence(mut self, mode: EquivalenceMode) -> LlmBackend {
        self.equivalence = mode;
        self
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.config
    }

    /// One capped, logged completion under the given capability.
    fn complete(&self, capability: Capability, system: &str, user: &str) -> Result<String> {
        let started = Instant::now();
        let outcome = {
            let _permit = self.semaphore.acquire();
            request_completion(&self.config, system, user)
        };
        let template = match capability {
            Capability::Equivalent | Capability::Embed => None,
            _ => Some(user.lines().next().unwrap_or_default()),
        };
        self.log.record(
            capability,
            template,
            started.elapsed().as_micros() as u64,
        );
        outcome
    }
}

fn parse_bool(raw: &str) -> Result<bool> {
    let norm = raw.trim().trim_end_matches(['.', '!']).to_lowercase();
    if norm == "true" || norm == "yes" {
        Ok(true)
    } else if norm == "false" || norm == "no" {
        Ok(false)
    } else {
        Err(Error::Unparseable(raw.to_string()))
    }
}

fn parse_unit_score(raw: &str) -> Result<f64> {
    let trimmed = raw.trim();
    match trimmed.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(Error::Unparseable(raw.to_string())),
    }
}

impl SemanticBackend for LlmBackend {
    fn name(&self) -> &str {
        "llm"
    }

    fn predicate(&self, template: &str, row_rendering: &str) -> Result<bool> {
        require_template(template)?;
        let user = format!("{template}\n\nRow:\n{row_rendering}");
        let raw = self.complete(Capability::Predicate, PREDICATE_SYSTEM, &user)?;
        parse_bool(&raw)
    }

    fn map(&self, template: &str, row_rendering: &str) -> Result<String> {
        require_template(template)?;
        let user = format!("{template}\n\nRow:\n{row_rendering}");
        self.complete(Capability::Map, MAP_SYSTEM, &user)
    }

    fn equivalent(&self, a: &str, b: &str) -> Result<bool> {
        match self.equivalence {
            EquivalenceMode::Embedding => {
                let started = Instant::now();
                let verdict = texts_equivalent(a, b, self.theta);
                self.log.record(
                    Capability::Equivalent,
                    None,
                    started.elapsed().as_micros() as u64,
                );
                Ok(verdict)
            }
            EquivalenceMode::LlmJudge => {
                let user = format!("Text A:\n{a}\n\nText B:\n{b}");
                let raw = self.complete(Capability::Equivalent, JUDGE_SYSTEM, &user)?;
                parse_bool(&raw)
            }
        }
    }

    fn score(&self, template: &str, row_rendering: &str) -> Result<f64> {
        require_template(template)?;
        let user = format!("{template}\n\nRow:\n{row_rendering}");
        let raw = self.complete(Capability::Score, SCORE_SYSTEM, &user)?;
        parse_unit_score(&raw)
    }

    fn aggregate(&self, template: &str, values: &[String]) -> Result<String> {
        require_template(template)?;
        let mut user = format!("{template}\n\nValues:\n");
        for value in values {
            user.push_str("- ");
            user.push_str(value);
            user.push('\n');
        }
        self.complete(Capability::Aggregate, AGGREGATE_SYSTEM, &user)
    }

    /// Embeddings stay local and deterministic; remote embedding
    /// endpoints are out of scope.
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bool_parsing_accepts_constrained_variants() {
        assert!(parse_bool("True").unwrap());
        assert!(parse_bool(" true.\n").unwrap());
        assert!(!parse_bool("FALSE").unwrap());
        assert!(!parse_bool("no").unwrap());
        assert!(parse_bool("definitely").is_err());
    }

    #[test]
    fn score_parsing_requires_unit_interval() {
        assert_eq!(parse_unit_score("0.75").unwrap(), 0.75);
        assert_eq!(parse_unit_score(" 1\n").unwrap(), 1.0);
        assert!(parse_unit_score("1.5").is_err());
        assert!(parse_unit_score("high").is_err());
    }

    #[test]
    fn missing_api_key_env_is_a_config_error() {
        let config = LlmEndpointConfig {
            base_url: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key_env: Some("SABER_TEST_KEY_THAT_IS_NOT_SET".into()),
            ..LlmEndpointConfig::default()
        };
        let err = request_completion(&config, "s", "u").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err:?}");
    }

    #[test]
    fn empty_url_is_a_config_error() {
        let err =
            request_completion(&LlmEndpointConfig::default(), "s", "u").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn semaphore_restores_permits() {
        let sem = Semaphore::new(2);
        {
            let _a = sem.acquire();
            let _b = sem.acquire();
        }
        let _c = sem.acquire();
        let _d = sem.acquire();
    }

    #[test]
    fn embedding_equivalence_needs_no_network() {
        let backend = LlmBackend::new(LlmEndpointConfig::default(), 0.8);
        assert!(backend.equivalent("same words", "words same").unwrap());
        assert_eq!(backend.call_log().counts().equivalent, 1);
    }
}
