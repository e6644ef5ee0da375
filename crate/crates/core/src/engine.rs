//! Configuration and the end-to-end pipeline: config file → backend +
//! tables → parse → (optional rules) → evaluate → rendered output.
//!
//! Configuration is one declarative TOML file with `${VAR}` environment
//! interpolation, so secrets stay out of checked-in configs and CI runs
//! are reproducible. Table paths resolve relative to the config file's
//! directory. Without a config the engine serves the bundled fixture
//! with the mock backend — a zero-setup demo that is also the
//! deterministic base for golden tests.
//!
//! Plan rules are off by default: the optimizer moves semantic
//! selections below other operators, which changes how many rows each
//! semantic node sees, and predictable per-node call counts are part of
//! the engine's contract. Turning `apply_rules` on trades that
//! predictability for fewer backend calls.

use crate::algebra::rules::{apply_rules, standard_rules};
use crate::backend::{
    CallCounts, EmbeddingBackend, LlmBackend, LlmEndpointConfig, MockBackend, MockRuleSet,
    SemanticBackend,
};
use crate::error::{Error, Result};
use crate::exec::{eval_with_options, Database, ExecMode, ExecOptions, ExecReport};
use crate::ingest::{fixture_database, load, FileFormat, LoadSpec};
use crate::relation::{Relation, Value, ValueKind};
use crate::rewrite::{rewrite_for_backend, target_named, RewriteOutcome};
use crate::sql::parse_query;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Which semantic backend executes the query's semantic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    /// Deterministic keyword rules; the default and the test backend.
    Mock,
    /// Token-hash embedding similarity for every capability.
    Embedding,
    /// HTTP chat-completion endpoint.
    Llm,
}

/// Result table rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Aligned,
    Csv,
    Json,
}

/// Validated engine configuration.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub backend: BackendChoice,
    /// Equivalence threshold θ ∈ (0, 1].
    pub theta: f64,
    pub output: OutputFormat,
    pub mode: ExecMode,
    /// Run the plan-rule optimizer before evaluating.
    pub apply_rules: bool,
    /// Serve the bundled movie/director/product fixture.
    pub bundled_fixture: bool,
    /// Tables to load, by name.
    pub tables: BTreeMap<String, LoadSpec>,
    pub llm: Option<LlmEndpointConfig>,
}

impl EngineConfig {
    /// The zero-setup default: bundled fixture, mock backend, θ = 0.8.
    pub fn bundled() -> EngineConfig {
        EngineConfig {
            backend: BackendChoice::Mock,
            theta: 0.8,
            output: OutputFormat::Aligned,
            mode: ExecMode::Parallel,
            apply_rules: false,
            bundled_fixture: true,
            tables: BTreeMap::new(),
            llm: None,
        }
    }

    /// Read and validate a config file; table paths resolve relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<EngineConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        EngineConfig::from_toml(&text, path.parent())
    }

    /// Parse config text. `base_dir` anchors relative table paths.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<EngineConfig> {
        let interpolated = interpolate_env(text)?;
        let raw: RawConfig = toml::from_str(&interpolated)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        raw.validate(base_dir)
    }
}

/// Replace every `${VAR}` with the environment variable's value.
/// Comments are left alone so config files can *talk about* the syntax.
fn interpolate_env(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let (code, comment) = split_comment(line);
        interpolate_line(code, &mut out)?;
        out.push_str(comment);
    }
    Ok(out)
}

/// Split a config line at the `#` that starts a comment, respecting
/// single-line quoted strings.
fn split_comment(line: &str) -> (&str, &str) {
    let mut quote: Option<char> = None;
    for (i, c) in line.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '"' | '\'' => quote = Some(c),
                '#' => return line.split_at(i),
                _ => {}
            },
        }
    }
    (line, "")
}

fn interpolate_line(code: &str, out: &mut String) -> Result<()> {
    let mut rest = code;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            return Err(Error::Config("unterminated ${ in config".into()));
        };
        let name = &after[..end];
        let value = std::env::var(name).map_err(|_| {
            Error::Config(format!("config references unset environment variable '{name}'"))
        })?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(())
}

/// Serde-facing config shape, validated into [`EngineConfig`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    tables: BTreeMap<String, RawTableSpec>,
    llm: Option<RawLlm>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    backend: Option<BackendChoice>,
    theta: Option<f64>,
    output: Option<OutputFormat>,
    mode: Option<String>,
    #[serde(default)]
    apply_rules: bool,
    #[serde(default)]
    fixture: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTableSpec {
    path: PathBuf,
    format: Option<FileFormat>,
    header: Option<bool>,
    #[serde(default)]
    kinds: BTreeMap<String, ValueKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLlm {
    base_url: String,
    model: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    max_retries: Option<u32>,
    timeout_secs: Option<u64>,
    concurrency: Option<usize>,
}

impl RawConfig {
    fn validate(self, base_dir: Option<&Path>) -> Result<EngineConfig> {
        let theta = self.engine.theta.unwrap_or(0.8);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Config(format!(
                "theta must be in (0, 1], got {theta}"
            )));
        }
        let mode = match self.engine.mode.as_deref() {
            None | Some("parallel") => ExecMode::Parallel,
            Some("sequential") => ExecMode::Sequential,
            Some(other) => {
                return Err(Error::Config(format!(
                    "mode must be 'parallel' or 'sequential', got '{other}'"
                )))
            }
        };
        let llm = match self.llm {
            None => None,
            Some(raw) => {
                if raw.base_url.is_empty() {
                    return Err(Error::Config("llm.base_url must not be empty".into()));
                }
                let defaults = LlmEndpointConfig::default();
                Some(LlmEndpointConfig {
                    base_url: raw.base_url,
                    model: raw.model.unwrap_or(defaults.model),
                    api_key_env: raw.api_key_env,
                    temperature: raw.temperature.unwrap_or(defaults.temperature),
                    max_retries: raw.max_retries.unwrap_or(defaults.max_retries),
                    timeout_secs: raw.timeout_secs.unwrap_or(defaults.timeout_secs),
                    concurrency: raw.concurrency.unwrap_or(defaults.concurrency),
                })
            }
        };
        let backend = self.engine.backend.unwrap_or(BackendChoice::Mock);
        if backend == BackendChoice::Llm && llm.is_none() {
            return Err(Error::Config(
                "backend 'llm' requires an [llm] section with base_url".into(),
            ));
        }
        let mut tables = BTreeMap::new();
        for (name, raw) in self.tables {
            let path = match base_dir {
                Some(dir) if raw.path.is_relative() => dir.join(&raw.path),
                _ => raw.path.clone(),
            };
            let format = match raw.format {
                Some(f) => f,
                None => FileFormat::from_path(&path)?,
            };
            let mut spec = LoadSpec::new(path, format);
            spec.header = raw.header.unwrap_or(true);
            spec.overrides = raw.kinds;
            tables.insert(name, spec);
        }
        Ok(EngineConfig {
            backend,
            theta,
            output: self.engine.output.unwrap_or(OutputFormat::Aligned),
            mode,
            apply_rules: self.engine.apply_rules,
            bundled_fixture: self.engine.fixture || tables.is_empty(),
            tables,
            llm,
        })
    }
}

/// A ready-to-query engine: tables loaded, backend constructed.
pub struct Engine {
    db: Database,
    backend: Box<dyn SemanticBackend>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Engine> {
        let mut db = if config.bundled_fixture {
            fixture_database()
        } else {
            Database::new()
        };
        for (name, spec) in &config.tables {
            db.insert(name, load(spec)?);
        }
        let backend: Box<dyn SemanticBackend> = match config.backend {
            BackendChoice::Mock => {
                let mut rules = MockRuleSet::v1();
                rules.theta = config.theta;
                Box::new(MockBackend::new(rules))
            }
            BackendChoice::Embedding => Box::new(EmbeddingBackend::new(config.theta)),
            BackendChoice::Llm => {
                let endpoint = config
                    .llm
                    .clone()
                    .expect("validation requires an llm section for the llm backend");
                Box::new(LlmBackend::new(endpoint, config.theta))
            }
        };
        Ok(Engine {
            db,
            backend,
            config,
        })
    }

    /// The zero-setup engine over the bundled fixture.
    pub fn bundled() -> Engine {
        Engine::new(EngineConfig::bundled()).expect("bundled fixture engine always constructs")
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    pub fn backend(&self) -> &dyn SemanticBackend {
        self.backend.as_ref()
    }

    /// Parse and evaluate one query.
    pub fn run(&self, sql: &str) -> Result<ExecReport> {
        let parsed = parse_query(sql)?;
        let plan = if self.config.apply_rules {
            apply_rules(&parsed.plan, &standard_rules(), 8, &self.db)
        } else {
            parsed.plan
        };
        eval_with_options(
            &plan,
            &self.db,
            self.backend.as_ref(),
            ExecOptions {
                mode: self.config.mode,
            },
        )
    }

    /// Rewrite a query for a named target without executing it. The
    /// target name is checked first: a bad name is a config mistake
    /// regardless of the query text.
    pub fn rewrite(&self, sql: &str, target: &str) -> Result<RewriteOutcome> {
        let target = target_named(target)?;
        let parsed = parse_query(sql)?;
        rewrite_for_backend(&parsed, target)
    }

    /// The plan as the evaluator will run it; with rules on, both the
    /// parsed and the rewritten plan.
    pub fn explain(&self, sql: &str) -> Result<String> {
        let parsed = parse_query(sql)?;
        if !self.config.apply_rules {
            return Ok(parsed.plan.pretty());
        }
        let optimized = apply_rules(&parsed.plan, &standard_rules(), 8, &self.db);
        Ok(format!(
            "parsed:\n{}\nwith rules:\n{}",
            parsed.plan.pretty(),
            optimized.pretty()
        ))
    }
}

/// Render a result relation in the configured format. Every format ends
/// with a trailing newline (when the relation is non-trivial) and is
/// deterministic for a given relation.
pub fn render_relation(relation: &Relation, format: OutputFormat) -> String {
    match format {
        OutputFormat::Aligned => render_aligned(relation),
        OutputFormat::Csv => render_csv(relation),
        OutputFormat::Json => render_json(relation),
    }
}

fn display_cell(value: &Value) -> String {
    value.render()
}

/// Display names for result columns: the bare column name, as
/// conventional engines print it. Qualifiers exist for binding during
/// planning, not for output.
fn header_names(relation: &Relation) -> Vec<String> {
    relation
        .schema
        .columns
        .iter()
        .map(|c| c.name.clone())
        .collect()
}

fn render_aligned(relation: &Relation) -> String {
    let headers = header_names(relation);
    let rows: Vec<Vec<String>> = relation
        .rows
        .iter()
        .map(|r| r.values.iter().map(display_cell).collect())
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let write_row = |out: &mut String, cells: &[String]| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            if i + 1 < cells.len() {
                for _ in cell.chars().count()..widths[i] {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
    };
    write_row(&mut out, &headers);
    let mut rule = String::new();
    for (i, w) in widths.iter().enumerate() {
        if i > 0 {
            rule.push_str("  ");
        }
        rule.push_str(&"-".repeat(*w));
    }
    out.push_str(rule.trim_end());
    out.push('\n');
    for row in &rows {
        write_row(&mut out, row);
    }
    let _ = writeln!(
        out,
        "({} row{})",
        relation.rows.len(),
        if relation.rows.len() == 1 { "" } else { "s" }
    );
    out
}

fn render_csv(relation: &Relation) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header_names(relation))
        .expect("in-memory write");
    for row in &relation.rows {
        let cells: Vec<String> = row.values.iter().map(display_cell).collect();
        writer.write_record(&cells).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn render_json(relation: &Relation) -> String {
    let columns: Vec<serde_json::Value> = header_names(relation)
        .into_iter()
        .map(serde_json::Value::String)
        .collect();
    let rows: Vec<serde_json::Value> = relation
        .rows
        .iter()
        .map(|r| {
            serde_json::Value::Array(
                r.values
                    .iter()
                    .map(|v| match v {
                        Value::Null => serde_json::Value::Null,
                        Value::Bool(b) => serde_json::Value::Bool(*b),
                        Value::Int(i) => serde_json::Value::from(*i),
                        Value::Float(f) => serde_json::Value::from(*f),
                        Value::Text(t) => serde_json::Value::String(t.clone()),
                    })
                    .collect(),
            )
        })
        .collect();
    let doc = serde_json::json!({ "columns": columns, "rows": rows });
    let mut text = serde_json::to_string_pretty(&doc).expect("json output serializes");
    text.push('\n');
    text
}

/// Human-readable execution statistics: one line per plan node in
/// evaluation (post-order) sequence, then totals.
pub fn render_stats(report: &ExecReport) -> String {
    let mut out = String::from("node                                      calls (pred/map/equiv/score/agg/embed)  wall\n");
    for stat in &report.nodes {
        let _ = writeln!(
            out,
            "{:<40}  {:>5} {:>4} {:>5} {:>5} {:>3} {:>5}  {:>6}us",
            clip(&stat.node, 40),
            stat.calls.predicate,
            stat.calls.map,
            stat.calls.equivalent,
            stat.calls.score,
            stat.calls.aggregate,
            stat.calls.embed,
            stat.wall_micros,
        );
    }
    let t: CallCounts = report.total_calls;
    let _ = writeln!(
        out,
        "total: {} backend calls ({} predicate, {} map, {} equivalent, {} score, {} aggregate, {} embed) in {}us",
        t.total(),
        t.predicate,
        t.map,
        t.equivalent,
        t.score,
        t.aggregate,
        t.embed,
        report.wall_micros,
    );
    out
}

fn clip(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut s: String = text.chars().take(max - 1).collect();
    s.push('…');
    s
}
