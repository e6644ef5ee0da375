//! SQL-compatible semantic query engine.
//!
//! An extended relational algebra in which every classical operator has a
//! semantic counterpart backed by a pluggable LLM interface: selection,
//! projection, join, set difference/intersection, dedup, group-by,
//! aggregation, and sort all exist in conventional and semantic form over
//! ordered relations. SQL queries invoke the semantic forms through
//! `SEM_*` UDFs; a rewriter can also translate backend-free queries into
//! the prompt styles of document-processing backends.
//!
//! Module map:
//! - [`relation`]: values, schemas, tuples, ordered relations
//! - [`backend`]: the semantic capability interface + mock/embedding/LLM
//! - [`render`]: prompt placeholders and canonical row renderings
//! - [`algebra`]: logical plans and rewrite rules
//! - [`sql`]: the SQL front end (scan, parse, reassemble)
//! - [`exec`]: the list-semantics evaluator
//! - [`rewrite`]: backend-specific query rewriting
//! - [`ingest`]: file loading and the bundled fixture
//! - [`engine`]: configuration and the end-to-end pipeline

pub mod algebra;
pub mod backend;
pub mod engine;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod relation;
pub mod render;
pub mod rewrite;
pub mod sql;

pub use error::{Error, ErrorClass, Result};
