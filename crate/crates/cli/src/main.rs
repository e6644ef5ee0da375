//! Command-line front end: run queries from a file, `-e` text, or a
//! REPL; select backend and output format; print plans, rewrites, and
//! execution statistics.
//!
//! Output discipline: query results, plans, and rewritten SQL go to
//! stdout and are byte-deterministic for a given config + query + mock
//! backend. Everything that varies run to run (timings) or is advisory
//! (rewrite fallback notes, REPL prompts, errors) goes to stderr.

use clap::Parser;
use saber_core::engine::{
    render_relation, render_stats, BackendChoice, Engine, EngineConfig, OutputFormat,
};
use saber_core::{Error, ErrorClass, Result};
use std::io::{BufRead, IsTerminal, Write};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "saber",
    version,
    about = "SQL-compatible semantic query engine",
    after_help = "Without a query file or -e, reads statements from stdin (REPL).\n\
                  Meta-commands: \\tables, \\schema <table>, \\quit.\n\
                  Exit codes: 2 syntax, 3 binding, 4 backend, 5 I/O or config."
)]
struct Cli {
    /// SQL file to execute; omit to read statements from stdin
    query_file: Option<PathBuf>,

    /// Execute this SQL text instead of reading a file
    #[arg(short = 'e', long = "execute", value_name = "SQL", conflicts_with = "query_file")]
    execute: Option<String>,

    /// Engine config file (TOML); defaults to the bundled fixture
    #[arg(short, long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Backend override: mock, embedding, or llm
    #[arg(long, value_name = "NAME")]
    backend: Option<String>,

    /// Output format override: aligned, csv, or json
    #[arg(long, value_name = "FORMAT")]
    output: Option<String>,

    /// Print the query plan instead of executing
    #[arg(long, conflicts_with = "rewrite_for")]
    explain: bool,

    /// Print SQL rewritten for a target backend (lotus, docetl, or
    /// palimpzest) instead of executing
    #[arg(long, value_name = "TARGET")]
    rewrite_for: Option<String>,

    /// Report per-node semantic-call counts and timings (on stderr, so
    /// stdout stays byte-deterministic)
    #[arg(long)]
    stats: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(&cli) {
        eprintln!("error: {error}");
        std::process::exit(exit_code(&error));
    }
}

fn exit_code(error: &Error) -> i32 {
    match error.class() {
        ErrorClass::Syntax => 2,
        ErrorClass::Binding => 3,
        ErrorClass::Backend => 4,
        ErrorClass::Io => 5,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => EngineConfig::from_file(path)?,
        None => EngineConfig::bundled(),
    };
    if let Some(name) = &cli.backend {
        config.backend = parse_backend(name)?;
    }
    if let Some(name) = &cli.output {
        config.output = parse_output(name)?;
    }
    let engine = Engine::new(config)?;
    match (&cli.query_file, &cli.execute) {
        (Some(path), _) => {
            let sql = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            run_statement(&engine, cli, &sql)
        }
        (None, Some(sql)) => run_statement(&engine, cli, sql),
        (None, None) => repl(&engine, cli),
    }
}

fn parse_backend(name: &str) -> Result<BackendChoice> {
    match name.to_ascii_lowercase().as_str() {
        "mock" => Ok(BackendChoice::Mock),
        "embedding" => Ok(BackendChoice::Embedding),
        "llm" => Ok(BackendChoice::Llm),
        other => Err(Error::Config(format!(
            "unknown backend '{other}' (expected mock, embedding, or llm)"
        ))),
    }
}

fn parse_output(name: &str) -> Result<OutputFormat> {
    match name.to_ascii_lowercase().as_str() {
        "aligned" => Ok(OutputFormat::Aligned),
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(Error::Config(format!(
            "unknown output format '{other}' (expected aligned, csv, or json)"
        ))),
    }
}

/// Execute one statement per the requested mode and print the result.
fn run_statement(engine: &Engine, cli: &Cli, sql: &str) -> Result<()> {
    if let Some(target) = &cli.rewrite_for {
        let outcome = engine.rewrite(sql, target)?;
        // The rewritten SQL is the entire stdout payload, byte for byte;
        // fallback notes are advisory and go to stderr.
        print!("{}", outcome.sql);
        for fallback in &outcome.fallbacks {
            eprintln!(
                "note: {} is not supported by {target}; fallback: {}",
                fallback.operator, fallback.strategy
            );
        }
        return Ok(());
    }
    if cli.explain {
        print!("{}", engine.explain(sql)?);
        return Ok(());
    }
    let report = engine.run(sql)?;
    print!(
        "{}",
        render_relation(&report.result, engine.config().output)
    );
    if cli.stats {
        eprint!("{}", render_stats(&report));
    }
    Ok(())
}

/// Statement loop over stdin. Statements end with ';'; lines starting
/// with '\' are meta-commands. Statement errors are reported and the
/// loop continues; only I/O failures abort.
fn repl(engine: &Engine, cli: &Cli) -> Result<()> {
    let interactive = std::io::stdin().is_terminal();
    if interactive {
        eprintln!(
            "saber {} — end statements with ';'; \\tables, \\schema <t>, \\quit",
            env!("CARGO_PKG_VERSION")
        );
    }
    let stdin = std::io::stdin();
    let mut buffer = String::new();
    for line in stdin.lock().lines() {
        if interactive {
            let _ = write!(
                std::io::stderr(),
                "{}",
                if buffer.is_empty() { "saber> " } else { "  ...> " }
            );
        }
        let line = line?;
        let trimmed = line.trim();
        if buffer.is_empty() {
            if trimmed.is_empty() {
                continue;
            }
            if let Some(command) = trimmed.strip_prefix('\\') {
                if matches!(command, "quit" | "q") {
                    return Ok(());
                }
                meta_command(engine, command);
                continue;
            }
        }
        buffer.push_str(&line);
        buffer.push('\n');
        if trimmed.ends_with(';') {
            let sql = std::mem::take(&mut buffer);
            if let Err(error) = run_statement(engine, cli, &sql) {
                eprintln!("error: {error}");
            }
        }
    }
    if !buffer.trim().is_empty() {
        // Trailing statement without ';' still runs; psql-style
        // convenience for piped input.
        run_statement(engine, cli, &buffer)?;
    }
    Ok(())
}

fn meta_command(engine: &Engine, command: &str) {
    let mut parts = command.split_whitespace();
    match parts.next() {
        Some("tables") => {
            for name in engine.database().table_names() {
                let rows = engine
                    .database()
                    .get(name)
                    .map(|r| r.rows.len())
                    .unwrap_or(0);
                println!("{name}  ({rows} row{})", if rows == 1 { "" } else { "s" });
            }
        }
        Some("schema") => match parts.next() {
            None => eprintln!("usage: \\schema <table>"),
            Some(table) => match engine.database().get(table) {
                None => eprintln!("error: unknown table '{table}'"),
                Some(relation) => {
                    for column in &relation.schema.columns {
                        println!("{}  {}", column.name, column.kind.name());
                    }
                }
            },
        },
        _ => eprintln!("unknown command '\\{command}' (try \\tables, \\schema <t>, \\quit)"),
    }
}
