//! SQL surface: extraction of semantic UDF calls, conventional parsing,
//! text reassembly, and unparsing.
//!
//! The pipeline is the paper-shaped three-stage flow: (1) pattern-match
//! semantic UDF invocations out of the query text ([`scan_semantic_calls`]),
//! (2) parse the full text — conventional grammar plus the nine UDFs — to
//! a logical plan ([`parse_query`]), and (3) splice materialized results
//! back over the call spans ([`substitute_materialized`]). The grammar is
//! documented in `docs/grammar.md`.

mod lex;
mod parse;
mod scan;
mod substitute;
mod unparse;

pub use lex::line_col;
pub use parse::{parse_query, ParsedQuery};
pub use scan::{scan_semantic_calls, SemCall, SemKind};
pub use substitute::substitute_materialized;
pub use unparse::unparse;

