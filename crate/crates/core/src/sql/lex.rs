//! SQL lexer: byte-offset tokens over the supported grammar.
//!
//! Strings are single-quoted with `''` as the escape for a literal quote
//! and may span multiple lines (prompt templates often do). `--` starts a
//! comment running to end of line. Offsets are byte positions into the
//! original text; errors carry 1-based line:column derived from them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Identifier or keyword, original spelling preserved.
    Ident(String),
    /// String literal, escapes decoded.
    Str(String),
    /// Numeric literal, raw spelling preserved.
    Number(String),
    /// One of `( ) , ; . *`
    Punct(char),
    /// One of `= <> != < <= > >=`
    Op(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

impl Token {
    /// Case-insensitive keyword test against an identifier token.
    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }
}

/// 1-based (line, column) of a byte offset, counting columns in
/// characters.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(text.len());
    let before = &text[..clamped];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    let col = before[line_start..].chars().count() + 1;
    (line, col)
}

/// Build a syntax error pointing at `offset`.
pub fn syntax_at(text: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, col) = line_col(text, offset);
    Error::Syntax {
        line,
        col,
        message: message.into(),
    }
}

pub fn lex(sql: &str) -> Result<Vec<Token>> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = sql[i..].chars().next().expect("offset on char boundary");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == '\'' {
            let (content, end) = lex_string(sql, i)?;
            tokens.push(Token {
                kind: TokenKind::Str(content),
                start: i,
                end,
            });
            i = end;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if bytes.get(i) == Some(&b'.')
                && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)
            {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number(sql[start..i].to_string()),
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(sql[start..i].to_string()),
                start,
                end: i,
            });
            continue;
        }
        if matches!(c, '(' | ')' | ',' | ';' | '.' | '*') {
            tokens.push(Token {
                kind: TokenKind::Punct(c),
                start: i,
                end: i + 1,
            });
            i += 1;
            continue;
        }
        if matches!(c, '=' | '<' | '>' | '!') {
            let two = sql.get(i..i + 2);
            let op = match two {
                Some("<=") | Some(">=") | Some("<>") | Some("!=") => two.unwrap(),
                _ => match c {
                    '=' => "=",
                    '<' => "<",
                    '>' => ">",
                    _ => {
                        return Err(syntax_at(sql, i, "'!' is only valid in '!='"));
                    }
                },
            };
            tokens.push(Token {
                kind: TokenKind::Op(op.to_string()),
                start: i,
                end: i + op.len(),
            });
            i += op.len();
            continue;
        }
        return Err(syntax_at(sql, i, format!("unexpected character '{c}'")));
    }
    Ok(tokens)
}

/// Lex the string literal starting at `start` (which holds a quote).
/// Returns the decoded content and the offset one past the closing quote.
fn lex_string(sql: &str, start: usize) -> Result<(String, usize)> {
    let bytes = sql.as_bytes();
    let mut out = String::new();
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == b'\'' {
            if bytes.get(i + 1) == Some(&b'\'') {
                out.push('\'');
                i += 2;
                continue;
            }
            return Ok((out, i + 1));
        }
        let c = sql[i..].chars().next().expect("offset on char boundary");
        out.push(c);
        i += c.len_utf8();
    }
    Err(syntax_at(sql, start, "unterminated string literal"))
}
