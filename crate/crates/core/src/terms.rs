//! Predicate terms exchanged between the semantic parser, the filter and the
//! reasoner.
//!
//! The text format is a flat, comma separated list of `name(arg, ...)`
//! groups:
//!
//! ```text
//! restaurant-name(query), price range(moderate), establishment(restaurant, bar)
//! ```
//!
//! * A name is everything before `(`; it may contain spaces and hyphens.
//! * Arguments are bare atoms or single-quoted atoms. Inside quotes a literal
//!   `'` is written as `''`, and commas and parentheses are allowed.
//! * A group without parentheses (`another_option`) is a zero-argument
//!   predicate.
//!
//! Everything is case-insensitive; the canonical form is lowercase with single
//! spaces. There are no variables and no nesting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Argument of a predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "text")]
pub enum Value {
    Concrete(String),
    /// The user is asking for this attribute.
    Query,
    /// Matches every value; recorded when the user has no preference on an
    /// attribute without a finite domain.
    Any,
}

impl Value {
    pub fn concrete(text: impl Into<String>) -> Self {
        Value::Concrete(text.into())
    }

    pub fn as_concrete(&self) -> Option<&str> {
        match self {
            Value::Concrete(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_query(&self) -> bool {
        matches!(self, Value::Query)
    }

    pub fn is_concrete(&self) -> bool {
        matches!(self, Value::Concrete(_))
    }

    /// Canonical text, without quoting.
    pub fn text(&self) -> &str {
        match self {
            Value::Concrete(s) => s,
            Value::Query => QUERY,
            Value::Any => ANY,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

const QUERY: &str = "query";
const ANY: &str = "any";

/// Lowercase, trim, collapse runs of whitespace.
pub fn fold_text(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Case-fold a raw argument and recognise the `query` and `any` sentinels.
///
/// Attribute-specific synonyms (price "average") are resolved by
/// [`crate::kb::normalize_attribute_value`], which knows the attribute.
pub fn normalize_value(raw: &str) -> Value {
    let mut text = fold_text(raw);
    while text.len() >= 2
        && ['\'', '"']
            .iter()
            .any(|&q| text.starts_with(q) && text.ends_with(q))
    {
        text = fold_text(&text[1..text.len() - 1]);
    }
    match text.as_str() {
        QUERY => Value::Query,
        ANY => Value::Any,
        _ => Value::Concrete(text),
    }
}

/// Semantic label attached to a parsed utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Irrelevant,
    Thank,
    Content,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Irrelevant => "irrelevant",
            Label::Thank => "thank",
            Label::Content => "content",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_text(s).trim_end_matches('.') {
            "irrelevant" => Ok(Label::Irrelevant),
            "thank" | "thanks" => Ok(Label::Thank),
            "content" => Ok(Label::Content),
            _ => Err(()),
        }
    }
}

/// One `name(args)` unit of a meaning representation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub args: Vec<Value>,
}

impl Predicate {
    /// Builds a predicate with a folded name and de-duplicated arguments
    /// (first occurrence wins).
    pub fn new(name: &str, args: impl IntoIterator<Item = Value>) -> Self {
        let mut out: Vec<Value> = Vec::new();
        for v in args {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Predicate {
            name: fold_text(name),
            args: out,
        }
    }

    /// Convenience constructor from raw argument strings.
    pub fn from_raw(name: &str, args: &[&str]) -> Self {
        Predicate::new(name, args.iter().map(|a| normalize_value(a)))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        f.write_str("(")?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write_atom(f, arg)?;
        }
        f.write_str(")")
    }
}

fn write_atom(f: &mut impl fmt::Write, value: &Value) -> fmt::Result {
    match value {
        Value::Concrete(s) if needs_quotes(s) => {
            f.write_char('\'')?;
            f.write_str(&s.replace('\'', "''"))?;
            f.write_char('\'')
        }
        other => f.write_str(other.text()),
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s == QUERY
        || s == ANY
        || s.chars().any(|c| matches!(c, ',' | '(' | ')' | '\''))
        || s.trim() != s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("malformed term at byte {position}: {reason}")]
    Malformed { position: usize, reason: &'static str },
}

impl TermError {
    pub fn position(&self) -> usize {
        match self {
            TermError::Malformed { position, .. } => *position,
        }
    }
}

fn malformed(position: usize, reason: &'static str) -> TermError {
    TermError::Malformed { position, reason }
}

/// Parses a comma separated predicate list. Empty (or blank) input yields an
/// empty list; any syntax error aborts the whole parse.
pub fn parse_term_list(input: &str) -> Result<Vec<Predicate>, TermError> {
    Scanner::new(input).parse_list()
}

/// Canonical text form: groups joined by `", "`.
pub fn serialize_term_list(preds: &[Predicate]) -> String {
    preds
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner { src, pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn parse_list(&mut self) -> Result<Vec<Predicate>, TermError> {
        let mut out = Vec::new();
        self.skip_ws();
        if self.peek().is_none() {
            return Ok(out);
        }
        loop {
            out.push(self.parse_predicate()?);
            self.skip_ws();
            match self.bump() {
                None => return Ok(out),
                Some(',') => {
                    self.skip_ws();
                    if self.peek().is_none() {
                        return Err(malformed(self.pos, "trailing comma"));
                    }
                }
                Some(_) => return Err(malformed(self.pos - 1, "expected ',' between terms")),
            }
        }
    }

    fn parse_predicate(&mut self) -> Result<Predicate, TermError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                '(' | ',' => break,
                ')' => return Err(malformed(self.pos, "unbalanced ')'")),
                '\'' | '"' => return Err(malformed(self.pos, "quote in predicate name")),
                _ => {
                    self.bump();
                }
            }
        }
        let name = fold_text(&self.src[start..self.pos]);
        if name.is_empty() {
            return Err(malformed(start, "empty predicate name"));
        }
        let mut args = Vec::new();
        if self.peek() == Some('(') {
            self.bump();
            self.skip_ws();
            if self.peek() == Some(')') {
                self.bump();
            } else {
                loop {
                    args.push(self.parse_atom()?);
                    self.skip_ws();
                    match self.bump() {
                        Some(',') => continue,
                        Some(')') => break,
                        Some(_) => return Err(malformed(self.pos - 1, "expected ',' or ')'")),
                        None => return Err(malformed(self.pos, "unbalanced '('")),
                    }
                }
            }
        }
        Ok(Predicate::new(&name, args))
    }

    fn parse_atom(&mut self) -> Result<Value, TermError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('\'') {
            self.bump();
            let mut text = String::new();
            loop {
                match self.bump() {
                    None => return Err(malformed(start, "unterminated quoted atom")),
                    Some('\'') if self.peek() == Some('\'') => {
                        self.bump();
                        text.push('\'');
                    }
                    Some('\'') => break,
                    Some(c) => text.push(c),
                }
            }
            let folded = fold_text(&text);
            if folded.is_empty() {
                return Err(malformed(start, "empty argument"));
            }
            return Ok(match folded.as_str() {
                QUERY => Value::Query,
                ANY => Value::Any,
                _ => Value::Concrete(folded),
            });
        }
        while let Some(c) = self.peek() {
            match c {
                ',' | ')' => break,
                '(' => return Err(malformed(self.pos, "nested term")),
                _ => {
                    self.bump();
                }
            }
        }
        if self.peek().is_none() {
            return Err(malformed(self.pos, "unbalanced '('"));
        }
        let raw = &self.src[start..self.pos];
        if raw.trim().is_empty() {
            return Err(malformed(start, "empty argument"));
        }
        Ok(normalize_value(raw))
    }
}
