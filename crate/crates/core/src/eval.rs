//! Meaning-representation accuracy for semantic parsers.
//!
//! A predicted predicate counts as correct when its name and argument
//! multiset equal those of a gold predicate not already matched. The example
//! score is `matched / max(|gold|, |predicted|)`, so both missing and spurious
//! predicates cost. Precision and recall are reported alongside.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{ParseContext, ParseResult, SemanticParser};
use crate::terms::{parse_term_list, serialize_term_list, Label, Predicate, Value};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub matched: usize,
    pub gold: usize,
    pub predicted: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

fn key(p: &Predicate) -> (String, Vec<Value>) {
    let mut args = p.args.clone();
    args.sort();
    (p.name.clone(), args)
}

/// One-to-one matching count. Matching on identical keys is exact: any two
/// predicates with equal keys are interchangeable, so the maximum matching is
/// the sum over keys of the smaller multiplicity.
pub fn matched_count(gold: &[Predicate], predicted: &[Predicate]) -> usize {
    let mut counts: HashMap<(String, Vec<Value>), usize> = HashMap::new();
    for g in gold {
        *counts.entry(key(g)).or_default() += 1;
    }
    let mut matched = 0;
    for p in predicted {
        if let Some(c) = counts.get_mut(&key(p)) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched
}

pub fn score_detail(gold: &[Predicate], predicted: &[Predicate]) -> ExampleScore {
    let matched = matched_count(gold, predicted);
    let ratio = |den: usize| if den == 0 { 1.0 } else { matched as f64 / den as f64 };
    ExampleScore {
        matched,
        gold: gold.len(),
        predicted: predicted.len(),
        accuracy: ratio(gold.len().max(predicted.len())),
        precision: ratio(predicted.len()),
        recall: ratio(gold.len()),
    }
}

pub fn score_example(gold: &[Predicate], predicted: &[Predicate]) -> f64 {
    score_detail(gold, predicted).accuracy
}

/// Labels count as a single zero-argument predicate (`thank`, `irrelevant`).
pub fn scoring_predicates(result: &ParseResult) -> Vec<Predicate> {
    match result.label {
        Label::Content => result.predicates.clone(),
        other => vec![Predicate::new(other.as_str(), [])],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrExample {
    pub sentence: String,
    pub gold: Vec<Predicate>,
}

#[derive(Deserialize)]
struct RawExample {
    sentence: String,
    gold: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("corpus has no examples")]
    Empty,
}

/// Reads JSON lines of `{"sentence": ..., "gold": ["pred(args)", ...]}`.
/// Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<MrExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let format = |message: String| CorpusError::Format { line: line_no, message };
        let raw: RawExample = serde_json::from_str(line).map_err(|e| format(e.to_string()))?;
        let mut gold = Vec::new();
        for g in &raw.gold {
            gold.extend(parse_term_list(g).map_err(|e| format(format!("gold {g:?}: {e}")))?);
        }
        if gold.is_empty() {
            return Err(format("gold predicate list is empty".into()));
        }
        out.push(MrExample { sentence: raw.sentence, gold });
    }
    if out.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<MrExample>, CorpusError> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub sentence: String,
    pub gold: String,
    pub predicted: String,
    #[serde(flatten)]
    pub score: ExampleScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub parser: String,
    pub examples: usize,
    pub mean_accuracy: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub per_example: Vec<ExampleReport>,
}

/// Parses every sentence without dialog context and averages the scores.
pub fn run_corpus(examples: &[MrExample], parser: &dyn SemanticParser) -> Result<CorpusReport, CorpusError> {
    if examples.is_empty() {
        return Err(CorpusError::Empty);
    }
    let ctx = ParseContext::default();
    let per_example: Vec<ExampleReport> = examples
        .iter()
        .map(|ex| {
            let predicted = scoring_predicates(&parser.parse(&ex.sentence, &ctx));
            ExampleReport {
                sentence: ex.sentence.clone(),
                gold: serialize_term_list(&ex.gold),
                predicted: serialize_term_list(&predicted),
                score: score_detail(&ex.gold, &predicted),
            }
        })
        .collect();
    let n = per_example.len() as f64;
    let mean = |f: fn(&ExampleScore) -> f64| per_example.iter().map(|r| f(&r.score)).sum::<f64>() / n;
    Ok(CorpusReport {
        parser: parser.name().to_string(),
        examples: per_example.len(),
        mean_accuracy: mean(|s| s.accuracy),
        mean_precision: mean(|s| s.precision),
        mean_recall: mean(|s| s.recall),
        per_example,
    })
}
