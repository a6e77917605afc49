//! Semantic parsing: utterance in, labelled predicate list out.
//!
//! Two interchangeable backends implement [`SemanticParser`]: a lexicon-driven
//! [`RuleParser`] and an [`LlmParser`] that prompts a completion model with
//! in-context examples. Either way the result goes through [`normalize_parse`]
//! before it touches the dialog state.

mod llm;
mod rule;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{Field, Polarity, Requirement};
use crate::kb::{normalize_attribute_value, Attribute, Vocabulary};
use crate::recommend::HistoryRef;
use crate::terms::{fold_text, Label, Predicate, Value};

pub use llm::{
    build_prompt, llm_parse, BackendError, CompletionClient, InContextExample, LlmParser,
    ReplayClient, DEFAULT_EXAMPLES, PROMPT_HEADER,
};
pub use rule::{Lexicon, PriceThresholds, RuleParser};

/// Longest utterance accepted, in bytes.
pub const MAX_UTTERANCE_BYTES: usize = 2048;

/// Cuisines recognized even when the knowledgebase has none of them.
pub const EXTRA_FOOD_TYPES: &[&str] = &[
    "american", "italian", "indian", "thai", "chinese", "japanese", "korean", "vietnamese",
    "mexican", "french", "english", "british", "greek", "mediterranean", "spanish", "turkish",
    "lebanese", "middle eastern", "ethiopian", "cajun", "seafood", "steak", "burger",
    "chicken", "fast food", "vegetarian", "vegan", "coffee", "bubble tea", "tea", "dessert",
];

/// Establishment kinds recognized even when the knowledgebase has none.
pub const EXTRA_ESTABLISHMENTS: &[&str] =
    &["restaurant", "bar", "pub", "coffee shop", "tea shop", "food truck", "bakery"];

/// What the parser knows about the conversation so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseContext {
    /// The attribute the agent asked about last turn, with the question text.
    pub last_question: Option<(Attribute, String)>,
    /// Attributes already mentioned by either side.
    pub discussed: BTreeSet<Attribute>,
}

impl ParseContext {
    pub fn asked(&self) -> Option<Attribute> {
        self.last_question.as_ref().map(|(a, _)| *a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub label: Label,
    pub predicates: Vec<Predicate>,
    /// The backend failed and the result is a fallback.
    #[serde(default)]
    pub degraded: bool,
}

impl ParseResult {
    pub fn label_only(label: Label) -> Self {
        ParseResult { label, predicates: Vec::new(), degraded: false }
    }

    pub fn content(predicates: Vec<Predicate>) -> Self {
        if predicates.is_empty() {
            return ParseResult::label_only(Label::Irrelevant);
        }
        ParseResult { label: Label::Content, predicates, degraded: false }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("utterance is empty")]
    Empty,
    #[error("utterance is {0} bytes; the limit is {MAX_UTTERANCE_BYTES}")]
    TooLong(usize),
}

pub trait SemanticParser: Send + Sync {
    fn parse(&self, utterance: &str, ctx: &ParseContext) -> ParseResult;

    fn name(&self) -> &'static str;
}

/// Validates the utterance, then runs the backend.
pub fn parse_utterance(
    parser: &dyn SemanticParser,
    utterance: &str,
    ctx: &ParseContext,
) -> Result<ParseResult, ParseError> {
    if utterance.len() > MAX_UTTERANCE_BYTES {
        return Err(ParseError::TooLong(utterance.len()));
    }
    if utterance.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(parser.parse(utterance, ctx))
}

/// Requests that bypass the ordinary constraint search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum Special {
    AnotherOption,
    ViewHistory(HistoryRef),
}

/// A parse result mapped onto the dialog vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedInput {
    pub label: Label,
    pub requirements: Vec<Requirement>,
    pub no_preference: Vec<Attribute>,
    pub special: Option<Special>,
}

impl NormalizedInput {
    fn empty(label: Label) -> Self {
        NormalizedInput { label, requirements: Vec::new(), no_preference: Vec::new(), special: None }
    }
}

/// Maps parser predicates to requirements. Values that name a known attribute
/// value become direct constraints; anything else under `prefer`/`not_prefer`
/// is left for commonsense expansion. Unknown predicates are dropped.
pub fn normalize_parse(result: &ParseResult, vocab: &Vocabulary) -> NormalizedInput {
    if result.label != Label::Content {
        return NormalizedInput::empty(result.label);
    }
    let mut out = NormalizedInput::empty(Label::Content);
    let push = |reqs: &mut Vec<Requirement>, polarity: Polarity, field: Field, values: Vec<Value>| {
        if values.is_empty() {
            return;
        }
        match reqs.iter_mut().find(|r| r.polarity == polarity && r.field == field) {
            Some(existing) => {
                let mut merged = existing.values.clone();
                merged.extend(values);
                *existing = Requirement::new(polarity, field, merged);
            }
            None => reqs.push(Requirement::new(polarity, field, values)),
        }
    };

    for pred in &result.predicates {
        match pred.name.as_str() {
            "prefer" | "not_prefer" | "not prefer" => {
                let polarity =
                    if pred.name == "prefer" { Polarity::Require } else { Polarity::NotRequire };
                for arg in pred.args.iter().filter_map(Value::as_concrete) {
                    match vocab.attribute_for(arg) {
                        Some(attr) => {
                            let value = normalize_attribute_value(attr, arg);
                            push(&mut out.requirements, polarity, Field::Attr(attr), vec![value]);
                        }
                        None => {
                            let field =
                                if polarity == Polarity::Require { Field::Prefer } else { Field::NotPrefer };
                            push(&mut out.requirements, Polarity::Require, field, vec![Value::concrete(arg)]);
                        }
                    }
                }
            }
            "another_option" | "another option" => out.special = Some(Special::AnotherOption),
            "view_history" | "view history" => {
                let target = pred
                    .args
                    .first()
                    .and_then(Value::as_concrete)
                    .map(HistoryRef::parse)
                    .unwrap_or(HistoryRef::Last);
                out.special = Some(Special::ViewHistory(target));
            }
            "no_preference" | "no preference" => {
                for arg in pred.args.iter().filter_map(Value::as_concrete) {
                    if let Some(attr) = Attribute::lookup(arg) {
                        if !out.no_preference.contains(&attr) {
                            out.no_preference.push(attr);
                        }
                    }
                }
            }
            name => {
                let Some(attr) = Attribute::lookup(name) else {
                    continue;
                };
                if attr == Attribute::Name {
                    if let Some(named) = pred.args.iter().find_map(Value::as_concrete) {
                        out.special = Some(Special::ViewHistory(HistoryRef::Name(fold_text(named))));
                        continue;
                    }
                }
                let values: Vec<Value> = pred
                    .args
                    .iter()
                    .map(|v| match v {
                        Value::Concrete(text) => normalize_attribute_value(attr, text),
                        other => other.clone(),
                    })
                    .collect();
                push(&mut out.requirements, Polarity::Require, Field::Attr(attr), values);
            }
        }
    }
    // A query sentinel mixed with concrete values adds nothing.
    for req in &mut out.requirements {
        if req.values.iter().any(Value::is_concrete) {
            req.values.retain(|v| !v.is_query());
        }
    }
    // Canonical order, so backends that list predicates differently agree.
    out.requirements.sort_by_key(|r| (r.field, r.polarity));
    if out.requirements.is_empty() && out.no_preference.is_empty() && out.special.is_none() {
        out.label = Label::Irrelevant;
    }
    out
}

/// The vocabulary a parser should know: knowledgebase values plus common extras.
pub fn parser_vocabulary(kb_vocab: &Vocabulary) -> Vocabulary {
    let mut vocab = kb_vocab.clone();
    vocab.extend(Attribute::FoodType, EXTRA_FOOD_TYPES.iter().map(|s| s.to_string()));
    vocab.extend(Attribute::Establishment, EXTRA_ESTABLISHMENTS.iter().map(|s| s.to_string()));
    for attr in [Attribute::PriceRange, Attribute::CustomerRating, Attribute::FamilyFriendly] {
        let domain = attr.finite_domain().unwrap_or(&[]);
        vocab.extend(attr, domain.iter().map(|s| s.to_string()));
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::fixture_kb;
    use crate::terms::parse_term_list;

    fn vocab() -> Vocabulary {
        parser_vocabulary(&fixture_kb().vocabulary())
    }

    fn norm(terms: &str) -> NormalizedInput {
        normalize_parse(&ParseResult::content(parse_term_list(terms).unwrap()), &vocab())
    }

    #[test]
    fn known_values_become_direct_constraints() {
        let n = norm("not_prefer(coffee)");
        assert_eq!(n.requirements, vec![Requirement::raw(Polarity::NotRequire, Attribute::FoodType, &["coffee"])]);
        let n = norm("not_prefer(curry, expensive)");
        assert_eq!(
            n.requirements,
            vec![
                Requirement::raw(Polarity::NotRequire, Attribute::PriceRange, &["expensive"]),
                Requirement::raw(Polarity::Require, Field::NotPrefer, &["curry"]),
            ]
        );
    }

    #[test]
    fn attribute_aliases_and_value_synonyms() {
        let n = norm("price range(average), family_friendly(yes), restaurant-name(query)");
        assert_eq!(
            n.requirements,
            vec![
                Requirement::require(Attribute::Name, [Value::Query]),
                Requirement::raw(Polarity::Require, Attribute::PriceRange, &["moderate"]),
                Requirement::raw(Polarity::Require, Attribute::FamilyFriendly, &["yes"]),
            ]
        );
    }

    #[test]
    fn duplicate_attributes_merge() {
        let n = norm("food type(thai), food type(indian, thai)");
        assert_eq!(n.requirements, vec![Requirement::raw(Polarity::Require, Attribute::FoodType, &["thai", "indian"])]);
    }

    #[test]
    fn specials() {
        assert_eq!(norm("another_option()").special, Some(Special::AnotherOption));
        assert_eq!(norm("view_history(first)").special, Some(Special::ViewHistory(HistoryRef::First)));
        let n = norm("restaurant-name('Palio''s Pizza Cafe'), address(query)");
        assert_eq!(n.special, Some(Special::ViewHistory(HistoryRef::Name("palio's pizza cafe".into()))));
        assert_eq!(n.requirements, vec![Requirement::require(Attribute::Address, [Value::Query])]);
    }

    #[test]
    fn no_preference_and_unknown_predicates() {
        let n = norm("no_preference(customer rating)");
        assert_eq!(n.no_preference, vec![Attribute::CustomerRating]);
        assert_eq!(n.label, Label::Content);
        let n = norm("weather(sunny)");
        assert_eq!(n.label, Label::Irrelevant);
    }

    #[test]
    fn labels_pass_through() {
        let n = normalize_parse(&ParseResult::label_only(Label::Thank), &vocab());
        assert_eq!(n.label, Label::Thank);
        assert!(n.requirements.is_empty());
    }

    #[test]
    fn query_never_lands_in_exclusions() {
        let n = norm("not_prefer(query)");
        assert!(n.requirements.iter().all(|r| r.polarity == Polarity::Require));
    }

    #[test]
    fn utterance_limits() {
        let parser = RuleParser::new(Lexicon::default());
        let ctx = ParseContext::default();
        assert_eq!(parse_utterance(&parser, "   ", &ctx), Err(ParseError::Empty));
        let long = "a".repeat(MAX_UTTERANCE_BYTES + 1);
        assert_eq!(parse_utterance(&parser, &long, &ctx), Err(ParseError::TooLong(2049)));
        let edge = "a".repeat(MAX_UTTERANCE_BYTES);
        assert!(parse_utterance(&parser, &edge, &ctx).is_ok());
    }
}
