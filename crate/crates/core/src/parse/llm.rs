//! Few-shot prompting of a completion model.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;
use tracing::warn;

use crate::terms::{fold_text, parse_term_list, Label, TermError};

use super::{ParseContext, ParseResult, SemanticParser};

pub const PROMPT_HEADER: &str = "Translate what the user says to a restaurant concierge into predicates.
Attributes: restaurant-name, food type, establishment, price range (cheap, moderate, expensive), customer rating (low, average, high), address, phone number, family-friendly (yes, no), distance.
Write query as the value when the user asks for an attribute. Use prefer(...) and not_prefer(...) for wishes that are not attribute values, another_option() to ask for a different place, view_history(first|last|N) to go back to an earlier suggestion, and no_preference(attribute) when the user has no wish for the attribute the concierge asked about.
Answer thank for gratitude and irrelevant when nothing applies. A bracketed question is what the concierge asked just before.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InContextExample {
    pub sentence: &'static str,
    pub predicates: &'static str,
}

const fn ex(sentence: &'static str, predicates: &'static str) -> InContextExample {
    InContextExample { sentence, predicates }
}

/// Covers every attribute, both labels, the query sentinel and the special
/// predicates.
pub const DEFAULT_EXAMPLES: [InContextExample; 11] = [
    ex(
        "There is a restaurant in the city center, Alimentum, which is not family-friendly.",
        "restaurant-name(alimentum), establishment(restaurant), family-friendly(no)",
    ),
    ex("Can you recommend a restaurant?", "restaurant-name(query), establishment(restaurant)"),
    ex(
        "I'd like some cheap, highly rated Indian or Thai food.",
        "food type(indian, thai), price range(cheap), customer rating(high)",
    ),
    ex("Something spicy with noodles would be great.", "prefer(spicy, noodle)"),
    ex("I don't want anything with curry, and nothing too expensive.", "not_prefer(curry, expensive)"),
    ex(
        "Where is it, how far away is it, and what is its phone number?",
        "address(query), distance(query), phone number(query)",
    ),
    ex(
        "[Q: Do you have a price range in mind?] Anything is fine, but it should be good for kids.",
        "no_preference(price range), family-friendly(yes)",
    ),
    ex("Can you recommend another one?", "another_option()"),
    ex("Can you show me the restaurant you recommended at first?", "view_history(first)"),
    ex("Thank you so much for your help!", "thank"),
    ex("What's the weather like tomorrow?", "irrelevant"),
];

const SEPARATOR: &str = "###";

fn stub(utterance: &str, ctx: &ParseContext) -> String {
    let utterance = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
    match &ctx.last_question {
        Some((_, question)) if !question.trim().is_empty() => {
            format!("[Q: {}] {utterance} {SEPARATOR}", question.trim())
        }
        _ => format!("{utterance} {SEPARATOR}"),
    }
}

/// Header, one `sentence ### predicates` line per example, then the open
/// stub for the utterance.
pub fn build_prompt(utterance: &str, ctx: &ParseContext, examples: &[InContextExample]) -> String {
    let mut prompt = String::from(PROMPT_HEADER);
    prompt.push_str("\n\n");
    for e in examples {
        prompt.push_str(&format!("{} {SEPARATOR} {}\n", e.sentence, e.predicates));
    }
    prompt.push_str(&stub(utterance, ctx));
    prompt
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("completion backend unavailable: {0}")]
    Unavailable(String),
}

/// Anything that continues a prompt.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

impl<F> CompletionClient for F
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self(prompt)
    }
}

#[derive(Debug, Error)]
enum AttemptError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("malformed completion: {0}")]
    Malformed(#[from] TermError),
}

fn interpret(completion: &str) -> Result<ParseResult, TermError> {
    let line = completion.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.split(SEPARATOR).next().unwrap_or("").trim();
    if let Ok(label) = line.parse::<Label>() {
        if label != Label::Content {
            return Ok(ParseResult::label_only(label));
        }
    }
    Ok(ParseResult::content(parse_term_list(line)?))
}

/// Prompts the model, retrying once on a transport error or malformed
/// output; after that the turn is treated as irrelevant and marked degraded.
pub fn llm_parse(
    utterance: &str,
    ctx: &ParseContext,
    client: &dyn CompletionClient,
    examples: &[InContextExample],
) -> ParseResult {
    let prompt = build_prompt(utterance, ctx, examples);
    let attempt = || -> Result<ParseResult, AttemptError> { Ok(interpret(&client.complete(&prompt)?)?) };
    match attempt().or_else(|first| {
        warn!(error = %first, "semantic parse attempt failed; retrying");
        attempt()
    }) {
        Ok(result) => result,
        Err(second) => {
            warn!(error = %second, "semantic parse failed twice; treating turn as irrelevant");
            ParseResult { degraded: true, ..ParseResult::label_only(Label::Irrelevant) }
        }
    }
}

pub struct LlmParser<C> {
    client: C,
    examples: Vec<InContextExample>,
}

impl<C: CompletionClient> LlmParser<C> {
    pub fn new(client: C) -> Self {
        LlmParser { client, examples: DEFAULT_EXAMPLES.to_vec() }
    }

    pub fn with_examples(client: C, examples: Vec<InContextExample>) -> Self {
        LlmParser { client, examples }
    }
}

impl<C: CompletionClient> SemanticParser for LlmParser<C> {
    fn parse(&self, utterance: &str, ctx: &ParseContext) -> ParseResult {
        llm_parse(utterance, ctx, &self.client, &self.examples)
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}

/// Serves recorded completions keyed by utterance, for offline runs.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    completions: HashMap<String, String>,
}

impl ReplayClient {
    pub fn new(recorded: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayClient {
            completions: recorded.into_iter().map(|(u, c)| (fold_text(&u), c)).collect(),
        }
    }

    /// Reads a JSON object mapping utterances to completions.
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        let map: HashMap<String, String> = serde_json::from_str(text)?;
        Ok(ReplayClient::new(map))
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ReplayClient::from_json_str(&text).map_err(std::io::Error::other)
    }

    /// Recovers the utterance from the prompt's final stub line.
    fn utterance_of(prompt: &str) -> &str {
        let last = prompt.lines().last().unwrap_or("");
        let last = last.strip_suffix(SEPARATOR).unwrap_or(last).trim();
        match last.strip_prefix("[Q:") {
            Some(rest) => rest.split_once(']').map(|(_, u)| u.trim()).unwrap_or(rest),
            None => last,
        }
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let utterance = ReplayClient::utterance_of(prompt);
        self.completions
            .get(&fold_text(utterance))
            .cloned()
            .ok_or_else(|| BackendError::Unavailable(format!("no recording for {utterance:?}")))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::kb::Attribute;
    use crate::terms::serialize_term_list;

    #[test]
    fn prompt_layout() {
        let ctx = ParseContext {
            last_question: Some((Attribute::FoodType, "Any food type in mind?".into())),
            ..Default::default()
        };
        let prompt = build_prompt("Thai,\n please", &ctx, &DEFAULT_EXAMPLES);
        assert!(!PROMPT_HEADER.contains(SEPARATOR));
        assert_eq!(prompt.matches(SEPARATOR).count(), 12);
        let lines: Vec<&str> = prompt.lines().collect();
        assert_eq!(*lines.last().unwrap(), "[Q: Any food type in mind?] Thai, please ###");
        let example_lines = lines.iter().filter(|l| l.contains(SEPARATOR)).count();
        assert_eq!(example_lines, 12);
        assert!(prompt.ends_with("###"));
    }

    #[test]
    fn examples_are_well_formed_and_cover_all_attributes() {
        let mut text = String::new();
        for e in DEFAULT_EXAMPLES {
            assert!(interpret(e.predicates).is_ok(), "{}", e.predicates);
            text.push_str(e.predicates);
            text.push('\n');
        }
        for attr in Attribute::ALL {
            assert!(text.contains(attr.parser_name()), "{attr} not covered");
        }
        for needle in ["thank", "irrelevant", "query", "prefer(", "not_prefer(", "another_option", "view_history"] {
            assert!(text.contains(needle), "{needle} not covered");
        }
    }

    #[test]
    fn completion_interpretation() {
        let r = interpret(" food type(thai)\nextra junk").unwrap();
        assert_eq!(serialize_term_list(&r.predicates), "food type(thai)");
        assert_eq!(interpret("Thank").unwrap().label, Label::Thank);
        assert_eq!(interpret("").unwrap().label, Label::Irrelevant);
        assert!(interpret("food type(thai").is_err());
    }

    #[test]
    fn retries_once_then_degrades() {
        let calls = AtomicUsize::new(0);
        let flaky = |_: &str| {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            if n == 0 {
                Err(BackendError::Unavailable("timeout".into()))
            } else {
                Ok("price range(cheap)".to_string())
            }
        };
        let r = llm_parse("cheap", &ParseContext::default(), &flaky, &DEFAULT_EXAMPLES);
        assert_eq!(r.label, Label::Content);
        assert!(!r.degraded);
        assert_eq!(calls.load(Ordering::SeqCst), 2);

        let calls = AtomicUsize::new(0);
        let broken = |_: &str| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok("price range(cheap".to_string())
        };
        let r = llm_parse("cheap", &ParseContext::default(), &broken, &DEFAULT_EXAMPLES);
        assert_eq!(r.label, Label::Irrelevant);
        assert!(r.degraded);
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn replay_matches_on_utterance() {
        let client = ReplayClient::from_json_str(r#"{"Cheap, please.": "price range(cheap)"}"#).unwrap();
        let ctx = ParseContext {
            last_question: Some((Attribute::PriceRange, "Price?".into())),
            ..Default::default()
        };
        let parser = LlmParser::new(client);
        let r = parser.parse("cheap,   please.", &ctx);
        assert_eq!(serialize_term_list(&r.predicates), "price range(cheap)");
        let r = parser.parse("unrecorded", &ctx);
        assert!(r.degraded);
    }
}
