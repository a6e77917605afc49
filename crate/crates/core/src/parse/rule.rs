//! Lexicon-driven parser. Greedy longest-match over word tokens, clause-scoped
//! negation, money amounts bucketed into price ranges.

use std::collections::HashMap;

use crate::commonsense::StyleTable;
use crate::kb::{Attribute, Knowledgebase, Vocabulary};
use crate::recommend::HistoryRef;
use crate::terms::{Label, Predicate, Value};

use super::{parser_vocabulary, ParseContext, ParseResult, SemanticParser};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceThresholds {
    /// Amounts strictly below this are cheap.
    pub cheap_below: f64,
    /// Amounts strictly above this are expensive.
    pub expensive_above: f64,
}

impl Default for PriceThresholds {
    fn default() -> Self {
        PriceThresholds { cheap_below: 15.0, expensive_above: 40.0 }
    }
}

impl PriceThresholds {
    pub fn bucket(&self, amount: f64) -> &'static str {
        if amount < self.cheap_below {
            "cheap"
        } else if amount > self.expensive_above {
            "expensive"
        } else {
            "moderate"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Low,
    Mid,
    High,
    Good,
    Bad,
}

impl Level {
    fn price(self) -> Option<&'static str> {
        match self {
            Level::Low | Level::Good => Some("cheap"),
            Level::Mid => Some("moderate"),
            Level::High => Some("expensive"),
            Level::Bad => None,
        }
    }

    fn rating(self) -> &'static str {
        match self {
            Level::Low | Level::Bad => "low",
            Level::Mid => "average",
            Level::High | Level::Good => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cue {
    Value(Attribute, String),
    Concept(String),
    Name(String),
    Level(Level),
    PriceWord,
    RatingWord,
    Query(Attribute),
    Negator,
    Family,
    Meal,
    Thanks,
    NoPreference,
}

const NEGATORS: &[&str] = &[
    "don't", "dont", "do not", "doesn't", "does not", "not", "no", "except", "without", "never",
    "hate", "dislike", "avoid", "nothing", "isn't", "aren't", "won't", "can't", "rather not",
];

const PRICE_VALUES: &[(&str, &str)] = &[
    ("cheap", "cheap"),
    ("cheaper", "cheap"),
    ("inexpensive", "cheap"),
    ("affordable", "cheap"),
    ("budget friendly", "cheap"),
    ("low cost", "cheap"),
    ("as cheap as possible", "cheap"),
    ("moderate", "moderate"),
    ("moderately priced", "moderate"),
    ("mid range", "moderate"),
    ("reasonably priced", "moderate"),
    ("reasonable", "moderate"),
    ("expensive", "expensive"),
    ("pricey", "expensive"),
    ("upscale", "expensive"),
    ("high end", "expensive"),
    ("fancy", "expensive"),
    ("luxurious", "expensive"),
];

const LEVELS: &[(&str, Level)] = &[
    ("low", Level::Low),
    ("lower", Level::Low),
    ("lowest", Level::Low),
    ("average", Level::Mid),
    ("medium", Level::Mid),
    ("mid", Level::Mid),
    ("decent", Level::Mid),
    ("okay", Level::Mid),
    ("ok", Level::Mid),
    ("high", Level::High),
    ("higher", Level::High),
    ("highest", Level::High),
    ("highly", Level::High),
    ("top", Level::High),
    ("good", Level::Good),
    ("great", Level::Good),
    ("excellent", Level::Good),
    ("best", Level::Good),
    ("positive", Level::Good),
    ("bad", Level::Bad),
    ("poor", Level::Bad),
    ("negative", Level::Bad),
];

const PRICE_CUES: &[&str] =
    &["price", "prices", "priced", "pricing", "price range", "budget", "cost", "costs"];
const RATING_CUES: &[&str] = &[
    "rating", "ratings", "rated", "review", "reviews", "reviewed", "stars", "star", "score",
    "customer rating",
];

const QUERIES: &[(&str, Attribute)] = &[
    ("recommend", Attribute::Name),
    ("suggest", Attribute::Name),
    ("find", Attribute::Name),
    ("somewhere", Attribute::Name),
    ("some place", Attribute::Name),
    ("a place", Attribute::Name),
    ("any place", Attribute::Name),
    ("any places", Attribute::Name),
    ("what's it called", Attribute::Name),
    ("name of", Attribute::Name),
    ("where", Attribute::Address),
    ("address", Attribute::Address),
    ("located", Attribute::Address),
    ("location", Attribute::Address),
    ("phone", Attribute::PhoneNumber),
    ("phone number", Attribute::PhoneNumber),
    ("telephone", Attribute::PhoneNumber),
    ("call", Attribute::PhoneNumber),
    ("contact", Attribute::PhoneNumber),
    ("how far", Attribute::Distance),
    ("distance", Attribute::Distance),
];

const FAMILY: &[&str] = &[
    "family", "families", "family friendly", "kid", "kids", "kid friendly", "child", "children",
    "child friendly",
];

const MEALS: &[&str] = &["dinner", "lunch", "breakfast", "brunch", "meal", "dine", "dining"];

const THANKS: &[&str] = &["thank", "thanks", "thank you", "thx", "appreciate", "appreciated"];

const NO_PREFERENCE: &[&str] = &[
    "no preference",
    "no preferences",
    "no particular",
    "no specific",
    "nothing specific",
    "nothing in particular",
    "not looking for a specific",
    "not looking for a particular",
    "not looking for any specific",
    "doesn't matter",
    "does not matter",
    "don't care",
    "do not care",
    "don't mind",
    "anything",
    "whatever",
    "either",
    "not picky",
    "open to anything",
    "any is fine",
];

/// Phrases that mean a style concept, beyond the concept words themselves.
const CONCEPT_PHRASES: &[(&str, &str)] = &[
    ("a drink", "drink"),
    ("drinks", "drink"),
    ("to drink", "drink"),
    ("for drinks", "drink"),
];

/// Concepts whose bare word is too often a verb to trust.
const VERB_CONCEPTS: &[&str] = &["drink"];

const VALUE_ALIASES: &[(&str, Attribute, &str)] = &[
    ("bar", Attribute::Establishment, "bar"),
    ("bars", Attribute::Establishment, "bar"),
    ("pubs", Attribute::Establishment, "pub"),
    ("brewery", Attribute::Establishment, "bar"),
    ("cafe", Attribute::Establishment, "coffee shop"),
    ("café", Attribute::Establishment, "coffee shop"),
    ("coffee house", Attribute::Establishment, "coffee shop"),
    ("restaurants", Attribute::Establishment, "restaurant"),
    ("burgers", Attribute::FoodType, "burger"),
    ("sushi", Attribute::FoodType, "japanese"),
    ("ramen", Attribute::FoodType, "japanese"),
    ("tacos", Attribute::FoodType, "mexican"),
    ("boba", Attribute::FoodType, "bubble tea"),
];

const ORDINALS: &[&str] =
    &["first", "last", "second", "third", "fourth", "fifth", "1st", "2nd", "3rd", "previous"];
const PAST_MENTION: &[&str] =
    &["recommended", "suggested", "mentioned", "showed", "gave", "said", "told", "recommend"];
const ALTERNATIVE: &[&str] = &["another", "other", "different", "else", "next", "alternative"];
const OPTION_NOUNS: &[&str] = &[
    "one", "ones", "option", "options", "recommendation", "recommendations", "place", "places",
    "restaurant", "restaurants", "suggestion", "suggestions", "choice", "choices",
];

/// Phrase table built from the knowledgebase, style rules and fixed word lists.
#[derive(Debug, Clone)]
pub struct Lexicon {
    /// Keyed by first token; each list sorted longest phrase first.
    entries: HashMap<String, Vec<(Vec<String>, Cue)>>,
    pub thresholds: PriceThresholds,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::new(&Vocabulary::default(), &StyleTable::default(), std::iter::empty())
    }
}

impl Lexicon {
    pub fn from_kb(kb: &Knowledgebase, style: &StyleTable) -> Self {
        Lexicon::new(&kb.vocabulary(), style, kb.places().iter().map(|p| p.name.clone()))
    }

    pub fn new(kb_vocab: &Vocabulary, style: &StyleTable, names: impl IntoIterator<Item = String>) -> Self {
        let mut lex = Lexicon { entries: HashMap::new(), thresholds: PriceThresholds::default() };
        // Earlier insertions win on identical phrases.
        for name in names {
            let folded = crate::terms::fold_text(&name);
            lex.add(&folded, Cue::Name(folded.clone()));
        }
        for n in NO_PREFERENCE {
            lex.add(n, Cue::NoPreference);
        }
        for n in NEGATORS {
            lex.add(n, Cue::Negator);
        }
        for (phrase, value) in PRICE_VALUES {
            lex.add(phrase, Cue::Value(Attribute::PriceRange, value.to_string()));
        }
        for (phrase, attr, value) in VALUE_ALIASES {
            lex.add(phrase, Cue::Value(*attr, value.to_string()));
        }
        lex.add("well rated", Cue::Value(Attribute::CustomerRating, "high".into()));
        lex.add("good reviews", Cue::Value(Attribute::CustomerRating, "high".into()));
        for (phrase, concept) in CONCEPT_PHRASES {
            lex.add(phrase, Cue::Concept(concept.to_string()));
        }
        for rule in style.rules() {
            if VERB_CONCEPTS.contains(&rule.concept.as_str()) {
                continue;
            }
            lex.add(&rule.concept, Cue::Concept(rule.concept.clone()));
            lex.add(&format!("{}s", rule.concept), Cue::Concept(rule.concept.clone()));
        }
        let vocab = parser_vocabulary(kb_vocab);
        for attr in [Attribute::FoodType, Attribute::Establishment] {
            for value in vocab.values(attr) {
                lex.add(value, Cue::Value(attr, value.clone()));
            }
        }
        for (phrase, level) in LEVELS {
            lex.add(phrase, Cue::Level(*level));
        }
        for p in PRICE_CUES {
            lex.add(p, Cue::PriceWord);
        }
        for r in RATING_CUES {
            lex.add(r, Cue::RatingWord);
        }
        for (q, attr) in QUERIES {
            lex.add(q, Cue::Query(*attr));
        }
        for f in FAMILY {
            lex.add(f, Cue::Family);
        }
        for m in MEALS {
            lex.add(m, Cue::Meal);
        }
        for t in THANKS {
            lex.add(t, Cue::Thanks);
        }
        for list in lex.entries.values_mut() {
            list.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        }
        lex
    }

    fn add(&mut self, phrase: &str, cue: Cue) {
        let tokens: Vec<String> = tokenize(phrase).into_iter().flatten().collect();
        let Some(first) = tokens.first().cloned() else {
            return;
        };
        let list = self.entries.entry(first).or_default();
        if list.iter().any(|(p, _)| *p == tokens) {
            return;
        }
        list.push((tokens, cue));
    }

    fn longest_match(&self, tokens: &[String], used: &[bool], at: usize) -> Option<(usize, &Cue)> {
        let list = self.entries.get(&tokens[at])?;
        list.iter().find_map(|(phrase, cue)| {
            let end = at + phrase.len();
            (end <= tokens.len()
                && tokens[at..end] == phrase[..]
                && !used[at..end].iter().any(|u| *u))
            .then_some((phrase.len(), cue))
        })
    }
}

/// Lower-cased word tokens grouped by clause. Sentence punctuation and
/// contrastive conjunctions end a clause; commas are kept as tokens.
fn tokenize(text: &str) -> Vec<Vec<String>> {
    let text = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let chars: Vec<char> = text.chars().collect();
    let mut clauses: Vec<Vec<String>> = vec![Vec::new()];
    let mut word = String::new();
    let flush = |word: &mut String, clauses: &mut Vec<Vec<String>>| {
        if word.is_empty() {
            return;
        }
        let w = std::mem::take(word);
        let w = w.trim_matches('\'').to_string();
        if w.is_empty() {
            return;
        }
        if matches!(w.as_str(), "but" | "however" | "though" | "although") {
            clauses.push(Vec::new());
        } else {
            clauses.last_mut().expect("never empty").push(w);
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        let digit_around = |j: Option<usize>| j.and_then(|j| chars.get(j)).is_some_and(|c| c.is_ascii_digit());
        let decimal_point = c == '.' && digit_around(i.checked_sub(1)) && digit_around(Some(i + 1));
        if c.is_alphanumeric() || c == '\'' || c == '&' || decimal_point {
            word.push(c);
        } else {
            flush(&mut word, &mut clauses);
            match c {
                '.' | '!' | '?' | ';' => clauses.push(Vec::new()),
                ',' => clauses.last_mut().expect("never empty").push(",".into()),
                '$' => clauses.last_mut().expect("never empty").push("$".into()),
                _ => {}
            }
        }
    }
    flush(&mut word, &mut clauses);
    clauses.retain(|c| !c.is_empty());
    clauses
}

fn number_word(w: &str) -> Option<f64> {
    const UNITS: [&str; 20] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 8] = ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];
    if let Some(i) = UNITS.iter().position(|u| *u == w) {
        return Some(i as f64);
    }
    TENS.iter().position(|t| *t == w).map(|i| (i as f64 + 2.0) * 10.0)
}

/// Reads a number starting at `at`: digits, or number words such as
/// "twenty five". Returns the value and the token count.
fn read_number(tokens: &[String], at: usize) -> Option<(f64, usize)> {
    let tok = tokens.get(at)?;
    if let Ok(n) = tok.parse::<f64>() {
        return Some((n, 1));
    }
    let mut total = number_word(tok)?;
    let mut len = 1;
    if total >= 20.0 {
        if let Some(unit) = tokens.get(at + 1).and_then(|t| number_word(t)) {
            if unit < 10.0 {
                total += unit;
                len += 1;
            }
        }
    }
    if tokens.get(at + len).is_some_and(|t| t == "hundred") {
        total *= 100.0;
        len += 1;
    }
    Some((total, len))
}

const MONEY_AFTER: &[&str] = &["dollars", "dollar", "bucks", "usd"];
const UPPER_STRICT: &[&[&str]] = &[&["less", "than"], &["under"], &["below"], &["cheaper", "than"]];
const UPPER_INCLUSIVE: &[&[&str]] =
    &[&["at", "most"], &["no", "more", "than"], &["up", "to"], &["within"], &["max"], &["maximum"]];
const LOWER: &[&[&str]] = &[&["more", "than"], &["over"], &["above"], &["at", "least"]];

/// Finds money amounts, marks their tokens used and returns (position, price value).
fn money_amounts(tokens: &[String], used: &mut [bool], thresholds: &PriceThresholds) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let dollar_sign = tokens[i] == "$";
        let num_at = if dollar_sign { i + 1 } else { i };
        let Some((amount, len)) = read_number(tokens, num_at) else {
            i += 1;
            continue;
        };
        let after = num_at + len;
        let unit_after = tokens.get(after).is_some_and(|t| MONEY_AFTER.contains(&t.as_str()));
        if !dollar_sign && !unit_after {
            i += 1;
            continue;
        }
        let start = i;
        let end = if unit_after { after + 1 } else { after };
        let preceding = |phrase: &[&str]| {
            start >= phrase.len() && tokens[start - phrase.len()..start].iter().zip(phrase).all(|(a, b)| a == b)
        };
        let mut effective = amount;
        let mut from = start;
        if let Some(p) = UPPER_STRICT.iter().find(|p| preceding(p)) {
            effective = amount - 0.01;
            from = start - p.len();
        } else if let Some(p) = UPPER_INCLUSIVE.iter().find(|p| preceding(p)) {
            from = start - p.len();
        } else if let Some(p) = LOWER.iter().find(|p| preceding(p)) {
            effective = amount + 0.01;
            from = start - p.len();
        }
        for u in &mut used[from..end] {
            *u = true;
        }
        out.push((from, thresholds.bucket(effective).to_string()));
        i = end;
    }
    out
}

fn contains_any(tokens: &[String], words: &[&str]) -> bool {
    tokens.iter().any(|t| words.contains(&t.as_str()))
}

fn special_in(clause: &[String]) -> Option<Predicate> {
    if contains_any(clause, ORDINALS) && contains_any(clause, PAST_MENTION)
        || clause.windows(3).any(|w| w[0] == "the" && ORDINALS.contains(&w[1].as_str()) && w[2] == "one")
    {
        let ordinal = clause.iter().find(|t| ORDINALS.contains(&t.as_str()))?;
        let target = HistoryRef::parse(ordinal).to_string();
        return Some(Predicate::new("view_history", [Value::concrete(target)]));
    }
    let alternative = clause.iter().enumerate().any(|(i, t)| {
        ALTERNATIVE.contains(&t.as_str())
            && clause[i + 1..].iter().take(2).any(|n| OPTION_NOUNS.contains(&n.as_str()))
    });
    let something_else = clause
        .windows(2)
        .any(|w| matches!(w[0].as_str(), "something" | "anything" | "what" | "anywhere") && w[1] == "else");
    (alternative || something_else).then(|| Predicate::new("another_option", []))
}

/// Ordered accumulation of predicate arguments by predicate name.
#[derive(Default)]
struct Output {
    preds: Vec<(String, Vec<Value>)>,
}

impl Output {
    fn add(&mut self, name: &str, value: Value) {
        match self.preds.iter_mut().find(|(n, _)| n == name) {
            Some((_, values)) => {
                if !values.contains(&value) {
                    values.push(value);
                }
            }
            None => self.preds.push((name.to_string(), vec![value])),
        }
    }

    fn attr(&mut self, attr: Attribute, value: &str, negated: bool) {
        if negated {
            self.add("not_prefer", Value::concrete(value));
        } else {
            self.add(attr.parser_name(), Value::concrete(value));
        }
    }

    fn finish(self) -> Vec<Predicate> {
        self.preds.into_iter().map(|(n, v)| Predicate::new(&n, v)).collect()
    }
}

pub fn rule_parse(utterance: &str, ctx: &ParseContext, lexicon: &Lexicon) -> ParseResult {
    let clauses = tokenize(utterance);
    let mut out = Output::default();
    let mut specials: Vec<Predicate> = Vec::new();
    let mut thanks = false;
    let mut no_preference = false;
    let mut cue_attribute: Option<Attribute> = None;

    for clause in &clauses {
        if let Some(special) = special_in(clause) {
            if !specials.contains(&special) {
                specials.push(special);
            }
        }
        let mut used = vec![false; clause.len()];
        let money = money_amounts(clause, &mut used, &lexicon.thresholds);
        let mut cues: Vec<(usize, Cue)> = Vec::new();
        let mut i = 0;
        while i < clause.len() {
            if used[i] {
                i += 1;
                continue;
            }
            match lexicon.longest_match(clause, &used, i) {
                Some((len, cue)) => {
                    // "no" is only a negator when something follows directly.
                    let bare_no = clause[i] == "no"
                        && len == 1
                        && clause.get(i + 1).is_none_or(|t| t == ",");
                    if !bare_no {
                        cues.push((i, cue.clone()));
                    }
                    for u in &mut used[i..i + len] {
                        *u = true;
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        cues.extend(money.into_iter().map(|(pos, v)| (pos, Cue::Value(Attribute::PriceRange, v))));
        cues.sort_by_key(|(pos, _)| *pos);

        let first_negator = cues.iter().find(|(_, c)| *c == Cue::Negator).map(|(p, _)| *p);
        let negated = |pos: usize| first_negator.is_some_and(|n| n < pos);
        let cue_positions = |want: &Cue| -> Vec<usize> {
            cues.iter().filter(|(_, c)| c == want).map(|(p, _)| *p).collect()
        };
        let price_cues = cue_positions(&Cue::PriceWord);
        let rating_cues = cue_positions(&Cue::RatingWord);
        if let Some(attr) = match (price_cues.is_empty(), rating_cues.is_empty()) {
            (false, true) => Some(Attribute::PriceRange),
            (true, false) => Some(Attribute::CustomerRating),
            _ => None,
        } {
            cue_attribute.get_or_insert(attr);
        }

        for (pos, cue) in &cues {
            let pos = *pos;
            match cue {
                Cue::Value(attr, value) => out.attr(*attr, value, negated(pos)),
                Cue::Concept(concept) => {
                    let name = if negated(pos) { "not_prefer" } else { "prefer" };
                    out.add(name, Value::concrete(concept));
                }
                Cue::Name(name) => {
                    if !negated(pos) {
                        specials.retain(|s| s.name != "view_history");
                        specials.push(Predicate::new("view_history", [Value::concrete(name)]));
                    }
                }
                Cue::Level(level) => {
                    let nearest = |cues: &[usize]| cues.iter().map(|c| c.abs_diff(pos)).min();
                    let attr = match (nearest(&price_cues), nearest(&rating_cues)) {
                        (Some(p), Some(r)) => Some(if p <= r { Attribute::PriceRange } else { Attribute::CustomerRating }),
                        (Some(_), None) => Some(Attribute::PriceRange),
                        (None, Some(_)) => Some(Attribute::CustomerRating),
                        (None, None) => ctx
                            .asked()
                            .filter(|a| matches!(a, Attribute::PriceRange | Attribute::CustomerRating)),
                    };
                    let value = match attr {
                        Some(Attribute::PriceRange) => level.price(),
                        Some(Attribute::CustomerRating) => Some(level.rating()),
                        _ => None,
                    };
                    if let (Some(attr), Some(value)) = (attr, value) {
                        out.attr(attr, value, negated(pos));
                    }
                }
                Cue::Query(attr) => {
                    if !negated(pos) {
                        out.add(attr.parser_name(), Value::Query);
                    }
                }
                Cue::Family => {
                    let value = if negated(pos) { "no" } else { "yes" };
                    out.add(Attribute::FamilyFriendly.parser_name(), Value::concrete(value));
                }
                Cue::Meal => {
                    if !negated(pos) {
                        out.add(Attribute::Establishment.parser_name(), Value::concrete("restaurant"));
                    }
                }
                Cue::Thanks => thanks = true,
                Cue::NoPreference => no_preference = true,
                Cue::Negator | Cue::PriceWord | Cue::RatingWord => {}
            }
        }
    }

    let mut preds = out.finish();
    if !specials.is_empty() {
        // Navigation requests keep their information queries and nothing else.
        let name = Attribute::Name.parser_name();
        preds.retain(|p| p.name != name && p.args.iter().all(Value::is_query));
        let mut all = specials;
        all.extend(preds);
        return ParseResult::content(all);
    }
    let has_constraint = preds.iter().any(|p| p.args.iter().any(Value::is_concrete));
    if no_preference && !has_constraint {
        if let Some(attr) = cue_attribute.or(ctx.asked()) {
            preds.push(Predicate::new("no_preference", [Value::concrete(attr.as_str())]));
        }
    }
    if preds.is_empty() {
        return ParseResult::label_only(if thanks { Label::Thank } else { Label::Irrelevant });
    }
    ParseResult::content(preds)
}

/// [`rule_parse`] behind the [`SemanticParser`] interface.
#[derive(Debug, Clone)]
pub struct RuleParser {
    lexicon: Lexicon,
}

impl RuleParser {
    pub fn new(lexicon: Lexicon) -> Self {
        RuleParser { lexicon }
    }
}

impl SemanticParser for RuleParser {
    fn parse(&self, utterance: &str, ctx: &ParseContext) -> ParseResult {
        rule_parse(utterance, ctx, &self.lexicon)
    }

    fn name(&self) -> &'static str {
        "rule"
    }
}
