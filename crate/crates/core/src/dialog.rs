//! Dialog state tracking and the ask-or-recommend decision.
//!
//! The state is a list of `require` / `not_require` constraints plus the
//! pending (`output_list`) and already shown (`history`) recommendations.
//! `require` values are a disjunction; `not_require` values are hard
//! exclusions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Attribute, Knowledgebase};
use crate::recommend::{self, Recommendation, RecommendOutcome, RelaxationReport};
use crate::terms::{fold_text, normalize_value, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Require,
    NotRequire,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Require => "require",
            Polarity::NotRequire => "not_require",
        }
    }
}

/// What a requirement talks about: one of the nine attributes, or a
/// not-yet-expanded preference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Attr(Attribute),
    Prefer,
    NotPrefer,
}

impl Field {
    pub fn parse(raw: &str) -> Option<Field> {
        match fold_text(&raw.replace('-', "_")).as_str() {
            "prefer" => Some(Field::Prefer),
            "not_prefer" => Some(Field::NotPrefer),
            other => Attribute::lookup(other).map(Field::Attr),
        }
    }

    pub fn attribute(self) -> Option<Attribute> {
        match self {
            Field::Attr(a) => Some(a),
            _ => None,
        }
    }
}

impl From<Attribute> for Field {
    fn from(a: Attribute) -> Self {
        Field::Attr(a)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Attr(a) => f.write_str(a.as_str()),
            Field::Prefer => f.write_str("prefer"),
            Field::NotPrefer => f.write_str("not_prefer"),
        }
    }
}

impl Serialize for Field {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Field::parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("unknown field `{raw}`")))
    }
}

/// `require(field, values)` or `not_require(field, values)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Requirement {
    pub polarity: Polarity,
    pub field: Field,
    pub values: Vec<Value>,
}

impl Requirement {
    /// De-duplicates values, keeping first occurrences.
    pub fn new(polarity: Polarity, field: impl Into<Field>, values: impl IntoIterator<Item = Value>) -> Self {
        let mut out = Vec::new();
        for v in values {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Requirement {
            polarity,
            field: field.into(),
            values: out,
        }
    }

    pub fn require(attribute: Attribute, values: impl IntoIterator<Item = Value>) -> Self {
        Requirement::new(Polarity::Require, attribute, values)
    }

    pub fn not_require(attribute: Attribute, values: impl IntoIterator<Item = Value>) -> Self {
        Requirement::new(Polarity::NotRequire, attribute, values)
    }

    /// Builds from raw strings, normalizing each.
    pub fn raw(polarity: Polarity, field: impl Into<Field>, values: &[&str]) -> Self {
        Requirement::new(polarity, field, values.iter().map(|v| normalize_value(v)))
    }

    pub fn attribute(&self) -> Option<Attribute> {
        self.field.attribute()
    }

    pub fn is_query(&self) -> bool {
        self.values.iter().any(Value::is_query)
    }

    /// True when every value is concrete, i.e. the requirement filters places.
    pub fn is_constraint(&self) -> bool {
        !self.values.is_empty() && self.values.iter().all(Value::is_concrete)
    }

    pub fn concrete_values(&self) -> impl Iterator<Item = &str> {
        self.values.iter().filter_map(Value::as_concrete)
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},[", self.polarity.as_str(), quote(&self.field.to_string()))?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(&quote(v.text()))?;
        }
        f.write_str("])")
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// How a new concrete value for an attribute that already has concrete values
/// is merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// Widen the disjunction.
    #[default]
    Union,
    /// Latest answer wins.
    Replace,
}

pub const DEFAULT_KEY_INFO: [Attribute; 3] = [
    Attribute::FoodType,
    Attribute::PriceRange,
    Attribute::CustomerRating,
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DialogError {
    #[error("{0} has no finite value domain")]
    NoFiniteDomain(Attribute),
    #[error("malformed state listing at byte {0}")]
    MalformedListing(usize),
}

/// Per-session reasoning state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub requirements: Vec<Requirement>,
    /// Matching places not yet shown, best first.
    pub output_list: Vec<u32>,
    /// Places already recommended, oldest first.
    pub history: Vec<u32>,
    pub key_info: Vec<Attribute>,
    #[serde(default)]
    pub merge_policy: MergePolicy,
    /// Set once a recommendation search has run in this session.
    #[serde(default)]
    pub searched: bool,
}

impl Default for DialogState {
    fn default() -> Self {
        DialogState::with_key_info(DEFAULT_KEY_INFO.to_vec())
    }
}

impl DialogState {
    pub fn with_key_info(key_info: Vec<Attribute>) -> Self {
        DialogState {
            requirements: Vec::new(),
            output_list: Vec::new(),
            history: Vec::new(),
            key_info,
            merge_policy: MergePolicy::Union,
            searched: false,
        }
    }

    fn position(&self, polarity: Polarity, attribute: Attribute) -> Option<usize> {
        self.requirements
            .iter()
            .position(|r| r.polarity == polarity && r.field == Field::Attr(attribute))
    }

    pub fn get(&self, polarity: Polarity, attribute: Attribute) -> Option<&Requirement> {
        self.position(polarity, attribute).map(|i| &self.requirements[i])
    }

    /// Merges already-expanded requirements into the state, in order.
    pub fn apply(&mut self, incoming: &[Requirement]) {
        for req in incoming {
            let Some(attribute) = req.attribute() else {
                continue;
            };
            match req.polarity {
                Polarity::Require => self.merge_require(attribute, &req.values),
                Polarity::NotRequire => self.merge_not_require(attribute, &req.values),
            }
        }
    }

    fn merge_require(&mut self, attribute: Attribute, values: &[Value]) {
        let concrete: Vec<Value> = values.iter().filter(|v| v.is_concrete()).cloned().collect();
        let existing = self.position(Polarity::Require, attribute);

        if concrete.is_empty() {
            let marker = if values.contains(&Value::Query) {
                Value::Query
            } else if values.contains(&Value::Any) {
                Value::Any
            } else {
                return;
            };
            match existing {
                // Known information wins over a fresh question; a wildcard
                // only replaces an open question.
                Some(i) => {
                    let current = &mut self.requirements[i];
                    if marker == Value::Any && current.values == [Value::Query] {
                        current.values = vec![Value::Any];
                    }
                }
                None => self
                    .requirements
                    .push(Requirement::require(attribute, [marker])),
            }
            return;
        }

        match existing {
            Some(i) => {
                let current = &mut self.requirements[i];
                let open = current.values.iter().any(|v| !v.is_concrete());
                if open || self.merge_policy == MergePolicy::Replace {
                    current.values.clear();
                }
                for v in &concrete {
                    if !current.values.contains(v) {
                        current.values.push(v.clone());
                    }
                }
            }
            None => self
                .requirements
                .push(Requirement::require(attribute, concrete.iter().cloned())),
        }

        if let Some(j) = self.position(Polarity::NotRequire, attribute) {
            self.requirements[j].values.retain(|v| !concrete.contains(v));
            if self.requirements[j].values.is_empty() {
                self.requirements.remove(j);
            }
        }
    }

    fn merge_not_require(&mut self, attribute: Attribute, values: &[Value]) {
        let concrete: Vec<Value> = values.iter().filter(|v| v.is_concrete()).cloned().collect();
        if concrete.is_empty() {
            return;
        }
        match self.position(Polarity::NotRequire, attribute) {
            Some(i) => {
                let current = &mut self.requirements[i];
                for v in &concrete {
                    if !current.values.contains(v) {
                        current.values.push(v.clone());
                    }
                }
            }
            None => self
                .requirements
                .push(Requirement::not_require(attribute, concrete.iter().cloned())),
        }
        if let Some(j) = self.position(Polarity::Require, attribute) {
            let req = &mut self.requirements[j];
            req.values.retain(|v| !concrete.contains(v));
            if req.values.is_empty() {
                self.requirements.remove(j);
            }
        }
    }

    /// Records that the user does not care about `attribute`: the full value
    /// domain where one exists, a wildcard otherwise.
    pub fn record_no_preference(&mut self, attribute: Attribute) {
        let values: Vec<Value> = match full_domain(attribute) {
            Ok(domain) => domain.iter().map(|v| Value::concrete(*v)).collect(),
            Err(DialogError::NoFiniteDomain(_)) | Err(_) => vec![Value::Any],
        };
        self.apply(&[Requirement::require(attribute, values)]);
    }

    /// Attributes with a `require(A, [query])` entry, in state order.
    pub fn query_list(&self) -> Vec<Attribute> {
        self.requirements
            .iter()
            .filter(|r| r.polarity == Polarity::Require && r.values == [Value::Query])
            .filter_map(Requirement::attribute)
            .collect()
    }

    /// `require(...)` / `not_require(...)` listing, one requirement per line.
    pub fn listing(&self) -> String {
        self.requirements
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",\n")
    }

    /// Every violated state invariant, described. Empty when healthy.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.requirements.iter().enumerate() {
            if r.attribute().is_none() {
                out.push(format!("unexpanded preference {r}"));
            }
            if r.values.is_empty() {
                out.push(format!("empty value list in {r}"));
            }
            if self.requirements[..i]
                .iter()
                .any(|o| o.polarity == r.polarity && o.field == r.field)
            {
                out.push(format!("duplicate entry for {}", r.field));
            }
            match r.polarity {
                Polarity::NotRequire => {
                    if !r.is_constraint() {
                        out.push(format!("sentinel inside {r}"));
                    }
                }
                Polarity::Require => {
                    let has_concrete = r.values.iter().any(Value::is_concrete);
                    let has_marker = r.values.iter().any(|v| !v.is_concrete());
                    if has_concrete && has_marker {
                        out.push(format!("sentinel mixed with values in {r}"));
                    }
                    if let Some(a) = r.attribute() {
                        if let Some(neg) = self.get(Polarity::NotRequire, a) {
                            if r.values.iter().any(|v| neg.values.contains(v)) {
                                out.push(format!("{a} both required and excluded"));
                            }
                        }
                    }
                }
            }
        }
        if self.history.iter().any(|id| self.output_list.contains(id)) {
            out.push("history overlaps output list".into());
        }
        out
    }
}

/// Functional form of [`DialogState::apply`].
pub fn update_state(incoming: &[Requirement], state: &DialogState) -> DialogState {
    let mut next = state.clone();
    next.apply(incoming);
    next
}

/// The closed value domain of an attribute.
pub fn full_domain(attribute: Attribute) -> Result<&'static [&'static str], DialogError> {
    attribute
        .finite_domain()
        .ok_or(DialogError::NoFiniteDomain(attribute))
}

/// The next key attribute to ask about: the first one, in `key_info` order,
/// that is an open question or has not been mentioned at all. A `not_require`
/// entry alone counts as mentioned.
pub fn next_info(state: &DialogState) -> Option<Attribute> {
    state.key_info.iter().copied().find(|&a| {
        match state.get(Polarity::Require, a) {
            Some(r) => r.values.contains(&Value::Query),
            None => state.get(Polarity::NotRequire, a).is_none(),
        }
    })
}

/// Canned reply kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "canned")]
pub enum CannedKind {
    Greeting,
    Thank,
    Irrelevant,
    /// Every matching place has already been shown.
    Exhausted,
    NoPriorRecommendation,
    EmptyHistory,
    HistoryOutOfRange { requested: String },
    /// Preferences that cannot hold together.
    Conflict { attribute: Attribute, concepts: Vec<String> },
}

/// What the agent does this turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AgentAction {
    Ask { attribute: Attribute },
    Recommend(Recommendation),
    NoResult(RelaxationReport),
    Canned(CannedKind),
}

impl AgentAction {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentAction::Ask { .. } => "ask",
            AgentAction::Recommend(_) => "recommend",
            AgentAction::NoResult(_) => "no_result",
            AgentAction::Canned(_) => "canned",
        }
    }
}

/// Ask for the next missing key attribute, or search.
pub fn next_action(state: &mut DialogState, kb: &Knowledgebase) -> AgentAction {
    if let Some(attribute) = next_info(state) {
        return AgentAction::Ask { attribute };
    }
    match recommend::recommend(state, kb) {
        RecommendOutcome::Found(rec) => AgentAction::Recommend(rec),
        RecommendOutcome::NoResult(report) => AgentAction::NoResult(report),
        RecommendOutcome::AllShown => AgentAction::Canned(CannedKind::Exhausted),
    }
}

/// Parses a listing such as
/// `require('name',['query']), not_require('food type', ['Indian','Thai'])`.
pub fn parse_listing(text: &str) -> Result<Vec<Requirement>, DialogError> {
    ListingParser { src: text, pos: 0 }.parse()
}

struct ListingParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ListingParser<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += self.peek().unwrap().len_utf8();
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DialogError> {
        self.skip();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(DialogError::MalformedListing(self.pos))
        }
    }

    fn atom(&mut self) -> Result<String, DialogError> {
        self.skip();
        let start = self.pos;
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut out = String::new();
            loop {
                let c = self.peek().ok_or(DialogError::MalformedListing(start))?;
                self.pos += c.len_utf8();
                if c == '\'' {
                    if self.peek() == Some('\'') {
                        self.pos += 1;
                        out.push('\'');
                    } else {
                        return Ok(out);
                    }
                } else {
                    out.push(c);
                }
            }
        }
        while let Some(c) = self.peek() {
            if matches!(c, ',' | ']' | ')' | '(' | '[') {
                break;
            }
            self.pos += c.len_utf8();
        }
        let text = self.src[start..self.pos].trim();
        if text.is_empty() {
            return Err(DialogError::MalformedListing(start));
        }
        Ok(text.to_string())
    }

    fn parse(mut self) -> Result<Vec<Requirement>, DialogError> {
        let mut out = Vec::new();
        loop {
            self.skip();
            while self.peek() == Some(',') {
                self.pos += 1;
                self.skip();
            }
            if self.peek().is_none() {
                return Ok(out);
            }
            let start = self.pos;
            let head = self.atom()?;
            let polarity = match head.as_str() {
                "require" => Polarity::Require,
                "not_require" => Polarity::NotRequire,
                _ => return Err(DialogError::MalformedListing(start)),
            };
            self.expect('(')?;
            let field_at = self.pos;
            let field = Field::parse(&self.atom()?).ok_or(DialogError::MalformedListing(field_at))?;
            self.expect(',')?;
            self.expect('[')?;
            let mut values = Vec::new();
            self.skip();
            if self.peek() != Some(']') {
                loop {
                    values.push(normalize_value(&self.atom()?));
                    self.skip();
                    if self.peek() == Some(',') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(']')?;
            self.expect(')')?;
            out.push(Requirement::new(polarity, field, values));
        }
    }
}
