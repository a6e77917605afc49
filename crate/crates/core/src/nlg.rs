//! Template rendering of agent actions.
//!
//! An [`AgentAction`] becomes a [`ResponsePlan`]: a list of sentence templates
//! with their `{slot}` values. Realizing the plan is plain substitution, so the
//! output is byte-for-byte deterministic for a given seed and turn number.
//! Variety comes from rotating among template variants, never from a model;
//! an optional [`Rephraser`] may reword the final text.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::dialog::{AgentAction, CannedKind, Polarity, Requirement};
use crate::kb::Attribute;
use crate::parse::{BackendError, CompletionClient};
use crate::recommend::{Justification, Recommendation, RelaxationReport, DEFAULT_DISPLAY};
use crate::terms::Value;

#[derive(Debug, Error)]
pub enum NlgError {
    #[error("template {template:?} references unfilled slot {{{slot}}}")]
    MissingSlot { template: String, slot: String },
    #[error("template field {field} uses unknown slot {{{slot}}}")]
    UnknownSlot { field: String, slot: String },
    #[error("template field {0} has no variants")]
    NoVariants(String),
    #[error("cannot read templates: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid templates: {0}")]
    Json(#[from] serde_json::Error),
}

/// Every wording the renderer uses. Lists hold rotation variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Templates {
    pub questions: BTreeMap<Attribute, String>,
    /// Used for attributes missing from `questions`.
    pub question_fallback: String,
    pub greeting: Vec<String>,
    pub thank: Vec<String>,
    pub irrelevant: Vec<String>,
    pub exhausted: Vec<String>,
    pub no_prior_recommendation: Vec<String>,
    pub empty_history: Vec<String>,
    pub history_out_of_range: Vec<String>,
    pub conflict: Vec<String>,
    pub recommend: Vec<String>,
    pub recommend_plain: String,
    pub revisit: String,
    pub price: String,
    pub rating: String,
    pub address: String,
    pub phone: String,
    pub distance: String,
    pub fact: String,
    pub justification: String,
    pub unmet: String,
    pub no_result: String,
    pub no_result_partial: String,
    pub no_result_suggest: String,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for Templates {
    fn default() -> Self {
        let questions = [
            (Attribute::FoodType, "Do you have any preference for the food type of the place?"),
            (Attribute::PriceRange, "Are you looking for a certain price range?"),
            (Attribute::CustomerRating, "Are you looking for a place with a particular customer rating?"),
            (Attribute::Establishment, "What kind of place would you like, such as a restaurant, a bar or a coffee shop?"),
            (Attribute::FamilyFriendly, "Does the place need to be family friendly?"),
        ]
        .into_iter()
        .map(|(a, q)| (a, q.to_string()))
        .collect();
        Templates {
            questions,
            question_fallback: "Do you have any preference for the {attribute} of the place?".into(),
            greeting: strings(&[
                "Hi there, how can I assist you?",
                "How can I be of service?",
                "Hi, how can I be of help?",
            ]),
            thank: strings(&[
                "It's my pleasure to help. No need to thank me.",
                "It's my pleasure to be of service.",
                "It's my pleasure to help.",
            ]),
            irrelevant: strings(&[
                "Sorry, I am only a concierge helping with my users. Can I assist you with a restaurant recommendation?",
            ]),
            exhausted: strings(&[
                "Sorry, I have already shown you every place that matches your request. Would you like to relax one of your preferences?",
                "I'm afraid there are no other places that fit everything you asked for. Shall we loosen one of the requirements?",
            ]),
            no_prior_recommendation: strings(&[
                "I haven't recommended a place yet. Tell me what you are looking for and I'll find one.",
            ]),
            empty_history: strings(&["I haven't recommended any place so far."]),
            history_out_of_range: strings(&[
                "I can't find recommendation {requested} in our conversation.",
            ]),
            conflict: strings(&[
                "I couldn't find a {attribute} that fits {concepts} at the same time. Which one matters more to you?",
            ]),
            recommend: strings(&[
                "Perhaps you are interested in {name}, which offers {cuisine} cuisine.",
                "How about {name}? It serves {cuisine} cuisine.",
                "I would suggest {name}, which offers {cuisine} cuisine.",
            ]),
            recommend_plain: "Perhaps you are interested in {name}.".into(),
            revisit: "Here are the details for {name}.".into(),
            price: "It is {price}.".into(),
            rating: "Customers have given it {rating} rating.".into(),
            address: "It is located at {address}.".into(),
            phone: "To make a reservation, you can call {phone}.".into(),
            distance: "It is {distance} miles away.".into(),
            fact: "Its {attribute} is {value}.".into(),
            justification: "It fits your request: it {reasons}.".into(),
            unmet: "Note that it does not match your current {attributes} preference.".into(),
            no_result: "Sorry, we couldn't find any results for your specifications.".into(),
            no_result_partial: "We could find results that meet the conditions of {satisfied}, but we were unable to find an option that fit within your {blocking} criteria.".into(),
            no_result_suggest: "You could try a different {attribute}, such as {values}.".into(),
        }
    }
}

impl Templates {
    pub fn from_json_str(text: &str) -> Result<Self, NlgError> {
        let t: Templates = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NlgError> {
        Templates::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Checks every template against the slots its renderer provides.
    pub fn validate(&self) -> Result<(), NlgError> {
        let mut fields: Vec<(String, Vec<&String>, &[&str])> = vec![
            ("question_fallback".into(), vec![&self.question_fallback], &["attribute"]),
            ("recommend_plain".into(), vec![&self.recommend_plain], &["name"]),
            ("revisit".into(), vec![&self.revisit], &["name"]),
            ("price".into(), vec![&self.price], &["price"]),
            ("rating".into(), vec![&self.rating], &["rating"]),
            ("address".into(), vec![&self.address], &["address"]),
            ("phone".into(), vec![&self.phone], &["phone"]),
            ("distance".into(), vec![&self.distance], &["distance"]),
            ("fact".into(), vec![&self.fact], &["attribute", "value"]),
            ("justification".into(), vec![&self.justification], &["reasons"]),
            ("unmet".into(), vec![&self.unmet], &["attributes"]),
            ("no_result".into(), vec![&self.no_result], &[]),
            ("no_result_partial".into(), vec![&self.no_result_partial], &["satisfied", "blocking"]),
            ("no_result_suggest".into(), vec![&self.no_result_suggest], &["attribute", "values"]),
        ];
        let lists: [(&str, &Vec<String>, &[&str]); 9] = [
            ("greeting", &self.greeting, &[]),
            ("thank", &self.thank, &[]),
            ("irrelevant", &self.irrelevant, &[]),
            ("exhausted", &self.exhausted, &[]),
            ("no_prior_recommendation", &self.no_prior_recommendation, &[]),
            ("empty_history", &self.empty_history, &[]),
            ("history_out_of_range", &self.history_out_of_range, &["requested"]),
            ("conflict", &self.conflict, &["attribute", "concepts"]),
            ("recommend", &self.recommend, &["name", "cuisine"]),
        ];
        for (name, variants, allowed) in lists {
            if variants.is_empty() {
                return Err(NlgError::NoVariants(name.to_string()));
            }
            fields.push((name.to_string(), variants.iter().collect(), allowed));
        }
        for (attr, q) in &self.questions {
            fields.push((format!("questions.{attr}"), vec![q], &[]));
        }
        for (field, templates, allowed) in fields {
            for t in templates {
                if let Some(slot) = slots_of(t).into_iter().find(|s| !allowed.contains(&s.as_str())) {
                    return Err(NlgError::UnknownSlot { field, slot });
                }
            }
        }
        Ok(())
    }
}

fn slots_of(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(after[..close].to_string());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

/// Substitutes `{slot}` markers; every marker must have a value.
pub fn fill(template: &str, slots: &BTreeMap<String, String>) -> Result<String, NlgError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            return Ok(out);
        };
        let slot = &after[..close];
        let value = slots.get(slot).ok_or_else(|| NlgError::MissingSlot {
            template: template.to_string(),
            slot: slot.to_string(),
        })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sentence {
    pub template: String,
    pub slots: BTreeMap<String, String>,
}

impl Sentence {
    fn new(template: &str, slots: &[(&str, String)]) -> Self {
        Sentence {
            template: template.to_string(),
            slots: slots.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }
}

/// What will be said, before realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsePlan {
    /// Mirrors [`AgentAction::kind`].
    pub kind: &'static str,
    pub sentences: Vec<Sentence>,
}

impl ResponsePlan {
    pub fn realize(&self) -> Result<String, NlgError> {
        let parts: Result<Vec<String>, NlgError> =
            self.sentences.iter().map(|s| fill(&s.template, &s.slots)).collect();
        Ok(parts?.join(" "))
    }
}

fn title_case(text: &str) -> String {
    text.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(first) => first.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn pretty(attribute: Attribute, value: &Value) -> String {
    match (attribute, value) {
        (Attribute::FoodType, Value::Concrete(v)) => title_case(v),
        (_, v) => v.text().to_string(),
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// "a", "a and b", "a, b and c".
fn join_list(items: &[String], conjunction: &str) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} {conjunction} {last}", init.join(", ")),
    }
}

fn attribute_label(attribute: Attribute) -> &'static str {
    match attribute {
        Attribute::PriceRange => "budget",
        Attribute::CustomerRating => "rating",
        other => other.as_str(),
    }
}

fn price_phrase(value: &str) -> String {
    match value {
        "cheap" => "budget-friendly".into(),
        "moderate" => "moderately priced".into(),
        "expensive" => "on the expensive side".into(),
        other => format!("in the {other} price range"),
    }
}

fn covers_domain(attribute: Attribute, values: &[Value]) -> bool {
    attribute
        .finite_domain()
        .is_some_and(|d| d.iter().all(|v| values.contains(&Value::concrete(*v))))
}

fn match_reason(attribute: Attribute, value: &Value) -> String {
    let v = pretty(attribute, value);
    match attribute {
        Attribute::FoodType => format!("serves {v} food"),
        Attribute::Establishment => format!("is {} {v}", article(&v)),
        Attribute::PriceRange => "is within your price range".into(),
        Attribute::CustomerRating => format!("has {} {v} rating", article(&v)),
        Attribute::FamilyFriendly if v == "no" => "is not family friendly".into(),
        Attribute::FamilyFriendly => "is family friendly".into(),
        other => format!("has {other} {v}"),
    }
}

fn avoid_reason(attribute: Attribute, values: &[Value]) -> String {
    let vs: Vec<String> = values.iter().map(|v| pretty(attribute, v)).collect();
    match attribute {
        Attribute::FoodType => format!("avoids {} food", join_list(&vs, "and")),
        Attribute::FamilyFriendly => match vs.as_slice() {
            [v] if v == "yes" => "is not family friendly".into(),
            [v] if v == "no" => "is family friendly".into(),
            _ => format!("avoids family friendly {}", join_list(&vs, "and")),
        },
        other => format!("is not {} for {other}", join_list(&vs, "or")),
    }
}

fn reasons(just: &Justification) -> Vec<String> {
    let mut out: Vec<String> = just
        .matched
        .iter()
        .filter(|m| !covers_domain(m.attribute, &m.required))
        .map(|m| match_reason(m.attribute, &m.matched))
        .collect();
    out.extend(just.avoided.iter().map(|(a, vs)| avoid_reason(*a, vs)));
    out
}

fn satisfied_clause(req: &Requirement) -> Option<String> {
    let attribute = req.attribute()?;
    let values: Vec<String> = req.values.iter().map(|v| pretty(attribute, v)).collect();
    let clause = match (req.polarity, attribute) {
        (Polarity::Require, Attribute::Establishment) => {
            let v = join_list(&values, "or");
            format!("the establishment type being {} {v}", article(&v))
        }
        (Polarity::Require, Attribute::FamilyFriendly) if values == ["yes"] => {
            "requiring the location to be family friendly".into()
        }
        (Polarity::Require, a) => format!("{} being {}", a.as_str(), join_list(&values, "or")),
        (Polarity::NotRequire, a) => format!("{} not being {}", a.as_str(), join_list(&values, "or")),
    };
    Some(clause)
}

/// Deterministic variant choice from the seed and turn number.
fn rotate(seed: u64, turn: u64, len: usize) -> usize {
    let mut x = seed ^ turn.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    (x % len.max(1) as u64) as usize
}

#[derive(Debug, Clone)]
pub struct Renderer {
    templates: Templates,
    seed: u64,
}

impl Default for Renderer {
    fn default() -> Self {
        Renderer::new(Templates::default(), 0)
    }
}

impl Renderer {
    pub fn new(templates: Templates, seed: u64) -> Self {
        Renderer { templates, seed }
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    fn pick<'a>(&self, variants: &'a [String], turn: u64) -> &'a str {
        &variants[rotate(self.seed, turn, variants.len())]
    }

    pub fn render_question(&self, attribute: Attribute) -> String {
        match self.templates.questions.get(&attribute) {
            Some(q) => q.clone(),
            None => self.templates.question_fallback.replace("{attribute}", attribute.as_str()),
        }
    }

    pub fn canned_text(&self, kind: &CannedKind, turn: u64) -> String {
        let t = &self.templates;
        let sentence = match kind {
            CannedKind::Greeting => Sentence::new(self.pick(&t.greeting, turn), &[]),
            CannedKind::Thank => Sentence::new(self.pick(&t.thank, turn), &[]),
            CannedKind::Irrelevant => Sentence::new(self.pick(&t.irrelevant, turn), &[]),
            CannedKind::Exhausted => Sentence::new(self.pick(&t.exhausted, turn), &[]),
            CannedKind::NoPriorRecommendation => {
                Sentence::new(self.pick(&t.no_prior_recommendation, turn), &[])
            }
            CannedKind::EmptyHistory => Sentence::new(self.pick(&t.empty_history, turn), &[]),
            CannedKind::HistoryOutOfRange { requested } => Sentence::new(
                self.pick(&t.history_out_of_range, turn),
                &[("requested", requested.clone())],
            ),
            CannedKind::Conflict { attribute, concepts } => Sentence::new(
                self.pick(&t.conflict, turn),
                &[("attribute", attribute.to_string()), ("concepts", join_list(concepts, "and"))],
            ),
        };
        realize_or_raw(&ResponsePlan { kind: "canned", sentences: vec![sentence] })
    }

    fn recommendation_plan(&self, rec: &Recommendation, turn: u64) -> Vec<Sentence> {
        let t = &self.templates;
        let name = rec.name().to_string();
        let mut out = Vec::new();
        let cuisine = rec.fact(Attribute::FoodType).map(|f| title_case(&f.display));
        if rec.revisit {
            out.push(Sentence::new(&t.revisit, &[("name", name.clone())]));
        } else {
            match cuisine {
                Some(c) if !c.is_empty() => out.push(Sentence::new(
                    self.pick(&t.recommend, turn),
                    &[("name", name.clone()), ("cuisine", c)],
                )),
                _ => out.push(Sentence::new(&t.recommend_plain, &[("name", name.clone())])),
            }
        }
        if let Some(f) = rec.fact(Attribute::PriceRange) {
            out.push(Sentence::new(&t.price, &[("price", price_phrase(f.value.text()))]));
        }
        if let Some(f) = rec.fact(Attribute::CustomerRating) {
            let r = f.value.text();
            out.push(Sentence::new(&t.rating, &[("rating", format!("{} {r}", article(r)))]));
        }
        for attribute in &rec.queried {
            if DEFAULT_DISPLAY.contains(attribute) {
                continue;
            }
            let Some(f) = rec.fact(*attribute) else {
                continue;
            };
            let s = match attribute {
                Attribute::Address => Sentence::new(&t.address, &[("address", f.display.clone())]),
                Attribute::PhoneNumber => Sentence::new(&t.phone, &[("phone", f.display.clone())]),
                Attribute::Distance => Sentence::new(&t.distance, &[("distance", f.display.clone())]),
                other => Sentence::new(
                    &t.fact,
                    &[("attribute", other.as_str().to_string()), ("value", f.display.clone())],
                ),
            };
            out.push(s);
        }
        let why = reasons(&rec.justification);
        if !why.is_empty() {
            out.push(Sentence::new(&t.justification, &[("reasons", join_list(&why, "and"))]));
        }
        if !rec.justification.unmet.is_empty() {
            let names: Vec<String> = rec.justification.unmet.iter().map(|a| a.as_str().to_string()).collect();
            out.push(Sentence::new(&t.unmet, &[("attributes", join_list(&names, "and"))]));
        }
        out
    }

    fn no_result_plan(&self, report: &RelaxationReport) -> Vec<Sentence> {
        let t = &self.templates;
        let mut out = vec![Sentence::new(&t.no_result, &[])];
        let satisfied: Vec<String> = report.satisfied.iter().filter_map(satisfied_clause).collect();
        let blocking: Vec<String> =
            report.blocking.iter().map(|a| attribute_label(*a).to_string()).collect();
        if !satisfied.is_empty() && !blocking.is_empty() {
            out.push(Sentence::new(
                &t.no_result_partial,
                &[("satisfied", join_list(&satisfied, "and")), ("blocking", join_list(&blocking, "and"))],
            ));
        }
        for (attribute, values) in &report.suggestion {
            let vs: Vec<String> = values.iter().map(|v| pretty(*attribute, v)).collect();
            if vs.is_empty() {
                continue;
            }
            out.push(Sentence::new(
                &t.no_result_suggest,
                &[("attribute", attribute_label(*attribute).to_string()), ("values", join_list(&vs, "or"))],
            ));
        }
        out
    }

    pub fn plan(&self, action: &AgentAction, turn: u64) -> ResponsePlan {
        let sentences = match action {
            AgentAction::Ask { attribute } => vec![Sentence::new(&self.render_question(*attribute), &[])],
            AgentAction::Recommend(rec) => self.recommendation_plan(rec, turn),
            AgentAction::NoResult(report) => self.no_result_plan(report),
            AgentAction::Canned(kind) => vec![Sentence::new(&self.canned_text(kind, turn), &[])],
        };
        ResponsePlan { kind: action.kind(), sentences }
    }

    /// Plans and realizes the reply for `action` on turn `turn`.
    pub fn render(&self, action: &AgentAction, turn: u64) -> String {
        realize_or_raw(&self.plan(action, turn))
    }
}

fn realize_or_raw(plan: &ResponsePlan) -> String {
    plan.realize().unwrap_or_else(|e| {
        warn!(error = %e, "template realization failed");
        plan.sentences.iter().map(|s| s.template.as_str()).collect::<Vec<_>>().join(" ")
    })
}

/// Optional rewording of a rendered reply.
pub trait Rephraser: Send + Sync {
    fn rephrase(&self, text: &str) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRephraser;

impl Rephraser for IdentityRephraser {
    fn rephrase(&self, text: &str) -> Result<String, BackendError> {
        Ok(text.to_string())
    }
}

/// Recorded paraphrases keyed by the exact template output.
#[derive(Debug, Clone, Default)]
pub struct ReplayRephraser {
    recorded: HashMap<String, String>,
}

impl ReplayRephraser {
    pub fn new(recorded: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayRephraser { recorded: recorded.into_iter().collect() }
    }
}

impl Rephraser for ReplayRephraser {
    fn rephrase(&self, text: &str) -> Result<String, BackendError> {
        self.recorded
            .get(text)
            .cloned()
            .ok_or_else(|| BackendError::Unavailable(format!("no paraphrase recorded for {text:?}")))
    }
}

/// Asks a completion model to reword the reply.
pub struct LlmRephraser<C> {
    client: C,
}

impl<C: CompletionClient> LlmRephraser<C> {
    pub fn new(client: C) -> Self {
        LlmRephraser { client }
    }
}

impl<C: CompletionClient> Rephraser for LlmRephraser<C> {
    fn rephrase(&self, text: &str) -> Result<String, BackendError> {
        let prompt = format!(
            "Reword this reply from a friendly restaurant concierge. Keep every name, address, phone number and fact unchanged.\nReply: {text}\nReworded:"
        );
        let out = self.client.complete(&prompt)?;
        let out = out.trim();
        if out.is_empty() {
            return Err(BackendError::Unavailable("empty paraphrase".into()));
        }
        Ok(out.to_string())
    }
}

/// Rewords with `backend` when present; on failure keeps the original text.
pub fn rephrase(text: &str, backend: Option<&dyn Rephraser>) -> String {
    let Some(backend) = backend else {
        return text.to_string();
    };
    match backend.rephrase(text) {
        Ok(out) => out,
        Err(e) => {
            warn!(error = %e, "rephrasing failed; using template text");
            text.to_string()
        }
    }
}
