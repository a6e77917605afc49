//! Constraint search over the knowledgebase, navigation through results, and
//! explanations for both success (justification) and failure (relaxation).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{DialogState, Field, Polarity, Requirement};
use crate::kb::{attribute_of, Attribute, Knowledgebase, Place};
use crate::terms::{fold_text, Value};

/// Attributes every recommendation shows regardless of what was asked.
pub const DEFAULT_DISPLAY: [Attribute; 4] = [
    Attribute::Name,
    Attribute::FoodType,
    Attribute::PriceRange,
    Attribute::CustomerRating,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub attribute: Attribute,
    /// Normalized value, equal to `attribute_of(place, attribute)`.
    pub value: Value,
    /// Original spelling from the knowledgebase.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub attribute: Attribute,
    pub required: Vec<Value>,
    pub matched: Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Justification {
    pub matched: Vec<Match>,
    /// Exclusions the place respects.
    pub avoided: Vec<(Attribute, Vec<Value>)>,
    /// Constraints the place does not meet; only possible when revisiting an
    /// older recommendation after the requirements changed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmet: Vec<Attribute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub place_id: u32,
    pub facts: Vec<Fact>,
    /// Attributes the user explicitly asked for.
    pub queried: Vec<Attribute>,
    pub justification: Justification,
    /// True when re-describing a place that was already recommended.
    #[serde(default)]
    pub revisit: bool,
}

impl Recommendation {
    pub fn fact(&self, attribute: Attribute) -> Option<&Fact> {
        self.facts.iter().find(|f| f.attribute == attribute)
    }

    pub fn name(&self) -> &str {
        self.fact(Attribute::Name).map(|f| f.display.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelaxationReport {
    /// Constraints that some place still honors once `blocking` is dropped,
    /// narrowed to the values those places actually have.
    pub satisfied: Vec<Requirement>,
    /// A minimum-size set of attributes whose constraints must go.
    pub blocking: Vec<Attribute>,
    /// Values the witnesses have for each blocking attribute.
    pub suggestion: Vec<(Attribute, Vec<Value>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecommendOutcome {
    Found(Recommendation),
    NoResult(RelaxationReport),
    /// Places match, but every one of them has been shown already.
    AllShown,
}

/// Which past recommendation the user refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryRef {
    First,
    Last,
    /// 1-based.
    Index(usize),
    Name(String),
}

impl HistoryRef {
    pub fn parse(raw: &str) -> HistoryRef {
        let text = fold_text(raw);
        let ordinal = match text.as_str() {
            "first" | "1st" => return HistoryRef::First,
            "last" | "latest" | "previous" => return HistoryRef::Last,
            "second" | "2nd" => Some(2),
            "third" | "3rd" => Some(3),
            "fourth" | "4th" => Some(4),
            "fifth" | "5th" => Some(5),
            _ => text.parse::<usize>().ok(),
        };
        match ordinal {
            Some(i) => HistoryRef::Index(i),
            None => HistoryRef::Name(text),
        }
    }
}

impl fmt::Display for HistoryRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryRef::First => f.write_str("first"),
            HistoryRef::Last => f.write_str("last"),
            HistoryRef::Index(i) => write!(f, "{i}"),
            HistoryRef::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NavigationError {
    #[error("no more matching places")]
    Exhausted,
    #[error("nothing has been recommended yet")]
    NoPriorRecommendation,
    #[error("no recommendation history")]
    EmptyHistory,
    #[error("history has {len} entries; {requested} is out of range")]
    IndexOutOfRange { requested: String, len: usize },
    #[error("unknown place id {0}")]
    UnknownPlace(u32),
}

fn violates(place: &Place, req: &Requirement) -> bool {
    let Some(attribute) = req.attribute() else {
        return false;
    };
    let value = attribute_of(place, attribute);
    match req.polarity {
        Polarity::Require => req.is_constraint() && !req.values.contains(&value),
        Polarity::NotRequire => req.values.contains(&value),
    }
}

/// True when the place meets every concrete `require` and hits no
/// `not_require`.
pub fn place_matches(place: &Place, requirements: &[Requirement]) -> bool {
    !requirements.iter().any(|r| violates(place, r))
}

/// Ids of matching places, in knowledgebase order.
pub fn satisfied_places(state: &DialogState, kb: &Knowledgebase) -> Vec<u32> {
    kb.places()
        .iter()
        .filter(|p| place_matches(p, &state.requirements))
        .map(Place::id)
        .collect()
}

/// Attributes whose `require` entry is exactly `[query]`, in state order.
pub fn get_query_list(state: &DialogState) -> Vec<Attribute> {
    state.query_list()
}

/// Default display facts followed by the queried attributes.
pub fn fill_query(
    place_id: u32,
    attributes: &[Attribute],
    kb: &Knowledgebase,
) -> Result<Vec<Fact>, NavigationError> {
    let place = kb.get(place_id).ok_or(NavigationError::UnknownPlace(place_id))?;
    let mut facts: Vec<Fact> = Vec::new();
    for &attribute in DEFAULT_DISPLAY.iter().chain(attributes) {
        if facts.iter().any(|f| f.attribute == attribute) {
            continue;
        }
        facts.push(Fact {
            attribute,
            value: attribute_of(place, attribute),
            display: place.display(attribute),
        });
    }
    Ok(facts)
}

/// Evidence that `place` meets the state's constraints.
pub fn justify(place: &Place, state: &DialogState) -> Justification {
    let mut out = Justification::default();
    for req in &state.requirements {
        let Some(attribute) = req.attribute() else {
            continue;
        };
        let value = attribute_of(place, attribute);
        match req.polarity {
            Polarity::Require if req.is_constraint() => {
                if req.values.contains(&value) {
                    out.matched.push(Match {
                        attribute,
                        required: req.values.clone(),
                        matched: value,
                    });
                } else {
                    out.unmet.push(attribute);
                }
            }
            Polarity::Require => {}
            Polarity::NotRequire => {
                if req.values.contains(&value) {
                    out.unmet.push(attribute);
                } else {
                    out.avoided.push((attribute, req.values.clone()));
                }
            }
        }
    }
    out
}

fn queries_with_name(state: &DialogState) -> Vec<Attribute> {
    let mut queries = state.query_list();
    if queries.is_empty() {
        queries.push(Attribute::Name);
    }
    queries
}

/// Builds the recommendation record for a place under the current state.
pub fn describe(
    place_id: u32,
    state: &DialogState,
    kb: &Knowledgebase,
    revisit: bool,
) -> Result<Recommendation, NavigationError> {
    let place = kb.get(place_id).ok_or(NavigationError::UnknownPlace(place_id))?;
    let queried = queries_with_name(state);
    Ok(Recommendation {
        place_id,
        facts: fill_query(place_id, &queried, kb)?,
        queried,
        justification: justify(place, state),
        revisit,
    })
}

/// Runs the search. On success the unseen matches become the output list and
/// the first one moves to the history.
pub fn recommend(state: &mut DialogState, kb: &Knowledgebase) -> RecommendOutcome {
    state.searched = true;
    let matches = satisfied_places(state, kb);
    if matches.is_empty() {
        state.output_list.clear();
        return RecommendOutcome::NoResult(explain_failure(state, kb));
    }
    state.output_list = matches
        .into_iter()
        .filter(|id| !state.history.contains(id))
        .collect();
    match pop_next(state, kb) {
        Ok(rec) => RecommendOutcome::Found(rec),
        Err(_) => RecommendOutcome::AllShown,
    }
}

fn pop_next(state: &mut DialogState, kb: &Knowledgebase) -> Result<Recommendation, NavigationError> {
    if state.output_list.is_empty() {
        return Err(NavigationError::Exhausted);
    }
    let id = state.output_list.remove(0);
    state.history.push(id);
    describe(id, state, kb, false)
}

/// The next pending match.
pub fn another_option(
    state: &mut DialogState,
    kb: &Knowledgebase,
) -> Result<Recommendation, NavigationError> {
    if !state.searched {
        return Err(NavigationError::NoPriorRecommendation);
    }
    pop_next(state, kb)
}

/// Re-describes a past recommendation; output list and history are untouched.
pub fn view_history(
    state: &DialogState,
    kb: &Knowledgebase,
    reference: &HistoryRef,
) -> Result<Recommendation, NavigationError> {
    let history = &state.history;
    if history.is_empty() {
        return Err(NavigationError::EmptyHistory);
    }
    let out_of_range = || NavigationError::IndexOutOfRange {
        requested: reference.to_string(),
        len: history.len(),
    };
    let id = match reference {
        HistoryRef::First => history[0],
        HistoryRef::Last => history[history.len() - 1],
        HistoryRef::Index(i) => {
            if *i == 0 || *i > history.len() {
                return Err(out_of_range());
            }
            history[i - 1]
        }
        HistoryRef::Name(name) => {
            let key = fold_text(name);
            *history
                .iter()
                .find(|id| kb.get(**id).is_some_and(|p| fold_text(&p.name) == key))
                .ok_or_else(out_of_range)?
        }
    };
    describe(id, state, kb, true)
}

/// Finds a smallest set of constrained attributes whose removal lets some
/// place match.
///
/// Every subset is considered in order of size, so the first feasible size is
/// the minimum. Among equally small subsets, the one relaxing attributes asked
/// later in the dialog wins (rating before price before food type), then
/// attributes the user volunteered outside the key list.
pub fn explain_failure(state: &DialogState, kb: &Knowledgebase) -> RelaxationReport {
    let constrained: Vec<Attribute> = Attribute::ALL
        .into_iter()
        .filter(|&a| {
            state
                .requirements
                .iter()
                .any(|r| r.field == Field::Attr(a) && (r.polarity == Polarity::NotRequire || r.is_constraint()))
        })
        .collect();

    // Bit i set = the place breaks the constraint on constrained[i].
    let masks: Vec<u32> = kb
        .places()
        .iter()
        .map(|p| {
            constrained.iter().enumerate().fold(0u32, |m, (i, &a)| {
                let broken = state
                    .requirements
                    .iter()
                    .any(|r| r.attribute() == Some(a) && violates(p, r));
                if broken { m | (1 << i) } else { m }
            })
        })
        .collect();
    let mut distinct = masks.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let rank = |a: Attribute| -> (u8, usize) {
        match state.key_info.iter().position(|k| *k == a) {
            Some(i) => (0, state.key_info.len() - 1 - i),
            None => (1, Attribute::ALL.iter().position(|x| *x == a).unwrap_or(0)),
        }
    };
    let score = |subset: u32| -> Vec<(u8, usize)> {
        let mut r: Vec<_> = constrained
            .iter()
            .enumerate()
            .filter(|(i, _)| subset & (1 << i) != 0)
            .map(|(_, &a)| rank(a))
            .collect();
        r.sort_unstable();
        r
    };

    let n = constrained.len();
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    let mut best: Option<u32> = None;
    for size in 0..=n as u32 {
        for subset in 0..=full {
            if subset.count_ones() != size || !distinct.iter().any(|m| m & !subset == 0) {
                continue;
            }
            best = match best {
                Some(b) if score(b) <= score(subset) => Some(b),
                _ => Some(subset),
            };
        }
        if best.is_some() {
            break;
        }
    }

    let Some(blocking_mask) = best else {
        return RelaxationReport {
            satisfied: Vec::new(),
            blocking: constrained,
            suggestion: Vec::new(),
        };
    };
    let blocking: Vec<Attribute> = constrained
        .iter()
        .enumerate()
        .filter(|(i, _)| blocking_mask & (1 << i) != 0)
        .map(|(_, &a)| a)
        .collect();
    let witnesses: Vec<&Place> = kb
        .places()
        .iter()
        .zip(&masks)
        .filter(|(_, m)| *m & !blocking_mask == 0)
        .map(|(p, _)| p)
        .collect();

    let satisfied = state
        .requirements
        .iter()
        .filter(|r| {
            r.attribute().is_some_and(|a| constrained.contains(&a) && !blocking.contains(&a))
                && (r.polarity == Polarity::NotRequire || r.is_constraint())
        })
        .map(|r| match r.polarity {
            Polarity::NotRequire => r.clone(),
            Polarity::Require => {
                let a = r.attribute().expect("filtered above");
                let seen: Vec<Value> = witnesses.iter().map(|p| attribute_of(p, a)).collect();
                Requirement::new(
                    Polarity::Require,
                    a,
                    r.values.iter().filter(|v| seen.contains(v)).cloned(),
                )
            }
        })
        .collect();
    let suggestion = blocking
        .iter()
        .map(|&a| {
            let mut values: Vec<Value> = Vec::new();
            for p in &witnesses {
                let v = attribute_of(p, a);
                if !values.contains(&v) {
                    values.push(v);
                }
            }
            (a, values)
        })
        .collect();
    RelaxationReport {
        satisfied,
        blocking,
        suggestion,
    }
}
