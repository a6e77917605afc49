//! Commonsense style table: concepts people ask for ("curry", "pizza",
//! "something to drink") mapped onto attribute value sets, and the expansion
//! of `prefer` / `not_prefer` requirements into ordinary constraints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{Field, Polarity, Requirement};
use crate::kb::{Attribute, Vocabulary};
use crate::terms::{fold_text, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleRule {
    pub concept: String,
    pub attribute: Attribute,
    pub values: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CommonsenseError {
    #[error("cannot read style table: {0}")]
    Io(#[from] std::io::Error),
    #[error("style table is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("style table: {0}")]
    Invalid(String),
    #[error("no {attribute} satisfies all of {concepts:?} at once")]
    EmptyIntersection {
        attribute: Attribute,
        concepts: Vec<String>,
    },
}

/// Immutable concept table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleTable {
    rules: Vec<StyleRule>,
}

pub const DEFAULT_STYLE_JSON: &str = include_str!("../data/style.json");

impl Default for StyleTable {
    fn default() -> Self {
        StyleTable::from_json_str(DEFAULT_STYLE_JSON).expect("bundled style table is valid")
    }
}

impl StyleTable {
    pub fn new(rules: Vec<StyleRule>) -> Result<Self, CommonsenseError> {
        let mut out: Vec<StyleRule> = Vec::with_capacity(rules.len());
        for mut rule in rules {
            rule.concept = fold_text(&rule.concept);
            rule.values = rule.values.iter().map(|v| fold_text(v)).collect();
            rule.values.dedup();
            if rule.concept.is_empty() {
                return Err(CommonsenseError::Invalid("empty concept".into()));
            }
            if rule.values.is_empty() {
                return Err(CommonsenseError::Invalid(format!(
                    "concept `{}` has no values",
                    rule.concept
                )));
            }
            if !matches!(rule.attribute, Attribute::FoodType | Attribute::Establishment) {
                return Err(CommonsenseError::Invalid(format!(
                    "concept `{}` targets {}, expected food type or establishment",
                    rule.concept, rule.attribute
                )));
            }
            if out.iter().any(|r| r.concept == rule.concept) {
                return Err(CommonsenseError::Invalid(format!(
                    "duplicate concept `{}`",
                    rule.concept
                )));
            }
            out.push(rule);
        }
        Ok(StyleTable { rules: out })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CommonsenseError> {
        StyleTable::new(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CommonsenseError> {
        StyleTable::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn rules(&self) -> &[StyleRule] {
        &self.rules
    }

    /// Finds the rule for a concept, tolerating simple plurals ("noodles").
    pub fn lookup(&self, concept: &str) -> Option<&StyleRule> {
        let key = fold_text(concept);
        let find = |k: &str| self.rules.iter().find(|r| r.concept == k);
        find(&key)
            .or_else(|| key.strip_suffix("es").and_then(find))
            .or_else(|| key.strip_suffix('s').and_then(find))
    }

    /// Rule values that the knowledgebase never uses; handy as a load-time
    /// warning.
    pub fn unknown_values(&self, vocab: &Vocabulary) -> Vec<(String, String)> {
        self.rules
            .iter()
            .flat_map(|r| {
                r.values
                    .iter()
                    .filter(|v| !vocab.contains(r.attribute, v))
                    .map(|v| (r.concept.clone(), v.clone()))
            })
            .collect()
    }
}

/// `(target attribute, value set)` for a concept, if the table knows it.
pub fn style_lookup<'t>(table: &'t StyleTable, concept: &str) -> Option<(Attribute, &'t [String])> {
    table.lookup(concept).map(|r| (r.attribute, r.values.as_slice()))
}

/// Replaces every `prefer` / `not_prefer` requirement with attribute
/// constraints.
///
/// Preferred concepts form a conjunction: their value sets are intersected
/// per target attribute. Disliked concepts are unioned into `not_require`.
/// Concepts without a rule are dropped. Other requirements pass through in
/// order; generated `require`s follow them, then generated `not_require`s.
pub fn expand_preferences(
    state_in: &[Requirement],
    table: &StyleTable,
) -> Result<Vec<Requirement>, CommonsenseError> {
    let mut out = Vec::new();
    let mut liked: Vec<(Attribute, Vec<String>, Vec<String>)> = Vec::new();
    let mut disliked: Vec<(Attribute, Vec<String>)> = Vec::new();

    for req in state_in {
        let field = req.field;
        if !matches!(field, Field::Prefer | Field::NotPrefer) {
            out.push(req.clone());
            continue;
        }
        for concept in req.values.iter().filter_map(Value::as_concrete) {
            let Some(rule) = table.lookup(concept) else {
                continue;
            };
            if field == Field::Prefer {
                match liked.iter_mut().find(|(a, _, _)| *a == rule.attribute) {
                    Some((_, values, concepts)) => {
                        values.retain(|v| rule.values.contains(v));
                        concepts.push(rule.concept.clone());
                    }
                    None => liked.push((
                        rule.attribute,
                        rule.values.clone(),
                        vec![rule.concept.clone()],
                    )),
                }
            } else {
                match disliked.iter_mut().find(|(a, _)| *a == rule.attribute) {
                    Some((_, values)) => {
                        for v in &rule.values {
                            if !values.contains(v) {
                                values.push(v.clone());
                            }
                        }
                    }
                    None => disliked.push((rule.attribute, rule.values.clone())),
                }
            }
        }
    }

    for (attribute, values, concepts) in liked {
        if values.is_empty() {
            return Err(CommonsenseError::EmptyIntersection { attribute, concepts });
        }
        out.push(Requirement::new(
            Polarity::Require,
            attribute,
            values.into_iter().map(Value::Concrete),
        ));
    }
    for (attribute, values) in disliked {
        out.push(Requirement::new(
            Polarity::NotRequire,
            attribute,
            values.into_iter().map(Value::Concrete),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn prefer(concepts: &[&str]) -> Requirement {
        Requirement::raw(Polarity::Require, Field::Prefer, concepts)
    }

    fn not_prefer(concepts: &[&str]) -> Requirement {
        Requirement::raw(Polarity::Require, Field::NotPrefer, concepts)
    }

    fn set(values: &[&str]) -> BTreeSet<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lookups() {
        let t = StyleTable::default();
        let (a, v) = style_lookup(&t, "curry").unwrap();
        assert_eq!(a, Attribute::FoodType);
        assert_eq!(v, ["indian", "thai"]);
        let (_, v) = style_lookup(&t, "Pizza").unwrap();
        assert_eq!(v, ["italian", "american"]);
        let (_, v) = style_lookup(&t, "noodles").unwrap();
        assert_eq!(v, ["chinese", "thai", "japanese"]);
        assert!(style_lookup(&t, "sandwich").is_none());
    }

    /// Independent set oracle: intersect every rule's values for concepts
    /// that have a rule.
    fn intersect_oracle(t: &StyleTable, concepts: &[&str]) -> BTreeSet<String> {
        let sets: Vec<BTreeSet<String>> = concepts
            .iter()
            .filter_map(|c| t.rules().iter().find(|r| r.concept == *c))
            .map(|r| r.values.iter().cloned().collect())
            .collect();
        let mut iter = sets.into_iter();
        let first = iter.next().unwrap_or_default();
        iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    }

    #[test]
    fn spicy_noodles_intersect_to_thai() {
        let t = StyleTable::default();
        assert_eq!(intersect_oracle(&t, &["spicy", "noodle"]), set(&["thai"]));
        let out = expand_preferences(&[prefer(&["spicy", "noodle"])], &t).unwrap();
        assert_eq!(
            out,
            vec![Requirement::raw(Polarity::Require, Field::Attr(Attribute::FoodType), &["thai"])]
        );
    }

    #[test]
    fn dislike_curry() {
        let t = StyleTable::default();
        let out = expand_preferences(&[not_prefer(&["curry"])], &t).unwrap();
        assert_eq!(
            out,
            vec![Requirement::raw(
                Polarity::NotRequire,
                Field::Attr(Attribute::FoodType),
                &["indian", "thai"]
            )]
        );
    }

    #[test]
    fn unmapped_concepts_vanish() {
        let t = StyleTable::default();
        assert!(expand_preferences(&[prefer(&["unmapped_thing"])], &t)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn passthrough_and_order() {
        let t = StyleTable::default();
        let price = Requirement::raw(
            Polarity::Require,
            Field::Attr(Attribute::PriceRange),
            &["cheap"],
        );
        let out = expand_preferences(
            &[not_prefer(&["spicy"]), price.clone(), prefer(&["pizza"])],
            &t,
        )
        .unwrap();
        assert_eq!(out[0], price);
        assert_eq!(out[1].polarity, Polarity::Require);
        assert_eq!(out[2].polarity, Polarity::NotRequire);
    }

    #[test]
    fn mixed_targets_stay_separate() {
        let t = StyleTable::default();
        let out = expand_preferences(&[prefer(&["pizza", "beer"])], &t).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].field, Field::Attr(Attribute::FoodType));
        assert_eq!(out[1].field, Field::Attr(Attribute::Establishment));
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let t = StyleTable::default();
        match expand_preferences(&[prefer(&["pizza", "noodle"])], &t) {
            Err(CommonsenseError::EmptyIntersection { attribute, concepts }) => {
                assert_eq!(attribute, Attribute::FoodType);
                assert_eq!(concepts, vec!["pizza", "noodle"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_validation() {
        assert!(StyleTable::from_json_str(
            r#"[{"concept":"a","attribute":"food type","values":[]}]"#
        )
        .is_err());
        assert!(StyleTable::from_json_str(
            r#"[{"concept":"a","attribute":"food type","values":["x"]},
                {"concept":"A","attribute":"food type","values":["y"]}]"#
        )
        .is_err());
        assert!(StyleTable::from_json_str(
            r#"[{"concept":"a","attribute":"price range","values":["cheap"]}]"#
        )
        .is_err());
    }

    #[test]
    fn bundled_table_fits_fixture_vocabulary_where_it_matters() {
        let mut vocab = crate::kb::fixture_kb().vocabulary();
        vocab.extend(Attribute::FoodType, crate::parse::EXTRA_FOOD_TYPES.iter().map(|s| s.to_string()));
        vocab.extend(Attribute::Establishment, crate::parse::EXTRA_ESTABLISHMENTS.iter().map(|s| s.to_string()));
        assert!(StyleTable::default().unknown_values(&vocab).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn canon(reqs: &[Requirement]) -> BTreeSet<(String, String, BTreeSet<String>)> {
            reqs.iter()
                .map(|r| {
                    (
                        r.polarity.as_str().to_string(),
                        r.field.to_string(),
                        r.values.iter().map(|v| v.text().to_string()).collect(),
                    )
                })
                .collect()
        }

        fn concepts() -> impl Strategy<Value = Vec<&'static str>> {
            let pool = vec![
                "curry", "spicy", "pizza", "noodle", "drink", "alcohol", "beer", "coffee", "tofu",
            ];
            prop::sample::subsequence(pool, 0..5)
        }

        proptest! {
            #[test]
            fn no_preference_fields_survive(likes in concepts(), dislikes in concepts()) {
                let t = StyleTable::default();
                if let Ok(out) = expand_preferences(&[prefer(&likes), not_prefer(&dislikes)], &t) {
                    prop_assert!(out.iter().all(|r| matches!(r.field, Field::Attr(_))));
                }
            }

            #[test]
            fn single_concept_is_its_rule(c in prop::sample::select(vec!["curry", "spicy", "pizza", "noodle", "drink", "beer"])) {
                let t = StyleTable::default();
                let rule = t.lookup(c).unwrap();
                let out = expand_preferences(&[prefer(&[c])], &t).unwrap();
                prop_assert_eq!(out.len(), 1);
                let got: Vec<&str> = out[0].values.iter().map(Value::text).collect();
                prop_assert_eq!(got, rule.values.iter().map(String::as_str).collect::<Vec<_>>());
            }

            #[test]
            fn permutation_invariant(likes in concepts(), dislikes in concepts(), seed in any::<u64>()) {
                let t = StyleTable::default();
                let a = expand_preferences(&[prefer(&likes), not_prefer(&dislikes)], &t);
                let mut likes2 = likes.clone();
                let mut dislikes2 = dislikes.clone();
                let n = likes2.len().max(1);
                likes2.rotate_left((seed as usize) % n);
                likes2.reverse();
                dislikes2.reverse();
                let b = expand_preferences(&[not_prefer(&dislikes2), prefer(&likes2)], &t);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert_eq!(canon(&a), canon(&b)),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                }
            }

            #[test]
            fn intersection_matches_oracle(likes in concepts()) {
                let t = StyleTable::default();
                let food: Vec<&str> = likes
                    .iter()
                    .copied()
                    .filter(|c| t.lookup(c).is_some_and(|r| r.attribute == Attribute::FoodType))
                    .collect();
                let expected = intersect_oracle(&t, &food);
                match expand_preferences(&[prefer(&likes)], &t) {
                    Ok(out) => {
                        let got: BTreeSet<String> = out
                            .iter()
                            .filter(|r| r.field == Field::Attr(Attribute::FoodType))
                            .flat_map(|r| r.values.iter().map(|v| v.text().to_string()))
                            .collect();
                        prop_assert_eq!(got, expected);
                    }
                    Err(CommonsenseError::EmptyIntersection { attribute, .. }) => {
                        let involved: Vec<&str> = likes
                            .iter()
                            .copied()
                            .filter(|c| t.lookup(c).is_some_and(|r| r.attribute == attribute))
                            .collect();
                        prop_assert!(!involved.is_empty());
                        prop_assert!(intersect_oracle(&t, &involved).is_empty());
                    }
                    Err(e) => prop_assert!(false, "{}", e),
                }
            }
        }
    }
}
