//! Shared fixtures for the integration tests: scripted conversations, a
//! synthetic knowledgebase generator and an independent place filter.

#![allow(dead_code)]

use concierge_core::dialog::{DialogState, Polarity, Requirement};
use concierge_core::kb::{Attribute, Knowledgebase, Place};
use concierge_core::terms::Value;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const CONVERSATION_ONE: [&str; 6] = [
    "Can you recommend me a restaurant?",
    "I can try any food except curry.",
    "Less than fifteen dollars.",
    "No, I'm not looking for a specific rating score.",
    "Sounds nice. Can you give me its address?",
    "Thank you for your help.",
];

/// Expected state after each turn of [`CONVERSATION_ONE`]. The closing thanks
/// leaves the fifth state untouched.
pub const CONVERSATION_ONE_STATES: [&str; 6] = [
    "require('name',['query']),
require('establishment',['restaurant'])",
    "require('name',['query']),
require('establishment',['restaurant']),
not_require('food type',['Indian','Thai'])",
    "require('name',['query']),
require('establishment',['restaurant']),
not_require('food type',['Indian','Thai']),
require('price range',['cheap'])",
    "require('name',['query']),
require('establishment',['restaurant']),
not_require('food type',['Indian','Thai']),
require('price range',['cheap']),
require('customer rating',['low','average','high'])",
    "require('name',['query']),
require('establishment',['restaurant']),
not_require('food type', ['Indian','Thai']),
require('price range',['cheap']),
require('customer rating',['low','average','high']),
require('address',['query'])",
    "require('name',['query']),
require('establishment',['restaurant']),
not_require('food type', ['Indian','Thai']),
require('price range',['cheap']),
require('customer rating',['low','average','high']),
require('address',['query'])",
];

pub const CONVERSATION_TWO: [&str; 6] = [
    "Do you know where can I find a place to drink?",
    "At low price, please.",
    "I'd prefer those with good reviews.",
    "Sorry I don't drink coffee.",
    "Maybe a bar suits me better.",
    "Sounds nice! Thanks!",
];

pub const CONVERSATION_THREE: [&str; 8] = [
    "I'm looking for somewhere serving pizza. I want to have dinner with my family.",
    "Please make it as cheap as possible.",
    "Yes. I want the high rating ones.",
    "How about change the price to average?",
    "Any other recommendations?",
    "That's great! May I have its address?",
    "No, not this one. I mean the address for Palio's Pizza Cafe.",
    "Cool. Thanks.",
];

pub const REPLAY_COMPLETIONS: &str = include_str!("../fixtures/replay_completions.json");

pub const FOODS: [&str; 8] = ["american", "italian", "indian", "thai", "chinese", "japanese", "mexican", "coffee"];
pub const ESTABLISHMENTS: [&str; 4] = ["restaurant", "bar", "coffee shop", "pub"];
pub const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
pub const RATINGS: [&str; 3] = ["low", "average", "high"];
pub const FAMILY: [&str; 2] = ["yes", "no"];

pub fn random_place(rng: &mut StdRng, i: usize) -> Place {
    let pick = |rng: &mut StdRng, xs: &[&str]| xs.choose(rng).unwrap().to_string();
    let place = serde_json::json!({
        "name": format!("Place {i}"),
        "food type": pick(rng, &FOODS),
        "establishment": pick(rng, &ESTABLISHMENTS),
        "price range": pick(rng, &PRICES),
        "customer rating": pick(rng, &RATINGS),
        "address": format!("{} Main St", 100 + i),
        "phone number": format!("555-{:04}", i),
        "family friendly": pick(rng, &FAMILY),
        "distance": rng.random_range(1..100) as f64 / 10.0,
    });
    serde_json::from_value(place).unwrap()
}

pub fn random_kb(rng: &mut StdRng, size: usize) -> Knowledgebase {
    Knowledgebase::from_places((0..size).map(|i| random_place(rng, i)).collect()).unwrap()
}

/// Categorical attributes with the value pool used by the generator.
pub fn pools() -> Vec<(Attribute, Vec<&'static str>)> {
    vec![
        (Attribute::FoodType, FOODS.to_vec()),
        (Attribute::Establishment, ESTABLISHMENTS.to_vec()),
        (Attribute::PriceRange, PRICES.to_vec()),
        (Attribute::CustomerRating, RATINGS.to_vec()),
        (Attribute::FamilyFriendly, FAMILY.to_vec()),
    ]
}

/// A random requirement over a categorical attribute or the name.
pub fn random_requirement(rng: &mut StdRng, kb_size: usize) -> Requirement {
    let polarity = if rng.random_bool(0.3) { Polarity::NotRequire } else { Polarity::Require };
    if rng.random_bool(0.1) {
        let names: Vec<Value> = (0..rng.random_range(1..4))
            .map(|_| Value::concrete(format!("place {}", rng.random_range(0..kb_size.max(1) + 3))))
            .collect();
        return Requirement::new(polarity, Attribute::Name, names);
    }
    let all = pools();
    let (attr, pool) = all.choose(rng).unwrap();
    if polarity == Polarity::Require && rng.random_bool(0.1) {
        let marker = if rng.random_bool(0.5) { Value::Query } else { Value::Any };
        return Requirement::require(*attr, [marker]);
    }
    let k = rng.random_range(1..=pool.len().min(3));
    let values: Vec<Value> = pool.choose_multiple(rng, k).map(|v| Value::concrete(*v)).collect();
    Requirement::new(polarity, *attr, values)
}

pub fn random_state(rng: &mut StdRng, kb_size: usize, max_reqs: usize) -> DialogState {
    let mut state = DialogState::default();
    let n = rng.random_range(0..=max_reqs);
    let reqs: Vec<Requirement> = (0..n).map(|_| random_requirement(rng, kb_size)).collect();
    state.apply(&reqs);
    state
}

/// The place's raw field for `attribute`, lower-cased. Written against the
/// struct fields directly rather than through the library accessors.
pub fn field(place: &Place, attribute: Attribute) -> String {
    let raw = match attribute {
        Attribute::Name => place.name.clone(),
        Attribute::FoodType => place.food_type.clone(),
        Attribute::Establishment => place.establishment.clone(),
        Attribute::PriceRange => format!("{:?}", place.price_range),
        Attribute::CustomerRating => format!("{:?}", place.customer_rating),
        Attribute::FamilyFriendly => format!("{:?}", place.family_friendly),
        Attribute::Address => place.address.clone(),
        Attribute::PhoneNumber => place.phone.clone(),
        Attribute::Distance => place.distance.to_string(),
    };
    raw.to_lowercase()
}

/// Brute-force filter: a `require` with only concrete values is a
/// disjunction; a `not_require` excludes each listed value; `query` and
/// `any` never filter. `skip` lists attributes to ignore entirely.
pub fn oracle_matches(place: &Place, reqs: &[Requirement], skip: &[Attribute]) -> bool {
    for r in reqs {
        let Some(attr) = r.attribute() else { continue };
        if skip.contains(&attr) {
            continue;
        }
        let v = field(place, attr);
        let texts: Vec<String> = r
            .values
            .iter()
            .filter_map(|x| match x {
                Value::Concrete(t) => Some(t.to_lowercase()),
                _ => None,
            })
            .collect();
        let open = texts.len() != r.values.len();
        match r.polarity {
            Polarity::Require if !open => {
                if !texts.contains(&v) {
                    return false;
                }
            }
            Polarity::Require => {}
            Polarity::NotRequire => {
                if texts.contains(&v) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn oracle_filter(kb: &Knowledgebase, reqs: &[Requirement], skip: &[Attribute]) -> Vec<u32> {
    kb.places()
        .iter()
        .filter(|p| oracle_matches(p, reqs, skip))
        .map(|p| p.id())
        .collect()
}

/// Attributes carrying a filtering requirement.
pub fn constrained_attributes(state: &DialogState) -> Vec<Attribute> {
    let mut out: Vec<Attribute> = Vec::new();
    for r in &state.requirements {
        let Some(a) = r.attribute() else { continue };
        let filters = r.polarity == Polarity::NotRequire || r.values.iter().all(Value::is_concrete);
        if filters && !out.contains(&a) {
            out.push(a);
        }
    }
    out
}
