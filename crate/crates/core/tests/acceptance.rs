//! Release gate: one test per acceptance criterion. `cargo test --test
//! acceptance` prints one `ok` / `FAILED` line for each.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use concierge_core::commonsense::StyleTable;
use concierge_core::dialog::{parse_listing, AgentAction, DialogState, Requirement};
use concierge_core::eval::score_detail;
use concierge_core::kb::{fixture_kb, Attribute};
use concierge_core::recommend::{explain_failure, satisfied_places};
use concierge_core::session::{Engine, TurnOutcome};
use concierge_core::terms::parse_term_list;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

fn as_set(reqs: &[Requirement]) -> BTreeSet<String> {
    reqs.iter().map(|r| r.to_string()).collect()
}

fn recommended(out: &TurnOutcome) -> Option<String> {
    match &out.action {
        AgentAction::Recommend(rec) => Some(rec.name().to_string()),
        _ => None,
    }
}

fn run(engine: &Engine, script: &[&str]) -> Vec<TurnOutcome> {
    let mut session = engine.new_session();
    script.iter().map(|u| engine.turn(&mut session, u).unwrap()).collect()
}

#[test]
fn golden_trace_1() {
    let started = Instant::now();
    let engine = Engine::rule_based(fixture_kb(), StyleTable::default());
    let outs = run(&engine, &CONVERSATION_ONE);
    let elapsed = started.elapsed();

    for (i, (out, expected)) in outs.iter().zip(CONVERSATION_ONE_STATES).enumerate() {
        let expected = parse_listing(expected).unwrap();
        assert_eq!(as_set(&out.state.requirements), as_set(&expected), "state after turn {}", i + 1);
    }
    assert_eq!(recommended(&outs[3]).as_deref(), Some("Southern Recipes Grill"));
    assert_eq!(recommended(&outs[4]).as_deref(), Some("Southern Recipes Grill"));
    assert!(outs[4].reply.contains("621 W Plano Pkwy #229, Plano, TX 75075"), "{}", outs[4].reply);
    assert!(elapsed < Duration::from_secs(1), "script took {elapsed:?}");
}

#[test]
fn golden_trace_2() {
    let engine = Engine::rule_based(fixture_kb(), StyleTable::default());
    let outs = run(&engine, &CONVERSATION_TWO);
    let names: Vec<String> = outs.iter().filter_map(recommended).collect();
    assert_eq!(names, ["Eiland Coffee", "Fukuro", "Northside Drafthouse & Eatery"]);
}

#[test]
fn golden_trace_3() {
    let engine = Engine::rule_based(fixture_kb(), StyleTable::default());
    let outs = run(&engine, &CONVERSATION_THREE);
    let report = outs
        .iter()
        .find_map(|o| match &o.action {
            AgentAction::NoResult(r) => Some(r.clone()),
            _ => None,
        })
        .expect("no no_result turn");
    assert_eq!(report.blocking, [Attribute::PriceRange]);
    let satisfied = as_set(&report.satisfied);
    for line in [
        "require('food type',['italian'])",
        "require('establishment',['restaurant'])",
        "require('family friendly',['yes'])",
    ] {
        assert!(satisfied.contains(line), "{line} missing from {satisfied:?}");
    }
    let names: Vec<String> = outs.iter().filter_map(recommended).collect();
    assert_eq!(names[..2], ["Cappuccino Italian Bistro", "Palio's Pizza Cafe"]);
}

#[test]
fn oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut mismatches = Vec::new();
    for i in 0..1000 {
        let size = rng.random_range(0..=100);
        let kb = random_kb(&mut rng, size);
        let state = random_state(&mut rng, kb.len(), 8);
        let got = satisfied_places(&state, &kb);
        let want = oracle_filter(&kb, &state.requirements, &[]);
        if got != want {
            mismatches.push((i, state.listing()));
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches, first: {:?}", mismatches.len(), mismatches.first());
}

fn subsets<T: Copy>(items: &[T]) -> Vec<Vec<T>> {
    (0..1u32 << items.len())
        .map(|mask| (0..items.len()).filter(|i| mask & (1 << i) != 0).map(|i| items[i]).collect())
        .collect()
}

#[test]
fn relaxation_minimality() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut checked = 0;
    let mut violations = Vec::new();
    while checked < 200 {
        let size = rng.random_range(1..=50);
        let kb = random_kb(&mut rng, size);
        let state = random_state(&mut rng, kb.len(), 7);
        let constrained = constrained_attributes(&state);
        if constrained.len() > 6 || !oracle_filter(&kb, &state.requirements, &[]).is_empty() {
            continue;
        }
        checked += 1;
        let report = explain_failure(&state, &kb);
        let blocking = &report.blocking;
        if oracle_filter(&kb, &state.requirements, blocking).is_empty() {
            violations.push(format!("dropping {blocking:?} is still infeasible:\n{}", state.listing()));
            continue;
        }
        if let Some(smaller) = subsets(&constrained)
            .into_iter()
            .find(|s| s.len() < blocking.len() && !oracle_filter(&kb, &state.requirements, s).is_empty())
        {
            violations.push(format!("{smaller:?} beats {blocking:?}:\n{}", state.listing()));
        }
        for attr in blocking {
            if !constrained.contains(attr) {
                violations.push(format!("{attr:?} was never constrained:\n{}", state.listing()));
            }
        }
    }
    assert!(violations.is_empty(), "{} violations, first: {}", violations.len(), violations[0]);
}

/// A user who answers every question, sometimes with a value and sometimes
/// with a shrug, and may volunteer details up front.
fn cooperative_script_run(engine: &Engine, rng: &mut StdRng) -> (usize, bool) {
    let mut opening = vec!["Can you recommend me".to_string()];
    let mut volunteered = BTreeSet::new();
    if rng.random_bool(0.4) {
        opening.push(PRICES.choose(rng).unwrap().to_string());
        volunteered.insert(Attribute::PriceRange);
    }
    if rng.random_bool(0.4) {
        opening.push(FOODS.choose(rng).unwrap().to_string());
        volunteered.insert(Attribute::FoodType);
    }
    opening.push("restaurant".into());
    if rng.random_bool(0.4) {
        opening.push(format!("with a {} rating", RATINGS.choose(rng).unwrap()));
        volunteered.insert(Attribute::CustomerRating);
    }
    let mut session = engine.new_session();
    let mut out = engine.turn(&mut session, &format!("{}?", opening.join(" "))).unwrap();
    let mut asks = 0;
    for _ in 0..10 {
        let AgentAction::Ask { attribute } = out.action else { break };
        asks += 1;
        assert!(!volunteered.contains(&attribute), "asked again for {attribute:?}");
        let answer = if rng.random_bool(0.3) {
            "Anything is fine.".to_string()
        } else {
            match attribute {
                Attribute::FoodType => format!("I'd like {} food.", FOODS.choose(rng).unwrap()),
                Attribute::PriceRange => format!("Something {}, please.", PRICES.choose(rng).unwrap()),
                Attribute::CustomerRating => format!("A {} rating.", RATINGS.choose(rng).unwrap()),
                other => format!("No preference on {}.", other.as_str()),
            }
        };
        volunteered.insert(attribute);
        out = engine.turn(&mut session, &answer).unwrap();
    }
    let terminal = matches!(out.action, AgentAction::Recommend(_) | AgentAction::NoResult(_));
    (asks, terminal)
}

#[test]
fn economy() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let key_info = DialogState::default().key_info.len();
    for _ in 0..20 {
        let engine = Engine::rule_based(random_kb(&mut rng, 60), StyleTable::default());
        for _ in 0..10 {
            let (asks, terminal) = cooperative_script_run(&engine, &mut rng);
            assert!(terminal, "cooperative user never reached a recommendation");
            assert!(asks <= key_info, "{asks} questions before the first recommendation");
        }
    }
}

#[derive(Deserialize)]
struct MetricPair {
    gold: String,
    predicted: String,
    accuracy: [usize; 2],
    precision: [usize; 2],
    recall: [usize; 2],
}

#[test]
fn metric_fixture() {
    let pairs: Vec<MetricPair> = serde_json::from_str(include_str!("fixtures/metric_pairs.json")).unwrap();
    assert_eq!(pairs.len(), 20);
    let frac = |[n, d]: [usize; 2]| n as f64 / d as f64;
    for p in &pairs {
        let gold = parse_term_list(&p.gold).unwrap();
        let predicted = parse_term_list(&p.predicted).unwrap();
        let s = score_detail(&gold, &predicted);
        let ctx = format!("{} vs {}", p.gold, p.predicted);
        assert_eq!(s.accuracy, frac(p.accuracy), "accuracy: {ctx}");
        assert_eq!(s.precision, frac(p.precision), "precision: {ctx}");
        assert_eq!(s.recall, frac(p.recall), "recall: {ctx}");
    }
}

#[test]
fn performance() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);
    let engine = Engine::rule_based(random_kb(&mut rng, 1000), StyleTable::default());
    let scripts: [&[&str]; 3] = [&CONVERSATION_ONE, &CONVERSATION_TWO, &CONVERSATION_THREE];
    let mut samples = Vec::new();
    for _ in 0..5 {
        for script in scripts {
            let mut session = engine.new_session();
            for u in script {
                let t = Instant::now();
                engine.turn(&mut session, u).unwrap();
                samples.push(t.elapsed());
            }
        }
    }
    samples.sort();
    let median = samples[samples.len() / 2];
    assert!(median < Duration::from_millis(50), "median turn {median:?}");
}
