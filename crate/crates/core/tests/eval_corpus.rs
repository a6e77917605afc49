use concierge_core::commonsense::StyleTable;
use concierge_core::eval::{load_corpus, parse_corpus, run_corpus};
use concierge_core::kb::fixture_kb;
use concierge_core::parse::{LlmParser, Lexicon, ReplayClient, RuleParser};
use concierge_core::terms::{parse_term_list, Predicate};

const MINI_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mini_corpus.jsonl");

/// Largest one-to-one matching, by trying every assignment of gold items to
/// distinct predictions. Predicates match when names agree and the argument
/// lists are permutations of each other.
fn brute_force_matching(gold: &[Predicate], predicted: &[Predicate]) -> usize {
    fn same(a: &Predicate, b: &Predicate) -> bool {
        if a.name != b.name || a.args.len() != b.args.len() {
            return false;
        }
        let mut rest = b.args.clone();
        a.args.iter().all(|x| match rest.iter().position(|y| y == x) {
            Some(i) => {
                rest.swap_remove(i);
                true
            }
            None => false,
        })
    }
    fn go(gold: &[Predicate], predicted: &[Predicate], used: &mut Vec<bool>) -> usize {
        let Some((g, rest)) = gold.split_first() else { return 0 };
        let mut best = go(rest, predicted, used);
        for (i, p) in predicted.iter().enumerate() {
            if !used[i] && same(g, p) {
                used[i] = true;
                best = best.max(1 + go(rest, predicted, used));
                used[i] = false;
            }
        }
        best
    }
    go(gold, predicted, &mut vec![false; predicted.len()])
}

fn oracle_accuracy(gold: &[Predicate], predicted: &[Predicate]) -> f64 {
    let den = gold.len().max(predicted.len());
    if den == 0 {
        1.0
    } else {
        brute_force_matching(gold, predicted) as f64 / den as f64
    }
}

fn rule_parser() -> RuleParser {
    RuleParser::new(Lexicon::from_kb(&fixture_kb(), &StyleTable::default()))
}

#[test]
fn mini_corpus_agrees_with_brute_force_matching() {
    let corpus = load_corpus(MINI_CORPUS).unwrap();
    assert_eq!(corpus.len(), 20);
    let report = run_corpus(&corpus, &rule_parser()).unwrap();
    let mut total = 0.0;
    for ex in &report.per_example {
        let gold = parse_term_list(&ex.gold).unwrap();
        let predicted = parse_term_list(&ex.predicted).unwrap();
        let oracle = oracle_accuracy(&gold, &predicted);
        assert_eq!(ex.score.accuracy, oracle, "{}: {} vs {}", ex.sentence, ex.gold, ex.predicted);
        total += oracle;
    }
    assert_eq!(report.mean_accuracy, total / 20.0);
}

#[test]
fn mini_corpus_score_is_frozen() {
    let corpus = load_corpus(MINI_CORPUS).unwrap();
    let report = run_corpus(&corpus, &rule_parser()).unwrap();
    assert_eq!(report.parser, "rule");
    // Regression guard for the rule parser on the bundled corpus.
    assert!((report.mean_accuracy - FROZEN_RULE_MEAN).abs() < 1e-12, "mean {}", report.mean_accuracy);
}

/// Five sentences lose only an unknown proper name: 1/3 + 1/4 + 1/5 + 1/4 +
/// 1/4 = 77/60 short of a perfect 20.
const FROZEN_RULE_MEAN: f64 = 1123.0 / 1200.0;

#[test]
fn replayed_completions_score_by_hand() {
    let corpus = parse_corpus(include_str!("fixtures/replay_corpus.jsonl")).unwrap();
    let client = ReplayClient::from_json_str(include_str!("fixtures/replay_corpus_completions.json")).unwrap();
    let report = run_corpus(&corpus, &LlmParser::new(client)).unwrap();
    assert_eq!(report.parser, "llm");
    let per: Vec<f64> = report.per_example.iter().map(|e| e.score.accuracy).collect();
    assert_eq!(per, [1.0, 4.0 / 5.0, 1.0 / 2.0, 1.0, 2.0 / 3.0]);
    // (30 + 24 + 15 + 30 + 20) / 30 / 5
    assert!((report.mean_accuracy - 119.0 / 150.0).abs() < 1e-12, "mean {}", report.mean_accuracy);
}
