use std::sync::Arc;
use std::time::{Duration, Instant};

use concierge::service::ChatService;
use concierge_core::commonsense::StyleTable;
use concierge_core::kb::fixture_kb;
use concierge_core::parse::{BackendError, LlmParser};
use concierge_core::session::{Engine, Speaker};

const SCRIPTS: [&[&str]; 3] = [
    &[
        "Can you recommend me a restaurant?",
        "I can try any food except curry.",
        "Less than fifteen dollars.",
        "No, I'm not looking for a specific rating score.",
        "Sounds nice. Can you give me its address?",
        "Thank you for your help.",
    ],
    &[
        "Do you know where can I find a place to drink?",
        "At low price, please.",
        "I'd prefer those with good reviews.",
        "Sorry I don't drink coffee.",
        "Maybe a bar suits me better.",
        "Sounds nice! Thanks!",
    ],
    &[
        "I'm looking for somewhere serving pizza. I want to have dinner with my family.",
        "Please make it as cheap as possible.",
        "Yes. I want the high rating ones.",
        "How about change the price to average?",
        "Any other recommendations?",
        "That's great! May I have its address?",
        "No, not this one. I mean the address for Palio's Pizza Cafe.",
        "Cool. Thanks.",
    ],
];

/// Every turn takes `delay`; the parse itself always says irrelevant.
fn slow_engine(delay: Duration) -> Engine {
    let client = move |_: &str| -> Result<String, BackendError> {
        std::thread::sleep(delay);
        Ok("irrelevant".into())
    };
    Engine::new(fixture_kb(), StyleTable::default(), Box::new(LlmParser::new(client)))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn posts_to_one_session_apply_in_arrival_order() {
    let service = Arc::new(ChatService::new(slow_engine(Duration::from_millis(30))));
    let id = service.create_session().unwrap().id;
    let mut handles = Vec::new();
    for i in 0..10 {
        let (svc, id) = (Arc::clone(&service), id.clone());
        handles.push(tokio::spawn(async move { svc.post_message(&id, &format!("message {i}")).await.unwrap() }));
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let mut turns = Vec::new();
    for h in handles {
        turns.push(h.await.unwrap().turn);
    }
    assert_eq!(turns, (1..=10).collect::<Vec<u64>>());

    let transcript = service.transcript(&id).await.unwrap();
    let users: Vec<&str> =
        transcript.iter().filter(|e| e.speaker == Speaker::User).map(|e| e.text.as_str()).collect();
    let expected: Vec<String> = (0..10).map(|i| format!("message {i}")).collect();
    assert_eq!(users, expected);
    // An agent reply follows every user message.
    for pair in transcript[1..].chunks(2) {
        assert_eq!((pair[0].speaker, pair[1].speaker), (Speaker::User, Speaker::Agent));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_match_sequential_runs() {
    let engine = Engine::rule_based(fixture_kb(), StyleTable::default());
    let expected: Vec<Vec<(String, String)>> = SCRIPTS
        .iter()
        .map(|script| {
            let mut session = engine.new_session();
            script
                .iter()
                .map(|u| {
                    let out = engine.turn(&mut session, u).unwrap();
                    (out.reply, out.state.listing)
                })
                .collect()
        })
        .collect();

    let service = Arc::new(ChatService::new(Engine::rule_based(fixture_kb(), StyleTable::default())));
    let mut drivers = Vec::new();
    for k in 0..12 {
        let svc = Arc::clone(&service);
        let script = SCRIPTS[k % SCRIPTS.len()];
        drivers.push(tokio::spawn(async move {
            let id = svc.create_session().unwrap().id;
            let mut got = Vec::new();
            for u in script {
                let reply = svc.post_message(&id, u).await.unwrap();
                got.push((reply.reply, reply.state.listing));
                tokio::task::yield_now().await;
            }
            got
        }));
    }
    for (k, d) in drivers.into_iter().enumerate() {
        assert_eq!(d.await.unwrap(), expected[k % SCRIPTS.len()], "driver {k}");
    }
    assert_eq!(service.session_count(), 12);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_do_not_wait_for_each_other() {
    let delay = Duration::from_millis(100);
    let service = Arc::new(ChatService::new(slow_engine(delay)));
    let ids: Vec<String> = (0..8).map(|_| service.create_session().unwrap().id).collect();
    let started = Instant::now();
    let handles: Vec<_> = ids
        .into_iter()
        .map(|id| {
            let svc = Arc::clone(&service);
            tokio::spawn(async move { svc.post_message(&id, "hello").await.unwrap() })
        })
        .collect();
    for h in handles {
        h.await.unwrap();
    }
    // Serial execution would take 8 x 100 ms.
    assert!(started.elapsed() < delay * 4, "took {:?}", started.elapsed());
}
