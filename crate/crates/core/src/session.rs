//! One conversational turn, end to end.
//!
//! [`Engine`] holds everything shared between conversations (knowledgebase,
//! style rules, parser, templates) and is read-only after construction.
//! [`Session`] holds one conversation's mutable state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commonsense::{expand_preferences, CommonsenseError, StyleTable};
use crate::dialog::{next_action, AgentAction, CannedKind, DialogState, MergePolicy, Requirement, DEFAULT_KEY_INFO};
use crate::kb::{Attribute, Knowledgebase, Vocabulary};
use crate::nlg::{rephrase, Renderer, Rephraser};
use crate::parse::{
    normalize_parse, parse_utterance, parser_vocabulary, Lexicon, NormalizedInput, ParseContext,
    ParseError, ParseResult, RuleParser, SemanticParser, Special,
};
use crate::recommend::{another_option, describe, view_history, NavigationError};
use crate::terms::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Agent,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub state: DialogState,
    pub ctx: ParseContext,
    pub transcript: Vec<TranscriptEntry>,
    /// Completed user turns.
    pub turns: u64,
}

impl Session {
    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::of(&self.state)
    }
}

/// The externally visible part of a dialog state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub requirements: Vec<Requirement>,
    /// `require(...)` / `not_require(...)` lines, one per requirement.
    pub listing: String,
    pub output_list: Vec<u32>,
    pub history: Vec<u32>,
}

impl StateSnapshot {
    pub fn of(state: &DialogState) -> Self {
        StateSnapshot {
            requirements: state.requirements.clone(),
            listing: state.listing(),
            output_list: state.output_list.clone(),
            history: state.history.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnOutcome {
    pub reply: String,
    pub action: AgentAction,
    pub parse: ParseResult,
    pub normalized: NormalizedInput,
    pub state: StateSnapshot,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TurnError {
    #[error(transparent)]
    Rejected(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub key_info: Vec<Attribute>,
    pub merge_policy: MergePolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { key_info: DEFAULT_KEY_INFO.to_vec(), merge_policy: MergePolicy::Union }
    }
}

pub struct Engine {
    kb: Knowledgebase,
    style: StyleTable,
    vocab: Vocabulary,
    parser: Box<dyn SemanticParser>,
    renderer: Renderer,
    rephraser: Option<Box<dyn Rephraser>>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(kb: Knowledgebase, style: StyleTable, parser: Box<dyn SemanticParser>) -> Self {
        let vocab = parser_vocabulary(&kb.vocabulary());
        Engine {
            kb,
            style,
            vocab,
            parser,
            renderer: Renderer::default(),
            rephraser: None,
            config: EngineConfig::default(),
        }
    }

    /// An engine with the rule parser built from the knowledgebase.
    pub fn rule_based(kb: Knowledgebase, style: StyleTable) -> Self {
        let parser = RuleParser::new(Lexicon::from_kb(&kb, &style));
        Engine::new(kb, style, Box::new(parser))
    }

    pub fn with_renderer(mut self, renderer: Renderer) -> Self {
        self.renderer = renderer;
        self
    }

    pub fn with_rephraser(mut self, rephraser: Box<dyn Rephraser>) -> Self {
        self.rephraser = Some(rephraser);
        self
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn kb(&self) -> &Knowledgebase {
        &self.kb
    }

    pub fn parser_name(&self) -> &'static str {
        self.parser.name()
    }

    pub fn new_session(&self) -> Session {
        let mut state = DialogState::with_key_info(self.config.key_info.clone());
        state.merge_policy = self.config.merge_policy;
        let greeting = self.say(&AgentAction::Canned(CannedKind::Greeting), 0);
        Session {
            state,
            ctx: ParseContext::default(),
            transcript: vec![TranscriptEntry { speaker: Speaker::Agent, text: greeting }],
            turns: 0,
        }
    }

    fn say(&self, action: &AgentAction, turn: u64) -> String {
        let text = self.renderer.render(action, turn);
        rephrase(&text, self.rephraser.as_deref())
    }

    /// Runs one user turn. Oversized or empty messages are rejected without
    /// touching the session.
    pub fn turn(&self, session: &mut Session, text: &str) -> Result<TurnOutcome, TurnError> {
        let parse = parse_utterance(self.parser.as_ref(), text, &session.ctx)?;
        let normalized = normalize_parse(&parse, &self.vocab);
        let action = match normalized.label {
            Label::Thank => AgentAction::Canned(CannedKind::Thank),
            Label::Irrelevant => AgentAction::Canned(CannedKind::Irrelevant),
            Label::Content => self.content_turn(&mut session.state, &normalized),
        };

        session.turns += 1;
        let reply = self.say(&action, session.turns);
        for req in &session.state.requirements {
            if let Some(a) = req.attribute() {
                session.ctx.discussed.insert(a);
            }
        }
        session.ctx.last_question = match &action {
            AgentAction::Ask { attribute } => {
                session.ctx.discussed.insert(*attribute);
                Some((*attribute, self.renderer.render_question(*attribute)))
            }
            _ => None,
        };
        session.transcript.push(TranscriptEntry { speaker: Speaker::User, text: text.to_string() });
        session.transcript.push(TranscriptEntry { speaker: Speaker::Agent, text: reply.clone() });
        Ok(TurnOutcome { reply, action, parse, normalized, state: session.snapshot() })
    }

    fn content_turn(&self, state: &mut DialogState, input: &NormalizedInput) -> AgentAction {
        let expanded = match expand_preferences(&input.requirements, &self.style) {
            Ok(reqs) => reqs,
            Err(CommonsenseError::EmptyIntersection { attribute, concepts }) => {
                return AgentAction::Canned(CannedKind::Conflict { attribute, concepts });
            }
            Err(e) => {
                tracing::warn!(error = %e, "preference expansion failed");
                return AgentAction::Canned(CannedKind::Irrelevant);
            }
        };
        let constraints_before = constraints(state);
        state.apply(&expanded);
        for attribute in &input.no_preference {
            state.record_no_preference(*attribute);
        }

        match &input.special {
            Some(Special::AnotherOption) => navigation(another_option(state, &self.kb)),
            Some(Special::ViewHistory(target)) => navigation(view_history(state, &self.kb, target)),
            None => {
                let unchanged = constraints(state) == constraints_before;
                match state.history.last() {
                    // Only new questions about the current suggestion: answer
                    // them instead of searching again.
                    Some(&last) if unchanged => navigation(describe(last, state, &self.kb, true)),
                    _ => next_action(state, &self.kb),
                }
            }
        }
    }
}

/// Requirements other than open questions.
fn constraints(state: &DialogState) -> Vec<Requirement> {
    state.requirements.iter().filter(|r| !r.is_query()).cloned().collect()
}

fn navigation(result: Result<crate::recommend::Recommendation, NavigationError>) -> AgentAction {
    match result {
        Ok(rec) => AgentAction::Recommend(rec),
        Err(NavigationError::Exhausted) => AgentAction::Canned(CannedKind::Exhausted),
        Err(NavigationError::NoPriorRecommendation) => AgentAction::Canned(CannedKind::NoPriorRecommendation),
        Err(NavigationError::EmptyHistory) => AgentAction::Canned(CannedKind::EmptyHistory),
        Err(NavigationError::IndexOutOfRange { requested, .. }) => {
            AgentAction::Canned(CannedKind::HistoryOutOfRange { requested })
        }
        Err(NavigationError::UnknownPlace(id)) => {
            AgentAction::Canned(CannedKind::HistoryOutOfRange { requested: id.to_string() })
        }
    }
}
