//! Engine construction from command-line options.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, ValueEnum};
use concierge_core::commonsense::{CommonsenseError, StyleTable};
use concierge_core::dialog::MergePolicy;
use concierge_core::kb::{fixture_kb, load_kb, KbError, Knowledgebase};
use concierge_core::nlg::{LlmRephraser, NlgError, Renderer, Templates};
use concierge_core::parse::{BackendError, CompletionClient, Lexicon, LlmParser, ReplayClient, RuleParser, SemanticParser};
use concierge_core::session::{Engine, EngineConfig};
use thiserror::Error;

use crate::llm_client::{HttpCompletionClient, LlmSettings, API_KEY_VAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParserKind {
    Rule,
    Llm,
}

#[derive(Debug, Clone, Args)]
pub struct EngineOptions {
    /// Knowledgebase file (JSON array or .csv). Defaults to the bundled fixture.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ParserKind::Rule)]
    pub parser: ParserKind,
    /// Style rules (JSON). Defaults to the built-in table.
    #[arg(long)]
    pub style: Option<PathBuf>,
    /// Reply templates (JSON). Missing keys keep their defaults.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Seed for template variant rotation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// A later answer for an attribute replaces the earlier one instead of
    /// widening it.
    #[arg(long)]
    pub replace_on_change: bool,
    /// Recorded completions (utterance -> completion JSON) to use instead of
    /// a live model.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, env = "CONCIERGE_LLM_URL", default_value = "https://api.openai.com/v1")]
    pub llm_url: String,
    #[arg(long, env = "CONCIERGE_LLM_MODEL", default_value = "gpt-3.5-turbo-instruct")]
    pub llm_model: String,
    #[arg(long, default_value_t = 30)]
    pub llm_timeout_secs: u64,
    /// Reword replies with the completion model.
    #[arg(long)]
    pub rephrase: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            kb: None,
            parser: ParserKind::Rule,
            style: None,
            templates: None,
            seed: 0,
            replace_on_change: false,
            replay: None,
            llm_url: "https://api.openai.com/v1".into(),
            llm_model: "gpt-3.5-turbo-instruct".into(),
            llm_timeout_secs: 30,
            rephrase: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("knowledgebase {path}: {source}")]
    Kb { path: PathBuf, source: KbError },
    #[error("style rules {path}: {source}")]
    Style { path: PathBuf, source: CommonsenseError },
    #[error("templates {path}: {source}")]
    Templates { path: PathBuf, source: NlgError },
    #[error("recorded completions {path}: {source}")]
    Replay { path: PathBuf, source: std::io::Error },
    #[error("the llm backend needs an API key in {API_KEY_VAR} (or --replay)")]
    MissingApiKey,
}

/// Completion backend chosen at startup.
pub enum Backend {
    Replay(ReplayClient),
    Http(HttpCompletionClient),
}

impl CompletionClient for Backend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        match self {
            Backend::Replay(c) => c.complete(prompt),
            Backend::Http(c) => c.complete(prompt),
        }
    }
}

impl EngineOptions {
    pub fn knowledgebase(&self) -> Result<Knowledgebase, ConfigError> {
        match &self.kb {
            Some(path) => load_kb(path).map_err(|source| ConfigError::Kb { path: path.clone(), source }),
            None => Ok(fixture_kb()),
        }
    }

    pub fn style_table(&self) -> Result<StyleTable, ConfigError> {
        match &self.style {
            Some(path) => StyleTable::load(path).map_err(|source| ConfigError::Style { path: path.clone(), source }),
            None => Ok(StyleTable::default()),
        }
    }

    fn templates(&self) -> Result<Templates, ConfigError> {
        match &self.templates {
            Some(path) => Templates::load(path).map_err(|source| ConfigError::Templates { path: path.clone(), source }),
            None => Ok(Templates::default()),
        }
    }

    /// The completion backend: recorded replies when `--replay` is given,
    /// otherwise the live endpoint.
    fn completion_client(&self) -> Result<Backend, ConfigError> {
        if let Some(path) = &self.replay {
            let client = ReplayClient::load(path).map_err(|source| ConfigError::Replay { path: path.clone(), source })?;
            return Ok(Backend::Replay(client));
        }
        let api_key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(ConfigError::MissingApiKey)?;
        Ok(Backend::Http(HttpCompletionClient::new(LlmSettings {
            base_url: self.llm_url.clone(),
            model: self.llm_model.clone(),
            api_key,
            max_tokens: 128,
            timeout: Duration::from_secs(self.llm_timeout_secs),
        })))
    }

    pub fn parser(&self, kb: &Knowledgebase, style: &StyleTable) -> Result<Box<dyn SemanticParser>, ConfigError> {
        Ok(match self.parser {
            ParserKind::Rule => Box::new(RuleParser::new(Lexicon::from_kb(kb, style))),
            ParserKind::Llm => Box::new(LlmParser::new(self.completion_client()?)),
        })
    }

    pub fn build_engine(&self) -> Result<Engine, ConfigError> {
        let kb = self.knowledgebase()?;
        let style = self.style_table()?;
        let parser = self.parser(&kb, &style)?;
        let renderer = Renderer::new(self.templates()?, self.seed);
        let merge_policy = if self.replace_on_change { MergePolicy::Replace } else { MergePolicy::Union };
        let mut engine = Engine::new(kb, style, parser)
            .with_renderer(renderer)
            .with_config(EngineConfig { merge_policy, ..EngineConfig::default() });
        if self.rephrase {
            engine = engine.with_rephraser(Box::new(LlmRephraser::new(self.completion_client()?)));
        }
        Ok(engine)
    }
}
