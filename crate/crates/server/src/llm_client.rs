//! Blocking client for an OpenAI-style text completion endpoint.

use std::sync::OnceLock;
use std::time::Duration;

use concierge_core::parse::{BackendError, CompletionClient};
use serde::{Deserialize, Serialize};

/// Environment variable holding the API key.
pub const API_KEY_VAR: &str = "CONCIERGE_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct LlmSettings {
    /// Base URL; `/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub max_tokens: u32,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f32,
    stop: [&'a str; 1],
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

/// The underlying HTTP client is built on first use, so this type can be
/// constructed anywhere but must only be called off the async executor.
pub struct HttpCompletionClient {
    settings: LlmSettings,
    http: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl HttpCompletionClient {
    pub fn new(settings: LlmSettings) -> Self {
        HttpCompletionClient { settings, http: OnceLock::new() }
    }

    fn endpoint(&self) -> String {
        format!("{}/completions", self.settings.base_url.trim_end_matches('/'))
    }

    fn http(&self) -> Result<&reqwest::blocking::Client, BackendError> {
        self.http
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.settings.timeout)
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| BackendError::Unavailable(e.clone()))
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let unavailable = |e: reqwest::Error| BackendError::Unavailable(e.to_string());
        let body = CompletionRequest {
            model: &self.settings.model,
            prompt,
            max_tokens: self.settings.max_tokens,
            temperature: 0.0,
            stop: ["\n"],
        };
        let response: CompletionResponse = self
            .http()?
            .post(self.endpoint())
            .bearer_auth(&self.settings.api_key)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?
            .json()
            .map_err(unavailable)?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| BackendError::Unavailable("response has no choices".into()))
    }
}
