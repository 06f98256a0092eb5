use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScenarioKind, ScoringMode};
use crate::corpus::WorkRecord;
use crate::retry::{self, AttemptError, RateLimiter, RetryPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("unexpected provider response: {0}")]
    Decode(String),
}

/// One completion call. `work`, `scenario`, `mode` and `attempt` describe
/// what is being asked; network providers send only the prompt and sampling
/// settings, test doubles may use the rest.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_tokens: u32,
    pub work: &'a WorkRecord,
    pub scenario: ScenarioKind,
    pub mode: ScoringMode,
    /// 0 for the first attempt, incremented on each parse retry.
    pub attempt: u32,
}

/// A single-turn text completion service.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;

    /// Short label recorded in run metadata.
    fn name(&self) -> String;

    /// Calls made so far.
    fn calls(&self) -> u64;
}

fn default_api_key_env() -> String {
    "CLIMSCAN_API_KEY".into()
}

fn default_model() -> String {
    "gpt-4o".into()
}

/// Settings for a chat-completions style HTTP endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpProviderConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

/// OpenAI-compatible chat-completions client.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    policy: RetryPolicy,
    limiter: Option<RateLimiter>,
    calls: AtomicU64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: &HttpProviderConfig, policy: RetryPolicy) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            ProviderError::Config(format!("environment variable {} is not set", config.api_key_env))
        })?;
        Self::with_key(config, api_key, policy)
    }

    pub fn with_key(
        config: &HttpProviderConfig,
        api_key: String,
        policy: RetryPolicy,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key,
            limiter: RateLimiter::from_policy(&policy),
            policy,
            calls: AtomicU64::new(0),
        })
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let outcome = retry::with_retries(&self.policy, self.limiter.as_ref(), || {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let response = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .map_err(|e| AttemptError::Retryable {
                    error: ProviderError::Transport {
                        status: None,
                        message: e.to_string(),
                    },
                    retry_after: None,
                })?;
            let status = response.status().as_u16();
            if status == 200 {
                return response.json::<ChatResponse>().map_err(|e| {
                    AttemptError::Fatal(ProviderError::Decode(e.to_string()))
                });
            }
            let retry_after = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let message: String = response.text().unwrap_or_default().chars().take(200).collect();
            let error = ProviderError::Transport {
                status: Some(status),
                message,
            };
            if retry::is_retryable_status(status) {
                Err(AttemptError::Retryable { error, retry_after })
            } else {
                Err(AttemptError::Fatal(error))
            }
        });
        let reply = outcome.map_err(|(e, _)| e)?.value;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Decode("response has no message content".into()))
    }

    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
