//! Chat-completions HTTP backend.
//!
//! Wire format: POST `{base_url}/chat/completions` with the decoding
//! fields mapped one-to-one onto the request body. Transient transport
//! failures and 429/5xx responses surface as retryable errors; the
//! surrounding `ProviderClient` owns the retry loop.

use super::{GenerationRequest, GenerationResponse, ProviderError, TextBackend};
use serde::Deserialize;
use std::time::{Duration, Instant};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "PROVIDER_API_KEY";
/// Environment variable overriding the base URL.
pub const BASE_URL_ENV: &str = "PROVIDER_BASE_URL";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpBackendConfig {
    /// Resolve base URL and API key from the environment, with the config
    /// file's values as fallback.
    pub fn from_env(base_url: Option<String>, model: String) -> Result<Self, ProviderError> {
        let base_url = std::env::var(BASE_URL_ENV)
            .ok()
            .or(base_url)
            .ok_or_else(|| {
                ProviderError::Config(format!("no base URL: set {BASE_URL_ENV} or the config file"))
            })?;
        Ok(Self {
            base_url,
            model,
            api_key: std::env::var(API_KEY_ENV).ok(),
            timeout: Duration::from_secs(120),
        })
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    config: HttpBackendConfig,
    id: String,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Debug, Deserialize, Default)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        let id = format!("http:{}", config.model);
        Ok(Self { client, config, id })
    }

    fn body(&self, request: &GenerationRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(serde_json::json!({"role": "system", "content": request.system_text}));
        }
        messages.push(serde_json::json!({"role": "user", "content": request.user_text}));
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.decoding.temperature,
            "top_p": request.decoding.top_p,
            "frequency_penalty": request.decoding.frequency_penalty,
            "presence_penalty": request.decoding.presence_penalty,
            "max_tokens": request.decoding.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = serde_json::json!(seed);
        }
        body
    }
}

impl TextBackend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let started = Instant::now();
        let mut builder = self.client.post(&url).json(&self.body(request));
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;

        let status = response.status();
        if status.as_u16() == 429 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(ProviderError::Throttled {
                retry_after,
                message: "HTTP 429".into(),
            });
        }
        if status.is_server_error() {
            return Err(ProviderError::Transport {
                attempts: 1,
                message: format!("HTTP {status}"),
            });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(ProviderError::Protocol(format!("HTTP {status}: {body}")));
        }

        let parsed: ChatResponse = response
            .json()
            .map_err(|e| ProviderError::Protocol(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Protocol("response has no choices".into()))?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(GenerationResponse::capped(
            choice.message.content,
            usage.prompt_tokens,
            usage.completion_tokens,
            started.elapsed().as_millis() as u64,
            self.id.clone(),
            request.decoding.max_tokens,
        ))
    }

    fn provider_id(&self) -> &str {
        &self.id
    }
}
