//! OpenAI-compatible chat-completions client.

use std::time::{Duration, Instant};

use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel, Message, Usage};
use serde::Serialize;
use serde_json::Value;

pub const API_BASE_VAR: &str = "AMPO_API_BASE";
pub const API_KEY_VAR: &str = "AMPO_API_KEY";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

/// The JSON body sent for `request`.
pub fn wire_body(request: &ChatRequest) -> String {
    serde_json::to_string(&WireRequest {
        model: &request.model,
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    })
    .expect("request serializes")
}

/// Reads `choices[0].message.content` and the token usage (zero if absent).
pub fn parse_body(body: &str) -> Result<(String, Usage), GatewayError> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let count = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    let usage = Usage {
        prompt_tokens: count("prompt_tokens"),
        completion_tokens: count("completion_tokens"),
    };
    Ok((content.to_owned(), usage))
}

/// `{base}/v1/chat/completions`, or just `/chat/completions` when the base
/// already ends in `/v1`.
pub fn endpoint(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(base: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            url: endpoint(base),
            api_key,
        }
    }

    /// Reads the base URL and key from the environment.
    pub fn from_env(timeout: Duration) -> Self {
        let base = std::env::var(API_BASE_VAR).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned());
        let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Self::new(&base, key, timeout)
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl LanguageModel for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let mut call = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send(wire_body(request))
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            429 => return Err(GatewayError::RateLimited(body)),
            500..=599 => return Err(GatewayError::Transport(format!("status {status}: {body}"))),
            _ => return Err(GatewayError::Rejected { status, body }),
        }
        let (content, usage) = parse_body(&body)?;
        Ok(ChatResponse {
            content,
            usage,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
