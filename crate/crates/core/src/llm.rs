//! Chat-completion wire types and the model abstraction every role talks to.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Which part of the system issued a request. `Target` calls go to the
/// model under optimization; everything else is an optimizer call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestTag {
    Target,
    Analyzer,
    Summarizer,
    Revisor,
    Initializer,
}

impl RequestTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestTag::Target => "target",
            RequestTag::Analyzer => "analyzer",
            RequestTag::Summarizer => "summarizer",
            RequestTag::Revisor => "revisor",
            RequestTag::Initializer => "initializer",
        }
    }
}

impl fmt::Display for RequestTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for RequestTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "target" => Ok(Self::Target),
            "analyzer" => Ok(Self::Analyzer),
            "summarizer" => Ok(Self::Summarizer),
            "revisor" => Ok(Self::Revisor),
            "initializer" => Ok(Self::Initializer),
            other => Err(alloc::format!("unknown request tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub request_tag: RequestTag,
}

impl ChatRequest {
    /// A single-user-message request.
    pub fn user(
        model: impl Into<String>,
        content: impl Into<String>,
        temperature: f64,
        max_tokens: Option<u32>,
        request_tag: RequestTag,
    ) -> Self {
        Self {
            model: model.into(),
            messages: alloc::vec![Message::user(content)],
            temperature,
            max_tokens,
            request_tag,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.messages.last() {
            None => Err(GatewayError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::User => Err(GatewayError::InvalidRequest(
                "last message must have role user".into(),
            )),
            _ if !(0.0..=2.0).contains(&self.temperature) => Err(GatewayError::InvalidRequest(
                alloc::format!("temperature {} outside [0, 2]", self.temperature),
            )),
            _ if self.max_tokens == Some(0) => {
                Err(GatewayError::InvalidRequest("max_tokens must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// All message contents joined by newlines.
    pub fn joined_content(&self) -> String {
        let parts: Vec<&str> = self.messages.iter().map(|m| m.content.as_str()).collect();
        parts.join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl core::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            usage: Usage::default(),
            latency_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no script entry matches the {0} request")]
    Unscripted(RequestTag),
}

impl GatewayError {
    /// Transport failures and rate limits are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport(_) | Self::RateLimited(_))
    }
}

/// A chat-completion backend.
///
/// Implementations must accept concurrent calls through `&self`.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    /// Completes every request; results are returned in request order.
    ///
    /// The default runs sequentially; backends that can fan out override this
    /// and may use up to `parallelism` concurrent calls.
    fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        let _ = parallelism;
        requests.iter().map(|r| self.complete(r)).collect()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }

    fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        (**self).complete_batch(requests, parallelism)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for alloc::boxed::Box<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (**self).complete(request)
    }

    fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        (**self).complete_batch(requests, parallelism)
    }
}

/// Adapts a closure into a model; handy for tests and simulations.
pub struct FnModel<F>(pub F);

impl<F> LanguageModel for FnModel<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        (self.0)(request)
    }
}

/// Counts target and optimizer calls passing through it.
pub struct CallCounter<M> {
    inner: M,
    target: AtomicUsize,
    optimizer: AtomicUsize,
}

impl<M: LanguageModel> CallCounter<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            target: AtomicUsize::new(0),
            optimizer: AtomicUsize::new(0),
        }
    }

    pub fn target_calls(&self) -> u64 {
        self.target.load(Ordering::Relaxed) as u64
    }

    pub fn optimizer_calls(&self) -> u64 {
        self.optimizer.load(Ordering::Relaxed) as u64
    }

    fn count(&self, request: &ChatRequest) {
        let counter = if request.request_tag == RequestTag::Target {
            &self.target
        } else {
            &self.optimizer
        };
        counter.fetch_add(1, Ordering::Relaxed);
    }
}

impl<M: LanguageModel> LanguageModel for CallCounter<M> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.count(request);
        self.inner.complete(request)
    }

    fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        requests.iter().for_each(|r| self.count(r));
        self.inner.complete_batch(requests, parallelism)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let ok = ChatRequest::user("m", "hi", 0.0, None, RequestTag::Target);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.messages.clear();
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.messages.push(Message {
            role: Role::Assistant,
            content: "x".into(),
        });
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.temperature = 2.5;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.max_tokens = Some(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn counter_splits_target_and_optimizer() {
        let model = CallCounter::new(FnModel(|_: &ChatRequest| Ok(ChatResponse::text("x"))));
        let t = ChatRequest::user("m", "q", 0.0, None, RequestTag::Target);
        let a = ChatRequest::user("m", "q", 1.0, None, RequestTag::Analyzer);
        model.complete(&a).unwrap();
        model.complete_batch(&[t.clone(), t], 4);
        assert_eq!(model.target_calls(), 2);
        assert_eq!(model.optimizer_calls(), 1);
    }
}
