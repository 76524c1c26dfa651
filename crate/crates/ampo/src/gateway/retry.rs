use std::time::Duration;

use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel};

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_backoff_ms: 500 }
    }
}

impl RetryPolicy {
    /// Wait after the `attempt`-th failure (0-based): base × 2^attempt.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor))
    }
}

/// Calls `model` until success, a non-retryable error, or `max_attempts`.
/// Returns the outcome and the number of attempts made.
pub fn with_retry<M: LanguageModel + ?Sized>(
    model: &M,
    request: &ChatRequest,
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> (Result<ChatResponse, GatewayError>, u32) {
    let max = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        let result = model.complete(request);
        attempt += 1;
        match result {
            Err(e) if e.is_retryable() && attempt < max => {
                log::warn!("{} request failed ({e}); attempt {attempt} of {max}", request.request_tag);
                sleeper.sleep(policy.backoff(attempt - 1));
            }
            other => return (other, attempt),
        }
    }
}
