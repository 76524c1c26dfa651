//! The model gateway: a backend plus retries, capture and batch parallelism.

pub mod capture;
pub mod http;
pub mod retry;
pub mod scripted;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, LanguageModel, Usage};

pub use capture::{CaptureEntry, CaptureLog};
pub use http::HttpBackend;
pub use retry::{with_retry, RetryPolicy, Sleeper, ThreadSleeper};
pub use scripted::{MatchKind, ScriptEntry, ScriptError, ScriptedBackend};

pub struct Gateway {
    backend: Box<dyn LanguageModel>,
    retry: RetryPolicy,
    sleeper: Box<dyn Sleeper>,
    capture: Option<CaptureLog>,
}

impl Gateway {
    pub fn new(backend: impl LanguageModel + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            retry: RetryPolicy::default(),
            sleeper: Box::new(ThreadSleeper),
            capture: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: impl Sleeper + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn with_capture(mut self, capture: CaptureLog) -> Self {
        self.capture = Some(capture);
        self
    }

    pub fn capture(&self) -> Option<&CaptureLog> {
        self.capture.as_ref()
    }

    /// Tokens used so far, as recorded by the capture log.
    pub fn usage(&self) -> Usage {
        self.capture.as_ref().map(CaptureLog::total_usage).unwrap_or_default()
    }
}

impl LanguageModel for Gateway {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let (result, attempts) = match request.validate() {
            Ok(()) => with_retry(&*self.backend, request, &self.retry, &*self.sleeper),
            Err(e) => (Err(e), 0),
        };
        if let Some(capture) = &self.capture {
            capture.record(request, &result, attempts);
        }
        result
    }

    /// Runs up to `parallelism` requests at a time; results keep input order.
    fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        let workers = parallelism.min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<ChatResponse, GatewayError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(request) = requests.get(i) else { break };
                    let result = self.complete(request);
                    *slots[i].lock().expect("batch slot poisoned") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("batch slot poisoned").expect("every slot is filled"))
            .collect()
    }
}
