use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use ampo_core::llm::{ChatRequest, ChatResponse, GatewayError, Message, RequestTag, Usage};
use serde::{Deserialize, Serialize};

/// One line of the capture log: a request and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureEntry {
    pub timestamp: u64,
    pub request_tag: RequestTag,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub messages: Vec<Message>,
    pub content: Option<String>,
    pub usage: Usage,
    pub latency_ms: u64,
    pub attempts: u32,
    pub error: Option<String>,
}

/// Append-only JSONL capture shared by concurrent callers.
pub struct CaptureLog {
    inner: Mutex<(Box<dyn Write + Send>, Usage, usize)>,
}

impl CaptureLog {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self::to_writer(BufWriter::new(File::create(path)?)))
    }

    pub fn to_writer(writer: impl Write + Send + 'static) -> Self {
        Self { inner: Mutex::new((Box::new(writer), Usage::default(), 0)) }
    }

    pub fn record(
        &self,
        request: &ChatRequest,
        result: &Result<ChatResponse, GatewayError>,
        attempts: u32,
    ) {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let (content, usage, latency_ms, error) = match result {
            Ok(r) => (Some(r.content.clone()), r.usage, r.latency_ms, None),
            Err(e) => (None, Usage::default(), 0, Some(e.to_string())),
        };
        let entry = CaptureEntry {
            timestamp,
            request_tag: request.request_tag,
            model: request.model.clone(),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            messages: request.messages.clone(),
            content,
            usage,
            latency_ms,
            attempts,
            error,
        };
        let line = serde_json::to_string(&entry).expect("capture entry serializes");
        let mut guard = self.inner.lock().expect("capture log poisoned");
        let (writer, total, count) = &mut *guard;
        if let Err(e) = writeln!(writer, "{line}").and_then(|_| writer.flush()) {
            log::error!("capture log write failed: {e}");
        }
        *total += usage;
        *count += 1;
    }

    pub fn total_usage(&self) -> Usage {
        self.inner.lock().expect("capture log poisoned").1
    }

    pub fn entries(&self) -> usize {
        self.inner.lock().expect("capture log poisoned").2
    }

    pub fn read(path: &Path) -> std::io::Result<Vec<CaptureEntry>> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{} line {}: {e}", path.display(), i + 1),
                )
            })?;
            out.push(entry);
        }
        Ok(out)
    }
}
