//! The `events.log` format: one JSON event per line.

use std::path::Path;

use ampo_core::Event;
use sha2::{Digest, Sha256};

use crate::error::{config, Result};

pub fn to_line(event: &Event) -> String {
    serde_json::to_string(event).expect("events serialize")
}

pub fn parse(text: &str, source: &str) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event =
            serde_json::from_str(line).map_err(|e| config(format!("{source} line {}: {e}", i + 1)))?;
        out.push(event);
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// SHA-256 of the log with every timestamp zeroed.
pub fn fingerprint(events: &[Event]) -> String {
    let mut hasher = Sha256::new();
    for event in events {
        let stripped = Event { timestamp: 0, ..event.clone() };
        hasher.update(to_line(&stripped).as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}
