//! JSONL datasets: one `{"id", "input", "gold"}` object per line.

use std::path::Path;

use ampo_core::Example;
use serde::Deserialize;

use crate::error::{config, Result};

#[derive(Deserialize)]
struct Record {
    id: String,
    input: String,
    gold: String,
}

pub fn parse_jsonl(text: &str, source: &str) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Record =
            serde_json::from_str(line).map_err(|e| config(format!("{source} line {}: {e}", i + 1)))?;
        out.push(Example::new(r.id, r.input, r.gold));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<Example>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read dataset {}: {e}", path.display())))?;
    parse_jsonl(&text, &path.display().to_string())
}
