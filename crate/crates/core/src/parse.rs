//! Parsers for agent completions: `<START>…<END>` spans and importance scores.

use alloc::string::String;
use alloc::vec::Vec;

pub const START_TAG: &str = "<START>";
pub const END_TAG: &str = "<END>";

/// Every `<START>…<END>` span in order, verbatim. Text outside spans is
/// ignored, as is an unterminated trailing `<START>`. Empty spans are dropped.
pub fn tagged_spans(completion: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut rest = completion;
    while let Some(open) = rest.find(START_TAG) {
        let after = &rest[open + START_TAG.len()..];
        let Some(close) = after.find(END_TAG) else {
            break;
        };
        let span = &after[..close];
        if !span.is_empty() {
            spans.push(String::from(span));
        }
        rest = &after[close + END_TAG.len()..];
    }
    spans
}

/// The first number following a case-insensitive `importance` token and a
/// `:` or `=` separator. Returns `None` when no occurrence parses.
pub fn importance_score(span: &str) -> Option<f64> {
    const TOKEN: &str = "importance";
    let lower = span.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(TOKEN) {
        let start = from + pos + TOKEN.len();
        if let Some(value) = number_after_separator(&span[start..]) {
            return Some(value);
        }
        from = start;
    }
    None
}

fn number_after_separator(s: &str) -> Option<f64> {
    let s = s.trim_start();
    let s = s.strip_prefix(':').or_else(|| s.strip_prefix('='))?;
    let s = s.trim_start();
    let bytes = s.as_bytes();
    let mut end = 0;
    if matches!(bytes.first(), Some(b'+' | b'-')) {
        end = 1;
    }
    let int_start = end;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    let mut digits = end - int_start;
    if end < bytes.len() && bytes[end] == b'.' {
        let frac_start = end + 1;
        let mut frac_end = frac_start;
        while frac_end < bytes.len() && bytes[frac_end].is_ascii_digit() {
            frac_end += 1;
        }
        if frac_end > frac_start {
            digits += frac_end - frac_start;
            end = frac_end;
        }
    }
    if digits == 0 {
        return None;
    }
    s[..end].parse::<f64>().ok().filter(|v| v.is_finite())
}
