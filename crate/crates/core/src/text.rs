//! Label normalization and the branch-count structure metric.

use alloc::string::String;

/// Trim, case-fold, and strip surrounding punctuation.
///
/// Idempotent; an empty or all-punctuation input yields an empty string.
pub fn normalize_label(raw: &str) -> String {
    let strip = |c: char| c.is_whitespace() || c.is_ascii_punctuation();
    let folded = raw.trim_matches(strip).to_lowercase();
    let trimmed = folded.trim_matches(strip);
    if trimmed.len() == folded.len() {
        folded
    } else {
        String::from(trimmed)
    }
}

const MARKERS: [&str; 4] = ["if-else", "if", "otherwise", "in case"];

/// Counts conditional markers ("if", "if-else", "otherwise", "in case") that
/// open a sentence or a list item, case-insensitively.
///
/// A clause opens at the start of the text, after a newline, or after one of
/// `. ! ? ; : …` followed by whitespace. Bullets (`-`, `*`, `+`, `•`), enumerators
/// (`3.`, `3.1`, `2)`, `b)`) and bold markers are skipped before matching.
pub fn branch_count(prompt_text: &str) -> usize {
    let mut count = 0;
    let mut at_start = true;
    let mut after_terminator = false;
    for (idx, ch) in prompt_text.char_indices() {
        if at_start && !ch.is_whitespace() {
            at_start = false;
            if opens_with_marker(&prompt_text[idx..]) {
                count += 1;
            }
        }
        if ch == '\n' || (after_terminator && ch.is_whitespace()) {
            at_start = true;
        }
        after_terminator = matches!(ch, '.' | '!' | '?' | ';' | ':' | '…');
    }
    count
}

fn opens_with_marker(clause: &str) -> bool {
    let rest = skip_list_marker(clause);
    MARKERS.iter().any(|marker| {
        rest.len() >= marker.len()
            && rest.is_char_boundary(marker.len())
            && rest[..marker.len()].eq_ignore_ascii_case(marker)
            && rest[marker.len()..]
                .chars()
                .next()
                .is_none_or(|c| !c.is_alphanumeric() && c != '-' && c != '_')
    })
}

fn skip_list_marker(mut s: &str) -> &str {
    loop {
        let before = s.len();
        s = s.trim_start();
        s = s.trim_start_matches(['-', '*', '+', '•']);
        // enumerators: 3. / 3.1 / 2) / b)
        let digits = s.chars().take_while(|c| c.is_ascii_digit() || *c == '.').count();
        if digits > 0 && s.starts_with(|c: char| c.is_ascii_digit()) {
            let tail = &s[digits..];
            let tail = tail.strip_prefix(')').unwrap_or(tail);
            if tail.starts_with(char::is_whitespace) || tail.is_empty() {
                s = tail;
            }
        } else {
            let mut chars = s.chars();
            if let (Some(a), Some(b), Some(c)) = (chars.next(), chars.next(), chars.next()) {
                if a.is_ascii_alphabetic() && b == ')' && c.is_whitespace() {
                    s = &s[2..];
                }
            }
        }
        if s.len() == before {
            return s;
        }
    }
}
