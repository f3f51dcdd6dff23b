//! Text normalization.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

const URL_TOKEN: &str = "<URL>";
const MENTION_TOKEN: &str = "<USER>";

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S+").expect("static regex"))
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").expect("static regex"))
}

/// Normalizes raw social-media text. Total, deterministic, and idempotent.
///
/// Rule table, applied in order:
///
/// 1. Unicode normalization to NFC.
/// 2. URLs — a run of non-whitespace starting with `http://`, `https://`
///    (case-insensitive), or `www.` — become the placeholder `<URL>`.
/// 3. @-mentions — `@` followed by one or more word characters — become the
///    placeholder `<USER>`.
/// 4. Every run of whitespace collapses to a single space and the ends are
///    trimmed.
///
/// No lowercasing: downstream encoders may be case-sensitive.
pub fn normalize_text(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let no_urls = url_re().replace_all(&nfc, URL_TOKEN);
    let no_mentions = mention_re().replace_all(&no_urls, MENTION_TOKEN);
    no_mentions.split_whitespace().collect::<Vec<_>>().join(" ")
}
