//! Candidate cleaning, sentence-level claim segmentation and claim filters.
//!
//! Segmentation splits at every `.`, `!` or `?` that is followed by
//! whitespace or the end of text, and at every newline. There is no
//! abbreviation list: `"Dr. Smith saw pt."` yields two claims, `"Dr."` and
//! `"Smith saw pt."`. Decimals such as `1.2` are never split.

use std::collections::HashSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{collapse_whitespace, normalize_text};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub claim_id: String,
    pub text: String,
    /// Byte range into the cleaned candidate text.
    pub source_char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClaimFilterConfig {
    pub min_tokens: usize,
    pub min_chars: usize,
    pub min_alnum_frac: f64,
    pub template_patterns: Vec<String>,
    pub meta_patterns: Vec<String>,
}

impl Default for ClaimFilterConfig {
    fn default() -> Self {
        Self {
            min_tokens: 3,
            min_chars: 15,
            min_alnum_frac: 0.4,
            template_patterns: vec![
                r"^n/?a\.?$".into(),
                r"^none\.?$".into(),
                r"^(tbd|todo|unknown)\.?$".into(),
                r"^\[.*\]$".into(),
                r"^<.*>$".into(),
            ],
            meta_patterns: vec![
                r"^\s*summary:".into(),
                r"as an ai".into(),
                r"^\s*note:".into(),
                r"^\s*#".into(),
            ],
        }
    }
}

impl ClaimFilterConfig {
    pub fn compile(&self) -> Result<ClaimFilters> {
        if !(0.0..=1.0).contains(&self.min_alnum_frac) {
            return Err(Error::InvalidParameter(format!(
                "min_alnum_frac must lie in [0, 1], got {}",
                self.min_alnum_frac
            )));
        }
        let compile = |patterns: &[String]| -> Result<Vec<Regex>> {
            patterns
                .iter()
                .map(|p| {
                    Regex::new(&format!("(?i){p}"))
                        .map_err(|e| Error::InvalidParameter(format!("pattern `{p}`: {e}")))
                })
                .collect()
        };
        Ok(ClaimFilters {
            templates: compile(&self.template_patterns)?,
            meta: compile(&self.meta_patterns)?,
            config: self.clone(),
        })
    }
}

/// Compiled form of [`ClaimFilterConfig`].
#[derive(Debug, Clone)]
pub struct ClaimFilters {
    pub config: ClaimFilterConfig,
    templates: Vec<Regex>,
    meta: Vec<Regex>,
}

impl ClaimFilters {
    pub fn is_meta_line(&self, line: &str) -> bool {
        self.meta.iter().any(|re| re.is_match(line))
    }
}

impl Default for ClaimFilters {
    fn default() -> Self {
        ClaimFilterConfig::default()
            .compile()
            .expect("default patterns compile")
    }
}

fn strip_markup(line: &str) -> &str {
    let mut s = line.trim_start();
    s = s.trim_start_matches('#').trim_start();
    let bytes = s.as_bytes();
    if let Some(&first) = bytes.first() {
        if matches!(first, b'-' | b'*' | b'+') && bytes.get(1).is_some_and(|b| b.is_ascii_whitespace()) {
            return s[1..].trim_start();
        }
    }
    if let Some(rest) = s.strip_prefix('\u{2022}') {
        return rest.trim_start();
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && digits < 4 {
        let rest = &s[digits..];
        if let Some(after) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if after.starts_with(char::is_whitespace) {
                return after.trim_start();
            }
        }
    }
    s
}

/// Remove meta lines, strip bullets and header marks, normalize whitespace.
///
/// Lines are whitespace-collapsed and joined with `\n`; blank lines vanish.
pub fn clean_candidate(raw: &str, filters: &ClaimFilters) -> String {
    raw.lines()
        .filter(|line| !filters.is_meta_line(line))
        .map(|line| collapse_whitespace(&strip_markup(line).replace("**", "").replace("__", "")))
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Number of lines matching any meta pattern.
pub fn count_meta_hits(text: &str, filters: &ClaimFilters) -> usize {
    text.lines().filter(|l| filters.is_meta_line(l)).count()
}

/// Split cleaned text into claims; ids are `c0`, `c1`, ... in text order.
pub fn segment_claims(cleaned: &str) -> Vec<Claim> {
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut chars = cleaned.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '\n' => {
                ranges.push((start, i));
                start = i + 1;
            }
            '.' | '!' | '?'
                if chars.peek().is_none_or(|&(_, n)| n.is_whitespace()) => {
                    ranges.push((start, i + 1));
                    start = i + 1;
                }
            _ => {}
        }
    }
    ranges.push((start, cleaned.len()));

    ranges
        .into_iter()
        .filter_map(|(s, e)| {
            let slice = &cleaned[s..e];
            let lead = slice.len() - slice.trim_start().len();
            let trail = slice.len() - slice.trim_end().len();
            (s + lead < e - trail).then_some((s + lead, e - trail))
        })
        .enumerate()
        .map(|(i, (s, e))| Claim {
            claim_id: format!("c{i}"),
            text: normalize_text(&cleaned[s..e]),
            source_char_span: (s, e),
        })
        .collect()
}

pub fn alnum_fraction(text: &str) -> f64 {
    let visible = text.chars().filter(|c| !c.is_whitespace()).count();
    if visible == 0 {
        return 0.0;
    }
    text.chars().filter(|c| c.is_alphanumeric()).count() as f64 / visible as f64
}

pub fn is_valid_claim(claim: &Claim, filters: &ClaimFilters) -> bool {
    let cfg = &filters.config;
    let text = claim.text.as_str();
    text.split_whitespace().count() >= cfg.min_tokens
        && text.chars().count() >= cfg.min_chars
        && alnum_fraction(text) >= cfg.min_alnum_frac
        && !filters.templates.iter().any(|re| re.is_match(text))
}

/// Keep the first claim of each normalized text.
pub fn dedup_claims(claims: Vec<Claim>) -> Vec<Claim> {
    let mut seen = HashSet::new();
    claims
        .into_iter()
        .filter(|c| seen.insert(normalize_text(&c.text)))
        .collect()
}

pub fn dup_fraction(claims: &[Claim]) -> f64 {
    if claims.is_empty() {
        return 0.0;
    }
    let distinct: HashSet<String> = claims.iter().map(|c| normalize_text(&c.text)).collect();
    (claims.len() - distinct.len()) as f64 / claims.len() as f64
}

/// Line record for exported claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub candidate_id: String,
    pub claim_id: String,
    pub text: String,
}
