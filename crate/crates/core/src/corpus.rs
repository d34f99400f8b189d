//! Note ingestion, provenance exclusion and segmentation into evidence units.
//!
//! A note is first split into coarse units at blank lines, then into
//! sentence-like spans at `.`/`!`/`?` (when followed by whitespace or the end
//! of the unit) and at every newline. Spans are kept when they are long enough
//! or look like a lab/medication fragment (a digit next to a word).

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admission_id: Option<String>,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub chart_time: i64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceUnit {
    pub unit_id: String,
    pub note_id: String,
    pub subject_id: String,
    pub span_index: usize,
    pub text: String,
    pub char_len: usize,
    pub time: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionList {
    pub excluded_note_ids: BTreeSet<String>,
}

impl ExclusionList {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            excluded_note_ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    /// One id per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn contains(&self, note_id: &str) -> bool {
        self.excluded_note_ids.contains(note_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub min_span_chars: usize,
    pub max_span_chars: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_span_chars: 15,
            max_span_chars: 400,
        }
    }
}

/// Wire form of a note record; every field optional so that missing fields
/// are reported with their line number instead of a generic serde error.
#[derive(Deserialize)]
struct RawNote {
    note_id: Option<String>,
    subject_id: Option<String>,
    #[serde(alias = "hadm_id")]
    admission_id: Option<String>,
    category: Option<String>,
    chart_time: Option<serde_json::Value>,
    text: Option<String>,
}

/// Result of reading a note stream: accepted notes plus per-record rejections.
#[derive(Debug, Default)]
pub struct Ingested {
    pub notes: Vec<Note>,
    pub rejected: Vec<Error>,
}

impl Ingested {
    /// Fail on the first rejected record.
    pub fn into_strict(mut self) -> Result<Vec<Note>> {
        if self.rejected.is_empty() {
            Ok(self.notes)
        } else {
            Err(self.rejected.swap_remove(0))
        }
    }
}

/// Read line-delimited JSON note records.
///
/// Malformed records are collected in [`Ingested::rejected`] with their
/// 1-based line number; a repeated `note_id` aborts ingestion.
pub fn ingest_notes<R: BufRead>(source: R) -> Result<Ingested> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_note(&line, line_no) {
            Ok(note) => {
                if !seen.insert(note.note_id.clone()) {
                    return Err(Error::DuplicateNoteId(note.note_id));
                }
                out.notes.push(note);
            }
            Err(e) => out.rejected.push(e),
        }
    }
    sort_notes(&mut out.notes);
    Ok(out)
}

pub fn sort_notes(notes: &mut [Note]) {
    notes.sort_by(|a, b| {
        (&a.subject_id, a.chart_time, &a.note_id).cmp(&(&b.subject_id, b.chart_time, &b.note_id))
    });
}

fn parse_note(line: &str, line_no: usize) -> Result<Note> {
    let malformed = |message: String| Error::MalformedRecord {
        line: line_no,
        message,
    };
    let raw: RawNote = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let note_id = raw
        .note_id
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| malformed("missing note_id".into()))?;
    let subject_id = raw
        .subject_id
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| malformed(format!("note `{note_id}`: missing subject_id")))?;
    let text = raw
        .text
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| malformed(format!("note `{note_id}`: missing or empty text")))?;
    let chart_time = match raw.chart_time {
        None | Some(serde_json::Value::Null) => 0,
        Some(serde_json::Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| malformed(format!("note `{note_id}`: chart_time is not an integer")))?,
        Some(serde_json::Value::String(s)) if s.trim().is_empty() => 0,
        Some(serde_json::Value::String(s)) => s
            .trim()
            .parse()
            .map_err(|_| malformed(format!("note `{note_id}`: unparseable chart_time `{s}`")))?,
        Some(other) => return Err(malformed(format!("note `{note_id}`: bad chart_time {other}"))),
    };
    Ok(Note {
        note_id,
        subject_id,
        admission_id: raw.admission_id,
        category: raw.category.unwrap_or_default(),
        chart_time,
        text,
    })
}

/// Drop excluded notes, preserving order.
pub fn exclude_provenance(notes: Vec<Note>, exclusion: &ExclusionList) -> Vec<Note> {
    notes
        .into_iter()
        .filter(|n| !exclusion.contains(&n.note_id))
        .collect()
}

/// Blank-line separated blocks of the note, trimmed, internal newlines kept.
pub fn coarse_units(text: &str) -> Vec<&str> {
    let mut units = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_content_end = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let is_blank = line.trim().is_empty();
        if is_blank {
            if let Some(s) = start.take() {
                units.push(text[s..last_content_end].trim());
            }
        } else {
            if start.is_none() {
                start = Some(offset);
            }
            last_content_end = offset + line.len();
        }
        offset += line.len();
    }
    if let Some(s) = start {
        units.push(text[s..last_content_end].trim());
    }
    units
}

/// Split a block into sentence-like spans (raw, untrimmed slices).
pub fn sentence_spans(block: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = block.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '\n' => {
                if i > start {
                    spans.push(&block[start..i]);
                }
                start = i + 1;
            }
            '.' | '!' | '?' => {
                let boundary = chars.peek().is_none_or(|&(_, n)| n.is_whitespace());
                if boundary {
                    let end = i + c.len_utf8();
                    spans.push(&block[start..end]);
                    start = end;
                }
            }
            _ => {}
        }
    }
    if start < block.len() {
        spans.push(&block[start..]);
    }
    spans
}

/// Digit present together with a word that contains letters and no digits,
/// e.g. `cr 1.2` or `metoprolol 25 mg`.
pub fn is_information_dense(text: &str) -> bool {
    let has_digit = text.chars().any(|c| c.is_ascii_digit());
    let has_word = text.split_whitespace().any(|tok| {
        tok.chars().any(char::is_alphabetic) && !tok.chars().any(|c| c.is_ascii_digit())
    });
    has_digit && has_word
}

fn keep_span(text: &str, config: &SegmentConfig) -> bool {
    !text.is_empty()
        && (text.chars().count() >= config.min_span_chars || is_information_dense(text))
}

fn chunk_chars(text: &str, size: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    chars.chunks(size).map(|c| c.iter().collect()).collect()
}

/// Segment one note into normalized evidence units.
pub fn segment_note(note: &Note, config: &SegmentConfig) -> Vec<EvidenceUnit> {
    let max = config.max_span_chars.max(1);
    let mut units = Vec::new();
    for block in coarse_units(&note.text) {
        for span in sentence_spans(block) {
            let normalized = normalize_text(span);
            let pieces = if normalized.chars().count() > max {
                chunk_chars(&normalized, max)
                    .into_iter()
                    .map(|c| normalize_text(&c))
                    .collect()
            } else {
                vec![normalized]
            };
            for text in pieces.into_iter().filter(|t| keep_span(t, config)) {
                let span_index = units.len();
                units.push(EvidenceUnit {
                    unit_id: format!("{}#{span_index}", note.note_id),
                    note_id: note.note_id.clone(),
                    subject_id: note.subject_id.clone(),
                    span_index,
                    char_len: text.chars().count(),
                    text,
                    time: note.chart_time,
                });
            }
        }
    }
    if units.is_empty() {
        log::warn!("note {} produced no evidence units", note.note_id);
    }
    units
}

/// Segment every note and return units ordered by (subject, time, note, span).
pub fn segment_corpus(notes: &[Note], config: &SegmentConfig) -> Vec<EvidenceUnit> {
    #[cfg(feature = "parallel")]
    let mut units: Vec<EvidenceUnit> = {
        use rayon::prelude::*;
        notes
            .par_iter()
            .flat_map_iter(|n| segment_note(n, config))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut units: Vec<EvidenceUnit> = notes.iter().flat_map(|n| segment_note(n, config)).collect();
    units.sort_by(|a, b| {
        (&a.subject_id, a.time, &a.note_id, a.span_index)
            .cmp(&(&b.subject_id, b.time, &b.note_id, b.span_index))
    });
    units
}
