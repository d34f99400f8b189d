//! Small shared vocabulary: stopwords, negation markers and antonym pairs.
//!
//! The lexical verifier and the synthetic world generator both use these
//! lists, so a contradiction planted by antonym substitution is one the
//! lexical heuristics can see.

pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "for", "to", "in", "on", "at", "by", "with", "was",
    "were", "is", "are", "be", "been", "had", "has", "have", "patient", "pt", "during", "after",
    "before", "this", "that", "it", "as", "from", "then", "admission",
];

pub const NEGATIONS: &[&str] = &["no", "not", "denies", "denied", "without", "never", "negative", "none"];

/// Antonym pairs; each word maps to the other.
pub const ANTONYMS: &[(&str, &str)] = &[
    ("started", "stopped"),
    ("increased", "decreased"),
    ("improved", "worsened"),
    ("elevated", "low"),
    ("positive", "negative"),
    ("resolved", "persisted"),
    ("intubated", "extubated"),
    ("admitted", "discharged"),
    ("continued", "discontinued"),
    ("stable", "unstable"),
];

pub fn antonym(word: &str) -> Option<&'static str> {
    ANTONYMS.iter().find_map(|&(a, b)| {
        if a == word {
            Some(b)
        } else if b == word {
            Some(a)
        } else {
            None
        }
    })
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

pub fn is_negation(word: &str) -> bool {
    NEGATIONS.contains(&word)
}

/// Lowercase alphanumeric words with surrounding punctuation removed.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '.' || c == '-' || c == '/'))
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}
