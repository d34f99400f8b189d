//! Text normalization shared by segmentation, indexing and claim dedup.

use unicode_normalization::UnicodeNormalization;

/// Lowercase, NFKC-fold, collapse whitespace runs to one space and trim.
///
/// The result is a fixed point: `normalize_text(&normalize_text(x)) == normalize_text(x)`.
pub fn normalize_text(raw: &str) -> String {
    let mut current = fold_once(raw);
    // Case folding can expose compatibility characters (and vice versa); a
    // handful of passes always reaches the fixed point in practice.
    for _ in 0..4 {
        let next = fold_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
    current
}

fn fold_once(raw: &str) -> String {
    let folded: String = raw.nfkc().collect::<String>().to_lowercase();
    let folded: String = folded.nfkc().collect();
    collapse_whitespace(&folded)
}

/// Collapse every whitespace run to a single ASCII space and trim both ends.
pub fn collapse_whitespace(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace tokenization of already-normalized text.
pub fn tokens(normalized: &str) -> impl Iterator<Item = &str> {
    normalized.split_whitespace()
}

/// First `max_words` whitespace-separated words of `text`, joined by single spaces.
pub fn truncate_words(text: &str, max_words: usize) -> String {
    text.split_whitespace()
        .take(max_words)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lowercases_and_collapses() {
        assert_eq!(normalize_text("  IV  Antibiotics\n"), "iv antibiotics");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("\t\n "), "");
    }

    #[test]
    fn nfkc_folds_compatibility_forms() {
        // fullwidth letters and the "fi" ligature
        assert_eq!(normalize_text("ＣＲ ﬁne"), "cr fine");
        assert_eq!(normalize_text("a\u{00A0}b"), "a b");
    }

    #[test]
    fn truncates_words() {
        assert_eq!(truncate_words("a b  c d", 2), "a b");
        assert_eq!(truncate_words("a", 5), "a");
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,64}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn normalized_has_no_outer_or_double_spaces(s in "[ a-zA-Z\t\n]{0,40}") {
            let n = normalize_text(&s);
            prop_assert!(!n.starts_with(' ') && !n.ends_with(' '));
            prop_assert!(!n.contains("  "));
        }
    }
}
