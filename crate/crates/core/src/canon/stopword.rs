use std::collections::HashSet;

use super::wordlists::{Category, WordLists};
use crate::text::tokenize;

/// Categories stripped by default: determiners, pronouns, discourse markers,
/// hedges and generic subjects.
pub const DEFAULT_STRIP: [Category; 5] = [
    Category::Determiners,
    Category::Pronouns,
    Category::Discourse,
    Category::Hedges,
    Category::Subjects,
];

/// Rule-based canonicalization: lowercase, drop punctuation, remove tokens of
/// the stripped categories, keep everything else in order. Falls back to the
/// lowercased input when nothing would remain.
pub fn canon_stopword(wordlists: &WordLists, strip: &[Category], text: &str) -> String {
    let strip: HashSet<Category> = strip.iter().copied().collect();
    let kept: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| {
            wordlists
                .category_of(t)
                .map_or(true, |c| !strip.contains(&c))
        })
        .collect();
    if kept.is_empty() {
        text.trim().to_lowercase()
    } else {
        kept.join(" ")
    }
}
