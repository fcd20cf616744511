//! Tokenization shared by the featurizer, the rule-based canonicalizer and
//! the linguistic analyses.

use std::sync::LazyLock;

use regex::Regex;

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").unwrap());

/// Lowercases, replaces every Unicode punctuation character with a space and
/// splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    PUNCT
        .replace_all(&lowered, " ")
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Number of words as counted by [`tokenize`].
pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("A person walks forward, slowly."),
            vec!["a", "person", "walks", "forward", "slowly"]
        );
    }

    #[test]
    fn hyphen_splits_and_arrow_survives() {
        assert_eq!(tokenize("up-down"), vec!["up", "down"]);
        // The arrow is a math symbol, not punctuation.
        assert_eq!(tokenize("walk → turn"), vec!["walk", "→", "turn"]);
    }

    #[test]
    fn unicode_punctuation() {
        assert_eq!(tokenize("«walk»… “now”"), vec!["walk", "now"]);
        assert!(tokenize(" ,.;! ").is_empty());
    }
}
