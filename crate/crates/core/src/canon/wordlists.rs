//! Versioned word-category lists used by the rule-based canonicalizer and the
//! linguistic analyses.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WORDLISTS_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Determiners,
    Pronouns,
    Prepositions,
    Conjunctions,
    Discourse,
    Hedges,
    Subjects,
    Verbs,
    Body,
    Directions,
    Manner,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Determiners,
        Category::Pronouns,
        Category::Prepositions,
        Category::Conjunctions,
        Category::Discourse,
        Category::Hedges,
        Category::Subjects,
        Category::Verbs,
        Category::Body,
        Category::Directions,
        Category::Manner,
    ];

    /// Content categories: motion-relevant words.
    pub const CONTENT: [Category; 4] = [
        Category::Verbs,
        Category::Body,
        Category::Directions,
        Category::Manner,
    ];

    /// Grammatical function categories entering the aggregate function rate.
    pub const FUNCTION: [Category; 5] = [
        Category::Determiners,
        Category::Pronouns,
        Category::Prepositions,
        Category::Conjunctions,
        Category::Discourse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Determiners => "determiners",
            Category::Pronouns => "pronouns",
            Category::Prepositions => "prepositions",
            Category::Conjunctions => "conjunctions",
            Category::Discourse => "discourse",
            Category::Hedges => "hedges",
            Category::Subjects => "subjects",
            Category::Verbs => "verbs",
            Category::Body => "body",
            Category::Directions => "directions",
            Category::Manner => "manner",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn is_content(self) -> bool {
        Category::CONTENT.contains(&self)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn embedded(cat: Category) -> &'static str {
    match cat {
        Category::Determiners => include_str!("../../assets/wordlists/v1/determiners.txt"),
        Category::Pronouns => include_str!("../../assets/wordlists/v1/pronouns.txt"),
        Category::Prepositions => include_str!("../../assets/wordlists/v1/prepositions.txt"),
        Category::Conjunctions => include_str!("../../assets/wordlists/v1/conjunctions.txt"),
        Category::Discourse => include_str!("../../assets/wordlists/v1/discourse.txt"),
        Category::Hedges => include_str!("../../assets/wordlists/v1/hedges.txt"),
        Category::Subjects => include_str!("../../assets/wordlists/v1/subjects.txt"),
        Category::Verbs => include_str!("../../assets/wordlists/v1/verbs.txt"),
        Category::Body => include_str!("../../assets/wordlists/v1/body.txt"),
        Category::Directions => include_str!("../../assets/wordlists/v1/directions.txt"),
        Category::Manner => include_str!("../../assets/wordlists/v1/manner.txt"),
    }
}

/// Disjoint lowercase token sets, one per [`Category`].
#[derive(Debug, Clone, PartialEq)]
pub struct WordLists {
    lookup: HashMap<String, Category>,
    sets: BTreeMap<Category, Vec<String>>,
}

impl Default for WordLists {
    fn default() -> Self {
        Self::builtin()
    }
}

impl WordLists {
    /// The lists shipped with the crate (version [`WORDLISTS_VERSION`]).
    pub fn builtin() -> Self {
        let sets = Category::ALL
            .into_iter()
            .map(|c| (c, parse_list(embedded(c))))
            .collect();
        Self::from_sets(sets).expect("builtin word lists are valid")
    }

    /// Loads `<category>.txt` files from a directory, one token per line.
    /// Missing files yield empty categories.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for c in Category::ALL {
            let p = dir.join(format!("{}.txt", c.name()));
            let body = match std::fs::read_to_string(&p) {
                Ok(b) => b,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(Error::io(p, e)),
            };
            sets.insert(c, parse_list(&body));
        }
        Self::from_sets(sets)
    }

    pub fn from_sets(sets: BTreeMap<Category, Vec<String>>) -> Result<Self> {
        let mut lookup = HashMap::new();
        for (&cat, words) in &sets {
            for w in words {
                if w.is_empty() || w.chars().any(char::is_whitespace) || w.to_lowercase() != *w {
                    return Err(Error::validation(
                        format!("wordlists.{cat}"),
                        format!("{w:?} must be a single lowercase token"),
                    ));
                }
                if let Some(prev) = lookup.insert(w.clone(), cat) {
                    if prev != cat {
                        return Err(Error::validation(
                            format!("wordlists.{cat}"),
                            format!("{w:?} also listed under {prev}"),
                        ));
                    }
                }
            }
        }
        Ok(Self { lookup, sets })
    }

    pub fn words(&self, cat: Category) -> &[String] {
        self.sets.get(&cat).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, cat: Category, token: &str) -> bool {
        self.category_of(token) == Some(cat)
    }

    /// Category of a lowercase token. Action verbs also match their
    /// inflected forms via [`verb_lemma`](Self::verb_lemma).
    pub fn category_of(&self, token: &str) -> Option<Category> {
        if let Some(&c) = self.lookup.get(token) {
            return Some(c);
        }
        self.verb_lemma(token).map(|_| Category::Verbs)
    }

    /// Base form of an action verb, accepting the suffixes `s`, `es`, `ed`
    /// and `ing` with optional silent-`e` restoration and consonant
    /// undoubling (`runs`, `raised`, `waving`, `running`).
    pub fn verb_lemma<'a>(&'a self, token: &'a str) -> Option<&'a str> {
        if self.lookup.get(token) == Some(&Category::Verbs) {
            return Some(token);
        }
        let is_verb = |w: &str| self.lookup.get(w) == Some(&Category::Verbs);
        for suffix in ["ing", "ed", "es", "s"] {
            let Some(stem) = token.strip_suffix(suffix) else {
                continue;
            };
            if stem.len() < 2 {
                continue;
            }
            if is_verb(stem) {
                return self.lookup.get_key_value(stem).map(|(k, _)| k.as_str());
            }
            let with_e = format!("{stem}e");
            if is_verb(&with_e) {
                return self.lookup.get_key_value(&with_e).map(|(k, _)| k.as_str());
            }
            let b = stem.as_bytes();
            if b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
                let undoubled = &stem[..stem.len() - 1];
                if is_verb(undoubled) {
                    return self.lookup.get_key_value(undoubled).map(|(k, _)| k.as_str());
                }
            }
        }
        None
    }

    /// Whether an original token survives into a canonical token set. Verbs
    /// survive when any canonical token shares their lemma; other tokens
    /// need an exact match.
    pub fn survives(&self, token: &str, canonical: &HashSet<String>) -> bool {
        if canonical.contains(token) {
            return true;
        }
        match self.verb_lemma(token) {
            Some(lemma) => canonical.iter().any(|c| self.verb_lemma(c) == Some(lemma)),
            None => false,
        }
    }
}

fn parse_list(body: &str) -> Vec<String> {
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Per-category counts of original tokens that do not survive into the
/// canonical text. Uncategorized tokens are not tallied.
pub fn removed_by_category(
    wl: &WordLists,
    original_tokens: &[String],
    canonical: &HashSet<String>,
) -> BTreeMap<Category, usize> {
    let mut out = BTreeMap::new();
    for t in original_tokens {
        if let Some(cat) = wl.category_of(t) {
            if !wl.survives(t, canonical) {
                *out.entry(cat).or_insert(0) += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lists_pinned() {
        assert_eq!(WORDLISTS_VERSION, "1");
        let wl = WordLists::builtin();
        assert_eq!(wl.words(Category::Determiners).len(), 19);
        assert_eq!(wl.words(Category::Subjects).len(), 13);
        assert!(wl.contains(Category::Subjects, "person"));
        assert!(wl.contains(Category::Pronouns, "someone"));
        assert!(wl.contains(Category::Directions, "forward"));
    }

    #[test]
    fn categories_disjoint_and_lowercase() {
        let wl = WordLists::builtin();
        let mut seen = HashSet::new();
        for c in Category::ALL {
            for w in wl.words(c) {
                assert!(seen.insert(w.clone()), "{w} in two categories");
                assert_eq!(w.to_lowercase(), *w);
            }
        }
    }

    #[test]
    fn overlapping_lists_rejected() {
        let mut sets = BTreeMap::new();
        sets.insert(Category::Determiners, vec!["the".to_string()]);
        sets.insert(Category::Pronouns, vec!["the".to_string()]);
        assert!(WordLists::from_sets(sets).is_err());
        let mut sets = BTreeMap::new();
        sets.insert(Category::Body, vec!["Left Arm".to_string()]);
        assert!(WordLists::from_sets(sets).is_err());
    }

    #[test]
    fn verb_inflections() {
        let wl = WordLists::builtin();
        for (form, lemma) in [
            ("walks", "walk"),
            ("walked", "walk"),
            ("walking", "walk"),
            ("raised", "raise"),
            ("waving", "wave"),
            ("running", "run"),
            ("stepped", "step"),
            ("crouches", "crouch"),
        ] {
            assert_eq!(wl.verb_lemma(form), Some(lemma), "{form}");
        }
        assert_eq!(wl.verb_lemma("sing"), None);
        assert_eq!(wl.category_of("things"), None);
    }

    #[test]
    fn removal_tally() {
        let wl = WordLists::builtin();
        let orig = crate::text::tokenize("a person walks");
        let canon: HashSet<String> = ["walks".to_string()].into();
        let removed = removed_by_category(&wl, &orig, &canon);
        assert_eq!(removed.get(&Category::Determiners), Some(&1));
        assert_eq!(removed.get(&Category::Subjects), Some(&1));
        assert_eq!(removed.get(&Category::Verbs), None);
        // Lemma match keeps the verb.
        let canon: HashSet<String> = ["walk".to_string()].into();
        assert!(wl.survives("walks", &canon));
    }
}
