//! Answer and question normalization, whitespace tokenization and a small
//! rule-based English lemmatizer.
//!
//! Every metric and encoder in the crate goes through this module, so the
//! reference and the candidate are always processed identically.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_categories::UnicodeCategories;
use unicode_normalization::UnicodeNormalization;

use crate::error::PedantsError;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Which normalization steps to apply. Steps run in a fixed order:
/// NFC, lowercase, punctuation removal, lemmatization, article removal,
/// whitespace collapsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormPolicy {
    pub lowercase: bool,
    pub strip_articles: bool,
    pub strip_punct: bool,
    pub collapse_whitespace: bool,
    pub lemmatize: bool,
}

impl NormPolicy {
    /// Exact-match normalization: lowercase, drop articles, punctuation and
    /// duplicate whitespace.
    pub const EM: NormPolicy = NormPolicy {
        lowercase: true,
        strip_articles: true,
        strip_punct: true,
        collapse_whitespace: true,
        lemmatize: false,
    };

    /// Preprocessing used by the learned judge: lowercase, drop punctuation,
    /// lemmatize. Articles are kept.
    pub const PEDANTS: NormPolicy = NormPolicy {
        lowercase: true,
        strip_articles: false,
        strip_punct: true,
        collapse_whitespace: true,
        lemmatize: true,
    };

    /// Whitespace splitting only.
    pub const RAW: NormPolicy = NormPolicy {
        lowercase: false,
        strip_articles: false,
        strip_punct: false,
        collapse_whitespace: false,
        lemmatize: false,
    };
}

impl Default for NormPolicy {
    fn default() -> Self {
        NormPolicy::EM
    }
}

/// Named policy presets selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormPreset {
    Em,
    Pedants,
}

impl NormPreset {
    pub fn policy(self) -> NormPolicy {
        match self {
            NormPreset::Em => NormPolicy::EM,
            NormPreset::Pedants => NormPolicy::PEDANTS,
        }
    }
}

impl FromStr for NormPreset {
    type Err = PedantsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "em" => Ok(NormPreset::Em),
            "pedants" => Ok(NormPreset::Pedants),
            other => Err(PedantsError::UnknownPreset(other.to_string())),
        }
    }
}

/// A tokenized string with per-token multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    tokens: Vec<String>,
    counts: BTreeMap<String, usize>,
}

impl TokenBag {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut bag = TokenBag::default();
        for token in tokens {
            let token = token.into();
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                continue;
            }
            *bag.counts.entry(token.clone()).or_insert(0) += 1;
            bag.tokens.push(token);
        }
        bag
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn count(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Size of the multiset intersection with `other`.
    pub fn overlap(&self, other: &TokenBag) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(token, &n)| n.min(large.count(token)))
            .sum()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

fn is_article(word: &str) -> bool {
    ARTICLES.iter().any(|a| a.eq_ignore_ascii_case(word))
}

/// Normalize `text` according to `policy`. Total and idempotent.
pub fn normalize(text: &str, policy: &NormPolicy) -> String {
    let mut s: String = text.nfc().collect();
    if policy.lowercase {
        s = s.to_lowercase().nfc().collect();
    }
    if policy.strip_punct {
        s = s.chars().filter(|c| !c.is_punctuation()).nfc().collect();
    }

    if !(policy.lemmatize || policy.strip_articles || policy.collapse_whitespace) {
        return s;
    }

    // Word-level passes. Whitespace runs are preserved verbatim unless
    // collapsing is enabled.
    let mut words: Vec<String> = Vec::new();
    let mut out = String::with_capacity(s.len());
    for (is_space, segment) in segments(&s) {
        if is_space {
            if !policy.collapse_whitespace {
                out.push_str(segment);
            }
            continue;
        }
        let word = if policy.lemmatize {
            lemmatize_token(segment)
        } else {
            segment.to_string()
        };
        if policy.strip_articles && is_article(&word) {
            continue;
        }
        if policy.collapse_whitespace {
            words.push(word);
        } else {
            out.push_str(&word);
        }
    }
    if policy.collapse_whitespace {
        words.join(" ")
    } else {
        out
    }
}

/// Splits into alternating whitespace / non-whitespace runs.
fn segments(s: &str) -> impl Iterator<Item = (bool, &str)> {
    let mut rest = s;
    std::iter::from_fn(move || {
        let first = rest.chars().next()?;
        let is_space = first.is_whitespace();
        let end = rest
            .char_indices()
            .find(|(_, c)| c.is_whitespace() != is_space)
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let (head, tail) = rest.split_at(end);
        rest = tail;
        Some((is_space, head))
    })
}

/// Split on runs of whitespace (spaces, tabs, newlines).
pub fn tokenize(text: &str) -> TokenBag {
    TokenBag::from_tokens(text.split_whitespace())
}

/// Normalize then tokenize.
pub fn normalize_tokens(text: &str, policy: &NormPolicy) -> TokenBag {
    tokenize(&normalize(text, policy))
}

pub fn lemmatize(bag: &TokenBag) -> TokenBag {
    TokenBag::from_tokens(bag.tokens().iter().map(|t| lemmatize_token(t)))
}

// Irregular plurals. Every entry maps to a token no longer than its key, and
// every value is a fixed point of `lemmatize_token`.
const EXCEPTIONS: &[(&str, &str)] = &[
    ("buses", "bus"),
    ("children", "child"),
    ("feet", "foot"),
    ("geese", "goose"),
    ("halves", "half"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("lives", "life"),
    ("men", "man"),
    ("shelves", "shelf"),
    ("teeth", "tooth"),
    ("thieves", "thief"),
    ("wives", "wife"),
    ("wolves", "wolf"),
    ("women", "woman"),
];

const INVARIANT: &[&str] = &[
    "always",
    "analysis",
    "basis",
    "crisis",
    "news",
    "physics",
    "politics",
    "series",
    "species",
    "thesis",
    "mathematics",
    "economics",
    "was",
    "has",
    "does",
    "goes",
    "this",
    "these",
    "those",
    "yes",
    "its",
    "his",
    "hers",
    "ours",
    "yours",
    "theirs",
    "perhaps",
    "whereas",
    "towards",
    "across",
    "besides",
    "unless",
    "afterwards",
];

/// Reduce one token to its lemma. Pure, deterministic, never lengthens the
/// token. Only purely alphabetic tokens of four or more characters are
/// touched.
pub fn lemmatize_token(token: &str) -> String {
    let reduced = reduce_suffix(token);
    match EXCEPTIONS.binary_search_by(|(k, _)| (*k).cmp(reduced.as_str())) {
        Ok(i) => EXCEPTIONS[i].1.to_string(),
        Err(_) => reduced,
    }
}

fn reduce_suffix(token: &str) -> String {
    if EXCEPTIONS
        .binary_search_by(|(k, _)| (*k).cmp(token))
        .is_ok()
    {
        return token.to_string();
    }
    if token.chars().count() < 4
        || !token.chars().all(|c| c.is_ascii_lowercase())
        || INVARIANT.contains(&token)
    {
        return token.to_string();
    }
    let stem = |n: usize| token[..token.len() - n].to_string();

    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return token.to_string();
    }
    if token.len() > 4 && token.ends_with("ies") {
        return stem(3) + "y";
    }
    if token.ends_with("sses")
        || token.ends_with("xes")
        || token.ends_with("zes")
        || token.ends_with("ches")
        || token.ends_with("shes")
    {
        return stem(2);
    }
    if token.ends_with('s') {
        return stem(1);
    }
    token.to_string()
}
