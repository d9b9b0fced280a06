//! Exact match, token precision/recall/F1 and threshold judging.
//!
//! Token overlap is counted as a multiset intersection: a token that occurs
//! twice in both strings counts twice. When all tokens are distinct this is
//! the same as set intersection.

use serde::{Deserialize, Serialize};

use crate::error::{PedantsError, Result};
use crate::textnorm::{normalize, normalize_tokens, NormPolicy, TokenBag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScores {
    pub const ZERO: PrfScores = PrfScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    pub const PERFECT: PrfScores = PrfScores {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };

    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScores {
            precision,
            recall,
            f1,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.f1, self.precision, self.recall]
    }
}

/// Correctness threshold on a score; a score is accepted when it is at
/// least `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Threshold(value))
        } else {
            Err(PedantsError::ThresholdOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn accepts(self, score: f64) -> bool {
        score >= self.0
    }
}

/// True when the candidate equals any reference after EM normalization.
pub fn exact_match<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<bool> {
    exact_match_with(candidate, references, &NormPolicy::EM)
}

pub fn exact_match_with<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    policy: &NormPolicy,
) -> Result<bool> {
    if references.is_empty() {
        return Err(PedantsError::EmptyReferences);
    }
    let cand = normalize(candidate, policy);
    Ok(references
        .iter()
        .any(|r| normalize(r.as_ref(), policy) == cand))
}

/// Precision is denominated by candidate tokens, recall by reference tokens.
pub fn bag_prf(candidate: &TokenBag, reference: &TokenBag) -> PrfScores {
    match (candidate.is_empty(), reference.is_empty()) {
        (true, true) => return PrfScores::PERFECT,
        (true, false) | (false, true) => return PrfScores::ZERO,
        _ => {}
    }
    let common = candidate.overlap(reference) as f64;
    PrfScores::from_precision_recall(
        common / candidate.len() as f64,
        common / reference.len() as f64,
    )
}

pub fn token_prf(candidate: &str, reference: &str, policy: &NormPolicy) -> PrfScores {
    bag_prf(
        &normalize_tokens(candidate, policy),
        &normalize_tokens(reference, policy),
    )
}

/// Scores of the best-matching reference (highest F1, first on ties)
/// together with its index.
pub fn best_over_references<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    policy: &NormPolicy,
) -> Result<(usize, PrfScores)> {
    let cand = normalize_tokens(candidate, policy);
    let mut best: Option<(usize, PrfScores)> = None;
    for (i, r) in references.iter().enumerate() {
        let scores = bag_prf(&cand, &normalize_tokens(r.as_ref(), policy));
        if best.is_none_or(|(_, b)| scores.f1 > b.f1) {
            best = Some((i, scores));
        }
    }
    best.ok_or(PedantsError::EmptyReferences)
}

pub fn threshold_judge(scores: &PrfScores, threshold: Threshold) -> bool {
    threshold.accepts(scores.f1)
}
