//! The judges selectable with `--metric`.

use std::fmt;
use std::sync::Arc;

use pedants::metrics::exact_match_with;
use pedants::{best_over_references, Judgment, NormPolicy, PedantsModel, QAExample, Threshold};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MetricKind {
    Em,
    F1,
    Pedants,
}

#[derive(Clone)]
pub enum Scorer {
    Em(NormPolicy),
    F1 {
        policy: NormPolicy,
        threshold: Threshold,
    },
    Pedants(Arc<PedantsModel>),
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scorer::Em(_) => f.write_str("em"),
            Scorer::F1 { threshold, .. } => write!(f, "f1@{}", threshold.value()),
            Scorer::Pedants(_) => f.write_str("pedants"),
        }
    }
}

/// Output of the string metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricVerdict {
    pub correct: bool,
    pub score: f64,
    pub chosen_reference: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Verdict {
    Metric(MetricVerdict),
    Pedants(Judgment),
}

impl Verdict {
    pub fn correct(&self) -> bool {
        match self {
            Verdict::Metric(m) => m.correct,
            Verdict::Pedants(j) => j.correct,
        }
    }
}

impl Scorer {
    pub fn score(&self, ex: &QAExample) -> pedants::Result<Verdict> {
        match self {
            Scorer::Em(policy) => {
                let correct = exact_match_with(&ex.candidate, &ex.references, policy)?;
                let (chosen_reference, _) =
                    best_over_references(&ex.candidate, &ex.references, policy)?;
                Ok(Verdict::Metric(MetricVerdict {
                    correct,
                    score: if correct { 1.0 } else { 0.0 },
                    chosen_reference,
                }))
            }
            Scorer::F1 { policy, threshold } => {
                let (chosen_reference, s) =
                    best_over_references(&ex.candidate, &ex.references, policy)?;
                Ok(Verdict::Metric(MetricVerdict {
                    correct: threshold.accepts(s.f1),
                    score: s.f1,
                    chosen_reference,
                }))
            }
            Scorer::Pedants(model) => model.judge(ex).map(Verdict::Pedants),
        }
    }
}
