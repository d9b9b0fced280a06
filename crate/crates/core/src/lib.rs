//! Answer-correctness judging for short-form question answering.
//!
//! The crate provides the string metrics (exact match, token F1), a TF-IDF
//! encoder, a deterministic logistic-regression trainer, the rule- and
//! type-aware learned judge built from them, and the harness used to compare
//! any judge against human labels.

pub mod error;
pub mod harness;
pub mod linear;
pub mod metrics;
pub mod pipeline;
pub mod textnorm;
pub mod vectorizer;

pub use error::{PedantsError, Result};
pub use linear::{LinearModel, TrainConfig};
pub use metrics::{
    best_over_references, exact_match, threshold_judge, token_prf, PrfScores, Threshold,
};
pub use pipeline::{Judgment, PedantsModel, QAExample, QuestionType, RuleLabel};
pub use textnorm::{normalize, tokenize, NormPolicy, NormPreset, TokenBag};
pub use vectorizer::{SparseVector, TfidfModel};
