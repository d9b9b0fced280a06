//! The learned answer-correctness judge.
//!
//! Two 7-way extractors predict the question type (from the question and
//! reference) and the applicable correctness rule (from question, reference
//! and candidate). Their probability vectors, the token F1/precision/recall
//! of the candidate against its best reference, and a TF-IDF encoding of the
//! `[CLS] q [SEP] a [SEP] candidate` string are concatenated and fed to a
//! binary logistic-regression judge.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{MissingAnnotation, PedantsError, Result};
use crate::linear::{self, argmax, LinearModel, TrainConfig};
use crate::metrics::{best_over_references, PrfScores};
use crate::textnorm::{normalize_tokens, NormPolicy};
use crate::vectorizer::{
    encode_pair, encode_triple, pair_tokens, triple_tokens, SparseVector, TfidfConfig, TfidfModel,
};

pub const FORMAT_VERSION: u32 = 1;

/// Width of the dense prefix: type probabilities, rule probabilities and
/// the (F1, precision, recall) token block.
pub const DENSE_FEATURES: usize = QuestionType::COUNT + RuleLabel::COUNT + 3;

/// Index of the "correct" class in the final judge.
pub const CORRECT: usize = 1;

const SEED_CORPUS: &str = include_str!("../data/seed.jsonl");

macro_rules! code_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $err:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: [$name; 7] = [$($name::$variant),+];
            pub const COUNT: usize = 7;

            /// Stable integer code, 0..=6 in declaration order.
            pub fn code(self) -> usize {
                self as usize
            }

            pub fn from_code(code: usize) -> Option<Self> {
                Self::ALL.get(code).copied()
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = PedantsError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(PedantsError::$err(other.to_string())),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

code_enum! {
    /// Wh-category of a question.
    QuestionType, UnknownQuestionType {
        Who => "who",
        Why => "why",
        How => "how",
        What => "what",
        When => "when",
        Where => "where",
        Which => "which",
    }
}

code_enum! {
    /// Answer-correctness rules.
    RuleLabel, UnknownRule {
        R1 => "R1",
        R2 => "R2",
        R3 => "R3",
        R4 => "R4",
        R5 => "R5",
        R6 => "R6",
        R7 => "R7",
    }
}

impl RuleLabel {
    pub fn name(self) -> &'static str {
        match self {
            RuleLabel::R1 => "entity aliasing",
            RuleLabel::R2 => "numerical information",
            RuleLabel::R3 => "less details",
            RuleLabel::R4 => "more details",
            RuleLabel::R5 => "semantic equivalence",
            RuleLabel::R6 => "irrelevant information",
            RuleLabel::R7 => "other possible answers",
        }
    }
}

impl QuestionType {
    /// First wh-word in the question, if any. "whom" and "whose" count as
    /// "who".
    pub fn from_question(question: &str) -> Option<QuestionType> {
        normalize_tokens(question, &NormPolicy::EM)
            .tokens()
            .iter()
            .find_map(|t| match t.as_str() {
                "who" | "whom" | "whose" => Some(QuestionType::Who),
                "why" => Some(QuestionType::Why),
                "how" => Some(QuestionType::How),
                "what" => Some(QuestionType::What),
                "when" => Some(QuestionType::When),
                "where" => Some(QuestionType::Where),
                "which" => Some(QuestionType::Which),
                _ => None,
            })
    }
}

/// One judging instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub question: String,
    pub references: Vec<String>,
    pub candidate: String,
    #[serde(
        rename = "label",
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "label_ser",
        deserialize_with = "label_de"
    )]
    pub human_label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<QuestionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
}

fn label_ser<S: Serializer>(label: &Option<bool>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match label {
        Some(b) => s.serialize_u8(u8::from(*b)),
        None => s.serialize_none(),
    }
}

fn label_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<bool>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Bool(bool),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Bool(b)) => Ok(Some(b)),
        Some(Raw::Int(0)) => Ok(Some(false)),
        Some(Raw::Int(1)) => Ok(Some(true)),
        Some(Raw::Int(n)) => Err(serde::de::Error::custom(format!(
            "label must be 0 or 1, got {n}"
        ))),
    }
}

impl QAExample {
    pub fn new(question: &str, references: &[&str], candidate: &str) -> Self {
        QAExample {
            question: question.to_string(),
            references: references.iter().map(|s| s.to_string()).collect(),
            candidate: candidate.to_string(),
            human_label: None,
            rule: None,
            qtype: None,
            model_id: None,
            dataset_id: None,
        }
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.human_label = Some(label);
        self
    }

    pub fn with_annotations(mut self, rule: RuleLabel, qtype: QuestionType) -> Self {
        self.rule = Some(rule);
        self.qtype = Some(qtype);
        self
    }

    /// Index and token scores of the best reference under the judge's
    /// preprocessing.
    pub fn best_reference(&self) -> Result<(usize, PrfScores)> {
        best_over_references(&self.candidate, &self.references, &NormPolicy::PEDANTS)
    }
}

/// Parse a JSONL corpus. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_jsonl(text: &str) -> std::result::Result<Vec<QAExample>, (usize, PedantsError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(ex)) => out.push(ex),
            Ok(None) => {}
            Err(e) => return Err((i + 1, e)),
        }
    }
    Ok(out)
}

/// Parse one JSONL line; `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str) -> Result<Option<QAExample>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let ex: QAExample = serde_json::from_str(trimmed)?;
    if ex.references.is_empty() {
        return Err(PedantsError::EmptyReferences);
    }
    Ok(Some(ex))
}

/// The bundled hand-authored training corpus.
pub fn seed_corpus() -> Vec<QAExample> {
    parse_jsonl(SEED_CORPUS).expect("bundled seed corpus parses")
}

/// Inputs to the final judge for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub type_probs: [f64; 7],
    pub rule_probs: [f64; 7],
    pub token_scores: PrfScores,
    pub text: SparseVector,
    pub chosen_reference: usize,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        DENSE_FEATURES + self.text.dimension()
    }

    /// `[type_probs, rule_probs, f1, precision, recall, text...]`.
    pub fn assemble(&self) -> SparseVector {
        let mut prefix = Vec::with_capacity(DENSE_FEATURES);
        prefix.extend_from_slice(&self.type_probs);
        prefix.extend_from_slice(&self.rule_probs);
        prefix.extend_from_slice(&self.token_scores.as_array());
        self.text.with_dense_prefix(&prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedantsConfig {
    pub train: TrainConfig,
    pub tfidf: TfidfConfig,
    /// When the type extractor's top probability is below
    /// `type_fallback_below`, the reported type comes from the question's
    /// first wh-word ("what" if none). Only the reported type changes; the
    /// judge still sees the extractor's probabilities.
    pub type_fallback: bool,
    pub type_fallback_below: f64,
}

impl Default for PedantsConfig {
    fn default() -> Self {
        PedantsConfig {
            train: TrainConfig::default(),
            tfidf: TfidfConfig::default(),
            type_fallback: true,
            type_fallback_below: 0.5,
        }
    }
}

impl PedantsConfig {
    pub fn with_seed(seed: u64) -> Self {
        PedantsConfig {
            train: TrainConfig::with_seed(seed),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub seed: u64,
    /// SHA-256 of the canonical JSONL serialization of the training set.
    pub corpus_sha256: String,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizers {
    #[serde(rename = "type")]
    pub type_pair: TfidfModel,
    pub rule: TfidfModel,
    pub judge: TfidfModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    #[serde(rename = "type")]
    pub type_extractor: LinearModel,
    pub rule: LinearModel,
    pub judge: LinearModel,
}

/// The full trained judge, persisted as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedantsModel {
    pub format_version: u32,
    pub vectorizers: Vectorizers,
    pub models: Models,
    pub config: PedantsConfig,
    pub fingerprint: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub correct: bool,
    /// Probability of the "correct" class.
    pub confidence: f64,
    pub predicted_rule: RuleLabel,
    pub predicted_type: QuestionType,
    pub type_fallback_used: bool,
    pub token_scores: PrfScores,
    pub chosen_reference: usize,
}

fn into_array7(v: Vec<f64>) -> [f64; 7] {
    let mut out = [0.0; 7];
    out.copy_from_slice(&v);
    out
}

fn require_two_classes(labels: impl Iterator<Item = usize>) -> Result<()> {
    let mut first = None;
    for l in labels {
        match first {
            None => first = Some(l),
            Some(f) if f != l => return Ok(()),
            _ => {}
        }
    }
    Err(PedantsError::SingleClassCorpus)
}

fn fit_and_train(
    docs: Vec<Vec<String>>,
    labels: Vec<usize>,
    classes: usize,
    tfidf: &TfidfConfig,
    train: &TrainConfig,
) -> Result<(TfidfModel, LinearModel)> {
    require_two_classes(labels.iter().copied())?;
    let vectorizer = TfidfModel::fit_tokens(&docs, *tfidf)?;
    let data: Vec<(SparseVector, usize)> = docs
        .iter()
        .map(|d| vectorizer.transform_tokens(d))
        .zip(labels)
        .collect();
    let model = linear::train(&data, classes, train)?;
    Ok((vectorizer, model))
}

/// Fit the type extractor on `[CLS] q [SEP] a` encodings.
pub fn train_type_extractor(
    examples: &[(&str, &str, QuestionType)],
    tfidf: &TfidfConfig,
    train: &TrainConfig,
) -> Result<(TfidfModel, LinearModel)> {
    let docs = examples.iter().map(|(q, a, _)| pair_tokens(q, a)).collect();
    let labels = examples.iter().map(|(_, _, t)| t.code()).collect();
    fit_and_train(docs, labels, QuestionType::COUNT, tfidf, train)
}

/// Fit the rule extractor on `[CLS] q [SEP] a [SEP] candidate` encodings.
pub fn train_rule_extractor(
    examples: &[(&str, &str, &str, RuleLabel)],
    tfidf: &TfidfConfig,
    train: &TrainConfig,
) -> Result<(TfidfModel, LinearModel)> {
    let docs = examples
        .iter()
        .map(|(q, a, c, _)| triple_tokens(q, a, c))
        .collect();
    let labels = examples.iter().map(|(_, _, _, r)| r.code()).collect();
    fit_and_train(docs, labels, RuleLabel::COUNT, tfidf, train)
}

pub fn corpus_sha256(examples: &[QAExample]) -> Result<String> {
    let mut hasher = Sha256::new();
    for ex in examples {
        hasher.update(serde_json::to_vec(ex)?);
        hasher.update(b"\n");
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

struct Annotated<'a> {
    example: &'a QAExample,
    label: bool,
    rule: RuleLabel,
    qtype: QuestionType,
    reference: usize,
}

fn check_annotations(train_set: &[QAExample]) -> Result<Vec<Annotated<'_>>> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(train_set.len());
    for (index, ex) in train_set.iter().enumerate() {
        let mut fields = Vec::new();
        if ex.references.is_empty() {
            fields.push("references");
        }
        if ex.human_label.is_none() {
            fields.push("label");
        }
        if ex.rule.is_none() {
            fields.push("rule");
        }
        if ex.qtype.is_none() {
            fields.push("qtype");
        }
        if fields.is_empty() {
            out.push(Annotated {
                example: ex,
                label: ex.human_label.unwrap_or_default(),
                rule: ex.rule.unwrap_or(RuleLabel::R1),
                qtype: ex.qtype.unwrap_or(QuestionType::What),
                reference: ex.best_reference()?.0,
            });
        } else {
            missing.push(MissingAnnotation { index, fields });
        }
    }
    if !missing.is_empty() {
        return Err(PedantsError::MissingAnnotations(missing));
    }
    if out.is_empty() {
        return Err(PedantsError::SingleClassCorpus);
    }
    Ok(out)
}

/// Train both extractors and the final judge. Deterministic in
/// `(train_set, config)`.
pub fn train_pedants(train_set: &[QAExample], config: &PedantsConfig) -> Result<PedantsModel> {
    let annotated = check_annotations(train_set)?;
    fn reference<'a>(a: &Annotated<'a>) -> &'a str {
        a.example.references[a.reference].as_str()
    }

    let type_examples: Vec<_> = annotated
        .iter()
        .map(|a| (a.example.question.as_str(), reference(a), a.qtype))
        .collect();
    let (type_vec, type_model) =
        train_type_extractor(&type_examples, &config.tfidf, &config.train)?;

    let rule_examples: Vec<_> = annotated
        .iter()
        .map(|a| {
            (
                a.example.question.as_str(),
                reference(a),
                a.example.candidate.as_str(),
                a.rule,
            )
        })
        .collect();
    let (rule_vec, rule_model) =
        train_rule_extractor(&rule_examples, &config.tfidf, &config.train)?;

    let labels: Vec<usize> = annotated.iter().map(|a| usize::from(a.label)).collect();
    require_two_classes(labels.iter().copied())?;

    // The judge's text block uses the same triple encoding as the rule
    // extractor, so the fitted vocabulary is shared.
    let judge_vec = rule_vec.clone();
    let mut model = PedantsModel {
        format_version: FORMAT_VERSION,
        vectorizers: Vectorizers {
            type_pair: type_vec,
            rule: rule_vec,
            judge: judge_vec,
        },
        models: Models {
            type_extractor: type_model,
            rule: rule_model,
            judge: LinearModel::zeros(2, 0),
        },
        config: *config,
        fingerprint: Fingerprint {
            seed: config.train.seed,
            corpus_sha256: corpus_sha256(train_set)?,
            examples: train_set.len(),
        },
    };

    let data = annotated
        .iter()
        .zip(labels)
        .map(|(a, y)| Ok((model.assemble_features(a.example)?.assemble(), y)))
        .collect::<Result<Vec<_>>>()?;
    model.models.judge = linear::train(&data, 2, &config.train)?;
    Ok(model)
}

impl PedantsModel {
    pub fn judge_dimension(&self) -> usize {
        DENSE_FEATURES + self.vectorizers.judge.dimension()
    }

    pub fn type_probs(&self, question: &str, reference: &str) -> Result<[f64; 7]> {
        let x = encode_pair(question, reference, &self.vectorizers.type_pair);
        Ok(into_array7(self.models.type_extractor.predict_proba(&x)?))
    }

    pub fn rule_probs(&self, question: &str, reference: &str, candidate: &str) -> Result<[f64; 7]> {
        let x = encode_triple(question, reference, candidate, &self.vectorizers.rule);
        Ok(into_array7(self.models.rule.predict_proba(&x)?))
    }

    pub fn assemble_features(&self, example: &QAExample) -> Result<FeatureVector> {
        let (idx, token_scores) = example.best_reference()?;
        let reference = example.references[idx].as_str();
        Ok(FeatureVector {
            type_probs: self.type_probs(&example.question, reference)?,
            rule_probs: self.rule_probs(&example.question, reference, &example.candidate)?,
            token_scores,
            text: encode_triple(
                &example.question,
                reference,
                &example.candidate,
                &self.vectorizers.judge,
            ),
            chosen_reference: idx,
        })
    }

    pub fn judge(&self, example: &QAExample) -> Result<Judgment> {
        let features = self.assemble_features(example)?;
        let probs = self.models.judge.predict_proba(&features.assemble())?;

        let type_top = argmax(&features.type_probs);
        let mut predicted_type = QuestionType::ALL[type_top];
        let mut type_fallback_used = false;
        if self.config.type_fallback
            && features.type_probs[type_top] < self.config.type_fallback_below
        {
            predicted_type =
                QuestionType::from_question(&example.question).unwrap_or(QuestionType::What);
            type_fallback_used = true;
        }

        Ok(Judgment {
            correct: argmax(&probs) == CORRECT,
            confidence: probs[CORRECT],
            predicted_rule: RuleLabel::ALL[argmax(&features.rule_probs)],
            predicted_type,
            type_fallback_used,
            token_scores: features.token_scores,
            chosen_reference: features.chosen_reference,
        })
    }

    /// Structural checks for a loaded bundle.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(PedantsError::UnsupportedVersion {
                expected: FORMAT_VERSION,
                found: self.format_version,
            });
        }
        let m = &self.models;
        let v = &self.vectorizers;
        for model in [&m.type_extractor, &m.rule, &m.judge] {
            model.check()?;
        }
        let expect = |what: &str, model: &LinearModel, classes: usize, dim: usize| {
            if model.classes() != classes || model.feature_dim() != dim {
                Err(PedantsError::CorruptModel(format!(
                    "{what} model is {}x{}, expected {classes}x{dim}",
                    model.classes(),
                    model.feature_dim()
                )))
            } else {
                Ok(())
            }
        };
        expect("type", &m.type_extractor, 7, v.type_pair.dimension())?;
        expect("rule", &m.rule, 7, v.rule.dimension())?;
        expect("judge", &m.judge, 2, self.judge_dimension())?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PedantsModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let json = self.to_json().map_err(std::io::Error::other)?;
        fs::write(path, json)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
