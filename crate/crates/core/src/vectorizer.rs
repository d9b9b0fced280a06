//! TF-IDF encoding of questions and answers into sparse vectors.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PedantsError, Result};
use crate::textnorm::{normalize, NormPolicy};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

pub const TFIDF_FORMAT_VERSION: u32 = 1;

/// A sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> Self {
        SparseVector {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from arbitrary `(index, weight)` pairs. Duplicate
    /// indices are summed and explicit zeros dropped.
    pub fn from_pairs(dimension: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            if i >= dimension {
                return Err(PedantsError::InconsistentDimensions {
                    expected: dimension,
                    found: i + 1,
                });
            }
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        Ok(SparseVector { dimension, entries })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            dimension: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i, *w))
                .collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, w) in &mut self.entries {
            *w *= factor;
        }
    }

    /// Unit-normalizes in place; the zero vector is left untouched.
    pub fn l2_normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n);
        }
    }

    /// `[prefix..., self...]` with `self`'s indices shifted by the prefix
    /// length.
    pub fn with_dense_prefix(&self, prefix: &[f64]) -> SparseVector {
        let offset = prefix.len();
        let mut entries: Vec<(usize, f64)> = prefix
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i, *w))
            .collect();
        entries.extend(self.entries.iter().map(|&(i, w)| (i + offset, w)));
        SparseVector {
            dimension: self.dimension + offset,
            entries,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    /// idf = ln((1 + N) / (1 + df)) + 1 when set, ln(N / df) + 1 otherwise.
    pub smooth_idf: bool,
    pub l2_normalize: bool,
    /// Tokens seen in fewer documents are left out of the vocabulary.
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            smooth_idf: true,
            l2_normalize: true,
            min_df: 1,
        }
    }
}

/// A fitted unigram TF-IDF vocabulary. Column order is the lexicographic
/// order of the tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    config: TfidfConfig,
    doc_count: usize,
    vocab: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

impl TfidfModel {
    /// Fit on whitespace-separated, already normalized documents.
    pub fn fit<S: AsRef<str>>(corpus: &[S], config: TfidfConfig) -> Result<Self> {
        let docs: Vec<Vec<&str>> = corpus
            .iter()
            .map(|d| d.as_ref().split_whitespace().collect())
            .collect();
        Self::fit_tokens(&docs, config)
    }

    pub fn fit_tokens<D, S>(corpus: &[D], config: TfidfConfig) -> Result<Self>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        if corpus.is_empty() {
            return Err(PedantsError::EmptyCorpus);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in corpus {
            let mut seen: Vec<&str> = doc.as_ref().iter().map(|t| t.as_ref()).collect();
            seen.sort_unstable();
            seen.dedup();
            for token in seen {
                *df.entry(token).or_insert(0) += 1;
            }
        }
        let n = corpus.len() as f64;
        let min_df = config.min_df.max(1);
        let (vocab, idf): (Vec<String>, Vec<f64>) = df
            .into_iter()
            .filter(|&(_, d)| d >= min_df)
            .map(|(token, d)| {
                let d = d as f64;
                let idf = if config.smooth_idf {
                    ((1.0 + n) / (1.0 + d)).ln() + 1.0
                } else {
                    (n / d).ln() + 1.0
                };
                (token.to_string(), idf)
            })
            .unzip();
        Ok(Self::from_parts(config, corpus.len(), vocab, idf))
    }

    fn from_parts(
        config: TfidfConfig,
        doc_count: usize,
        vocab: Vec<String>,
        idf: Vec<f64>,
    ) -> Self {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfModel {
            config,
            doc_count,
            vocab,
            idf,
            index,
        }
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn idf_weights(&self) -> &[f64] {
        &self.idf
    }

    pub fn dimension(&self) -> usize {
        self.vocab.len()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.column(token).map(|i| self.idf[i])
    }

    /// Raw term counts times idf, optionally unit-normalized. Unknown tokens
    /// are dropped; an all-unknown document encodes to the zero vector.
    pub fn transform_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(col) = self.column(t.as_ref()) {
                *tf.entry(col).or_insert(0.0) += 1.0;
            }
        }
        let mut v = SparseVector {
            dimension: self.dimension(),
            entries: tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect(),
        };
        if self.config.l2_normalize {
            v.l2_normalize();
        }
        v
    }

    pub fn transform(&self, document: &str) -> SparseVector {
        let tokens: Vec<&str> = document.split_whitespace().collect();
        self.transform_tokens(&tokens)
    }
}

/// `[CLS] seg0 [SEP] seg1 [SEP] ...`, each segment normalized under the
/// judge's policy. Separator tokens are inserted after normalization so
/// punctuation stripping does not touch them.
pub fn segment_tokens(segments: &[&str]) -> Vec<String> {
    let mut out = vec![CLS.to_string()];
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 {
            out.push(SEP.to_string());
        }
        out.extend(
            normalize(seg, &NormPolicy::PEDANTS)
                .split_whitespace()
                .map(str::to_string),
        );
    }
    out
}

pub fn pair_tokens(question: &str, reference: &str) -> Vec<String> {
    segment_tokens(&[question, reference])
}

pub fn triple_tokens(question: &str, reference: &str, candidate: &str) -> Vec<String> {
    segment_tokens(&[question, reference, candidate])
}

pub fn encode_pair(question: &str, reference: &str, model: &TfidfModel) -> SparseVector {
    model.transform_tokens(&pair_tokens(question, reference))
}

pub fn encode_triple(
    question: &str,
    reference: &str,
    candidate: &str,
    model: &TfidfModel,
) -> SparseVector {
    model.transform_tokens(&triple_tokens(question, reference, candidate))
}

#[derive(Serialize, Deserialize)]
struct TfidfWire {
    version: u32,
    config: TfidfConfig,
    doc_count: usize,
    vocab: Vec<String>,
    idf: Vec<f64>,
}

impl Serialize for TfidfModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TfidfWire {
            version: TFIDF_FORMAT_VERSION,
            config: self.config,
            doc_count: self.doc_count,
            vocab: self.vocab.clone(),
            idf: self.idf.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TfidfModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let wire = TfidfWire::deserialize(deserializer)?;
        if wire.version != TFIDF_FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported tf-idf version {}",
                wire.version
            )));
        }
        if wire.vocab.len() != wire.idf.len() {
            return Err(D::Error::custom("vocab and idf lengths differ"));
        }
        if wire.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(D::Error::custom("vocabulary is not strictly sorted"));
        }
        if wire.idf.iter().any(|w| !w.is_finite()) {
            return Err(D::Error::custom("non-finite idf weight"));
        }
        Ok(TfidfModel::from_parts(
            wire.config,
            wire.doc_count,
            wire.vocab,
            wire.idf,
        ))
    }
}
