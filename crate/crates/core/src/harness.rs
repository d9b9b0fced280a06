//! Comparing automatic verdicts against human labels: agreement accuracy,
//! Macro F1, threshold sweeps and pairwise model-ranking accuracy.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{PedantsError, Result};
use crate::metrics::Threshold;
use crate::pipeline::QAExample;

/// An example with its human label and the verdict of each metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedRecord {
    #[serde(flatten)]
    pub example: QAExample,
    pub metric_verdicts: BTreeMap<String, bool>,
}

impl JudgedRecord {
    pub fn human_label(&self) -> Option<bool> {
        self.example.human_label
    }
}

/// 2x2 confusion counts with "correct" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

fn f1_from_counts(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

impl Confusion {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (human, verdict) in pairs {
            c.add(human, verdict);
        }
        c
    }

    pub fn add(&mut self, human: bool, verdict: bool) {
        match (human, verdict) {
            (true, true) => self.true_pos += 1,
            (false, true) => self.false_pos += 1,
            (false, false) => self.true_neg += 1,
            (true, false) => self.false_neg += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.true_neg += other.true_neg;
        self.false_neg += other.false_neg;
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(PedantsError::EmptyRecords),
            n => Ok((self.true_pos + self.true_neg) as f64 / n as f64),
        }
    }

    /// Unweighted mean of the F1 of the "correct" and "incorrect" classes.
    /// A class that never occurs in labels or verdicts contributes 0.
    pub fn macro_f1(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(PedantsError::EmptyRecords);
        }
        let pos = f1_from_counts(self.true_pos, self.false_pos, self.false_neg);
        let neg = f1_from_counts(self.true_neg, self.false_neg, self.false_pos);
        Ok((pos + neg) / 2.0)
    }
}

fn confusion_for(records: &[JudgedRecord], metric: &str) -> Result<Confusion> {
    if records.is_empty() {
        return Err(PedantsError::EmptyRecords);
    }
    let mut c = Confusion::default();
    for r in records {
        let human = r.human_label().ok_or_else(|| PedantsError::MissingRate {
            model: r.example.model_id.clone().unwrap_or_default(),
            source_name: "human".into(),
        })?;
        let verdict = *r
            .metric_verdicts
            .get(metric)
            .ok_or_else(|| PedantsError::MissingRate {
                model: r.example.model_id.clone().unwrap_or_default(),
                source_name: metric.to_string(),
            })?;
        c.add(human, verdict);
    }
    Ok(c)
}

pub fn agreement_accuracy(records: &[JudgedRecord], metric: &str) -> Result<f64> {
    confusion_for(records, metric)?.accuracy()
}

pub fn macro_f1(records: &[JudgedRecord], metric: &str) -> Result<f64> {
    confusion_for(records, metric)?.macro_f1()
}

/// Per-model correctness rates from humans and from each metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingInput {
    pub human: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, BTreeMap<String, f64>>,
}

impl RankingInput {
    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.human.keys().map(String::as_str)
    }

    /// Builds rates from records carrying a model id and a human label;
    /// other records are ignored.
    pub fn from_records(records: &[JudgedRecord]) -> Self {
        let mut tally = RateTally::default();
        for r in records {
            if let (Some(model), Some(label)) = (&r.example.model_id, r.human_label()) {
                tally.add(model, label, &r.metric_verdicts);
            }
        }
        tally.finish()
    }

    fn validated_rates(&self, metric: &str) -> Result<Vec<(f64, f64)>> {
        let n = self.human.len();
        if n < 2 {
            return Err(PedantsError::TooFewModels(n));
        }
        let metric_rates = self
            .metrics
            .get(metric)
            .ok_or_else(|| PedantsError::MissingRate {
                model: String::new(),
                source_name: metric.to_string(),
            })?;
        let check = |model: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(PedantsError::RateOutOfRange {
                    model: model.to_string(),
                    value: v,
                })
            }
        };
        self.human
            .iter()
            .map(|(model, &h)| {
                let m = *metric_rates
                    .get(model)
                    .ok_or_else(|| PedantsError::MissingRate {
                        model: model.clone(),
                        source_name: metric.to_string(),
                    })?;
                Ok((check(model, h)?, check(model, m)?))
            })
            .collect()
    }
}

/// Streaming per-model counts of human and metric "correct" verdicts.
#[derive(Debug, Clone, Default)]
pub struct RateTally {
    models: BTreeMap<String, ModelTally>,
    metric_names: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
struct ModelTally {
    n: u64,
    human: u64,
    metrics: BTreeMap<String, u64>,
}

impl RateTally {
    pub fn add(&mut self, model: &str, human: bool, verdicts: &BTreeMap<String, bool>) {
        let t = self.models.entry(model.to_string()).or_default();
        t.n += 1;
        t.human += u64::from(human);
        for (m, v) in verdicts {
            *t.metrics.entry(m.clone()).or_insert(0) += u64::from(*v);
            if !self.metric_names.contains(m) {
                self.metric_names.insert(m.clone());
            }
        }
    }

    pub fn finish(self) -> RankingInput {
        let mut input = RankingInput::default();
        for (model, t) in self.models {
            let n = t.n as f64;
            input.human.insert(model.clone(), t.human as f64 / n);
            for m in &self.metric_names {
                let k = t.metrics.get(m).copied().unwrap_or(0);
                input
                    .metrics
                    .entry(m.clone())
                    .or_default()
                    .insert(model.clone(), k as f64 / n);
            }
        }
        input
    }
}

fn order(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Fraction of the N(N-1)/2 model pairs whose order (greater, less or tied)
/// under the metric equals their order under humans.
pub fn pairwise_ranking_accuracy(input: &RankingInput, metric: &str) -> Result<f64> {
    let rates = input.validated_rates(metric)?;
    let n = rates.len();
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let human = order(rates[i].0, rates[j].0);
            let auto = order(rates[i].1, rates[j].1);
            agree += u64::from(human == auto);
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(agree as f64 / pairs)
}

/// Models sorted by descending rate, ties by id.
pub fn rank_models(rates: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = rates.iter().map(|(k, v)| (k.clone(), *v)).collect();
    v.sort_by(|a, b| order(b.1, a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Applies the at-least threshold rule to each `(f1, human_label)` pair for
/// every threshold.
pub fn threshold_sweep(records: &[(f64, bool)], thresholds: &[f64]) -> Result<Vec<SweepRow>> {
    if records.is_empty() {
        return Err(PedantsError::EmptyRecords);
    }
    if thresholds.is_empty() {
        return Err(PedantsError::EmptyThresholds);
    }
    thresholds
        .iter()
        .map(|&t| {
            let th = Threshold::new(t)?;
            let c = Confusion::from_pairs(records.iter().map(|&(f1, h)| (h, th.accepts(f1))));
            Ok(SweepRow {
                threshold: t,
                accuracy: c.accuracy()?,
                macro_f1: c.macro_f1()?,
            })
        })
        .collect()
}

pub const DEFAULT_LIKERT_CUTOFF: i64 = 4;

/// A 1-5 rating counts as correct when it reaches `cutoff`.
pub fn likert_to_binary(score: i64, cutoff: i64) -> Result<bool> {
    if !(1..=5).contains(&score) {
        return Err(PedantsError::OutOfRangeScore { score });
    }
    Ok(score >= cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(labels: &[bool], verdicts: &[bool]) -> Vec<JudgedRecord> {
        labels
            .iter()
            .zip(verdicts)
            .map(|(&l, &v)| JudgedRecord {
                example: QAExample::new("q", &["a"], "c").with_label(l),
                metric_verdicts: BTreeMap::from([("m".to_string(), v)]),
            })
            .collect()
    }

    #[test]
    fn perfect_and_inverted() {
        let labels = [true, false, true, false, true];
        let inv: Vec<bool> = labels.iter().map(|b| !b).collect();
        let r = records(&labels, &labels);
        assert_eq!(agreement_accuracy(&r, "m").unwrap(), 1.0);
        assert_eq!(macro_f1(&r, "m").unwrap(), 1.0);
        let r = records(&labels, &inv);
        assert_eq!(agreement_accuracy(&r, "m").unwrap(), 0.0);
        assert_eq!(macro_f1(&r, "m").unwrap(), 0.0);
    }

    #[test]
    fn four_record_confusion_oracle() {
        // labels [1,1,0,0], verdicts [1,0,0,0]:
        // TP=1 FN=1 TN=2 FP=0.
        // F1(correct) = 2*1/(2+0+1) = 2/3; F1(incorrect) = 2*2/(4+1+0) = 4/5.
        let r = records(&[true, true, false, false], &[true, false, false, false]);
        assert_eq!(agreement_accuracy(&r, "m").unwrap(), 0.75);
        let expected = (2.0 / 3.0 + 4.0 / 5.0) / 2.0;
        assert!((macro_f1(&r, "m").unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn absent_class_contributes_zero() {
        let r = records(&[true, true], &[true, true]);
        assert_eq!(macro_f1(&r, "m").unwrap(), 0.5);
    }

    #[test]
    fn empty_and_missing() {
        assert!(matches!(
            agreement_accuracy(&[], "m"),
            Err(PedantsError::EmptyRecords)
        ));
        let r = records(&[true], &[true]);
        assert!(agreement_accuracy(&r, "other").is_err());
    }

    fn ranking(human: &[f64], metric: &[f64]) -> RankingInput {
        let names: Vec<String> = (0..human.len()).map(|i| format!("m{i}")).collect();
        RankingInput {
            human: names.iter().cloned().zip(human.iter().copied()).collect(),
            metrics: BTreeMap::from([(
                "x".to_string(),
                names.iter().cloned().zip(metric.iter().copied()).collect(),
            )]),
        }
    }

    #[test]
    fn pairwise_examples() {
        let r = ranking(&[0.9, 0.5, 0.1], &[0.9, 0.5, 0.1]);
        assert_eq!(pairwise_ranking_accuracy(&r, "x").unwrap(), 1.0);
        let r = ranking(&[0.9, 0.5], &[0.4, 0.6]);
        assert_eq!(pairwise_ranking_accuracy(&r, "x").unwrap(), 0.0);
        // Enumerated: (1,2) 0.9>0.5 vs 0.8>0.6 agree; (1,3) 0.9>0.1 vs
        // 0.8>0.7 agree; (2,3) 0.5>0.1 vs 0.6<0.7 disagree.
        let r = ranking(&[0.9, 0.5, 0.1], &[0.8, 0.6, 0.7]);
        assert_eq!(pairwise_ranking_accuracy(&r, "x").unwrap(), 2.0 / 3.0);
        // Ties agree only with ties.
        let r = ranking(&[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(pairwise_ranking_accuracy(&r, "x").unwrap(), 1.0);
        let r = ranking(&[0.5, 0.5], &[0.5, 0.6]);
        assert_eq!(pairwise_ranking_accuracy(&r, "x").unwrap(), 0.0);
    }

    #[test]
    fn pairwise_errors() {
        let r = ranking(&[0.5], &[0.5]);
        assert!(matches!(
            pairwise_ranking_accuracy(&r, "x"),
            Err(PedantsError::TooFewModels(1))
        ));
        let r = ranking(&[0.5, 1.5], &[0.5, 0.1]);
        assert!(matches!(
            pairwise_ranking_accuracy(&r, "x"),
            Err(PedantsError::RateOutOfRange { .. })
        ));
        let r = ranking(&[0.5, 0.4], &[0.5, 0.1]);
        assert!(pairwise_ranking_accuracy(&r, "nope").is_err());
    }

    #[test]
    fn rates_from_records() {
        let mut rs = Vec::new();
        for (model, label, verdict) in [("a", true, true), ("a", false, true), ("b", true, false)] {
            let mut ex = QAExample::new("q", &["r"], "c").with_label(label);
            ex.model_id = Some(model.into());
            rs.push(JudgedRecord {
                example: ex,
                metric_verdicts: BTreeMap::from([("em".to_string(), verdict)]),
            });
        }
        let input = RankingInput::from_records(&rs);
        assert_eq!(input.human["a"], 0.5);
        assert_eq!(input.human["b"], 1.0);
        assert_eq!(input.metrics["em"]["a"], 1.0);
        assert_eq!(input.metrics["em"]["b"], 0.0);
        assert_eq!(pairwise_ranking_accuracy(&input, "em").unwrap(), 0.0);
        assert_eq!(rank_models(&input.human)[0].0, "b");
    }

    #[test]
    fn sweep_toy_enumeration() {
        // F1s 0.4, 0.5, 0.2 with labels 1, 1, 0.
        // theta 0.3: verdicts 1,1,0 -> all agree: acc 1, macro F1 1.
        // theta 0.5: verdicts 0,1,0 -> TP 1 FN 1 TN 1: acc 2/3,
        //   F1+ = 2/3, F1- = 2/3, macro 2/3.
        let recs = [(0.4, true), (0.5, true), (0.2, false)];
        let rows = threshold_sweep(&recs, &[0.3, 0.5]).unwrap();
        assert_eq!(rows[0].accuracy, 1.0);
        assert_eq!(rows[0].macro_f1, 1.0);
        assert!((rows[1].accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((rows[1].macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_extremes() {
        let recs = [(0.0, false), (0.3, true), (1.0, true)];
        let rows = threshold_sweep(&recs, &[0.0, 1.0]).unwrap();
        // theta 0: everything judged correct.
        assert!((rows[0].accuracy - 2.0 / 3.0).abs() < 1e-12);
        // theta 1: only F1 = 1 correct.
        assert!((rows[1].accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!(threshold_sweep(&recs, &[1.5]).is_err());
        assert!(threshold_sweep(&recs, &[]).is_err());
        assert!(threshold_sweep(&[], &[0.5]).is_err());
    }

    #[test]
    fn likert() {
        assert!(likert_to_binary(4, DEFAULT_LIKERT_CUTOFF).unwrap());
        assert!(!likert_to_binary(3, DEFAULT_LIKERT_CUTOFF).unwrap());
        assert!(likert_to_binary(5, DEFAULT_LIKERT_CUTOFF).unwrap());
        assert!(matches!(
            likert_to_binary(0, 4),
            Err(PedantsError::OutOfRangeScore { score: 0 })
        ));
        assert!(likert_to_binary(6, 4).is_err());
    }
}
