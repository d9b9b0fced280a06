//! Multinomial logistic regression trained with seeded, epoch-ordered SGD.
//!
//! The objective is the mean log loss plus `l2_penalty / 2 * ||W||^2` (the
//! bias is not penalized). Each epoch visits every example once in an order
//! drawn from a ChaCha8 stream seeded by `TrainConfig::seed`, so the data and
//! the config fully determine the trained weights.
//!
//! Binary models use the same parameterization with two rows; the softmax of
//! two logits is the logistic sigmoid of their difference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PedantsError, Result};
use crate::vectorizer::SparseVector;

/// Logits are clamped to this magnitude before exponentiation.
pub const LOGIT_CLAMP: f64 = 30.0;

const MIN_WEIGHT_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    /// `eta0` for every epoch.
    Constant { eta0: f64 },
    /// `eta0 / epoch^power`, epochs counted from 1.
    InvScaling { eta0: f64, power: f64 },
}

impl LearningRate {
    pub fn at_epoch(&self, epoch: usize) -> f64 {
        match *self {
            LearningRate::Constant { eta0 } => eta0,
            LearningRate::InvScaling { eta0, power } => eta0 / (epoch as f64).powf(power),
        }
    }

    fn initial(&self) -> f64 {
        match *self {
            LearningRate::Constant { eta0 } | LearningRate::InvScaling { eta0, .. } => eta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub l2_penalty: f64,
    /// Minimum per-epoch decrease of the training objective that counts as
    /// progress.
    pub tolerance: f64,
    /// Training stops after this many consecutive epochs without progress.
    pub n_iter_no_change: usize,
    pub max_epochs: usize,
    pub learning_rate: LearningRate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 668,
            l2_penalty: 1e-4,
            tolerance: 1e-3,
            n_iter_no_change: 5,
            max_epochs: 1000,
            learning_rate: LearningRate::InvScaling {
                eta0: 0.5,
                power: 0.5,
            },
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            seed,
            ..Self::default()
        }
    }

    // Comparisons are negated so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PedantsError::InvalidConfig(msg.to_string()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.n_iter_no_change == 0 {
            return bad("n_iter_no_change must be at least 1");
        }
        if !(self.l2_penalty >= 0.0) || !self.l2_penalty.is_finite() {
            return bad("l2_penalty must be finite and non-negative");
        }
        let eta0 = self.learning_rate.initial();
        if !(eta0 > 0.0) || !eta0.is_finite() {
            return bad("learning rate must be positive");
        }
        if let LearningRate::InvScaling { power, .. } = self.learning_rate {
            if !(power >= 0.0) {
                return bad("inverse-scaling power must be non-negative");
            }
        }
        if eta0 * self.l2_penalty >= 1.0 {
            return bad("learning_rate * l2_penalty must be below 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    classes: usize,
    dim: usize,
    /// Row-major `classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    config: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl LinearModel {
    pub fn new(
        classes: usize,
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        config: TrainConfig,
    ) -> Result<Self> {
        let model = LinearModel {
            classes,
            dim,
            weights,
            bias,
            config,
        };
        model.check()?;
        Ok(model)
    }

    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearModel {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
            config: TrainConfig::default(),
        }
    }

    /// Structural validation, used after deserialization.
    pub fn check(&self) -> Result<()> {
        let corrupt = |m: String| Err(PedantsError::CorruptModel(m));
        if self.classes < 2 {
            return corrupt(format!("{} classes", self.classes));
        }
        if self.weights.len() != self.classes * self.dim {
            return corrupt(format!(
                "weights length {} != {} x {}",
                self.weights.len(),
                self.classes,
                self.dim
            ));
        }
        if self.bias.len() != self.classes {
            return corrupt(format!("bias length {}", self.bias.len()));
        }
        if self
            .weights
            .iter()
            .chain(&self.bias)
            .any(|w| !w.is_finite())
        {
            return corrupt("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    fn check_dim(&self, x: &SparseVector) -> Result<()> {
        if x.dimension() != self.dim {
            return Err(PedantsError::DimensionMismatch {
                expected: self.dim,
                found: x.dimension(),
            });
        }
        Ok(())
    }

    /// Affine scores `W x + b`.
    pub fn decision_scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.classes)
            .map(|c| x.dot_dense(self.row(c)) + self.bias[c])
            .collect())
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        let mut scores = self.decision_scores(x)?;
        softmax_in_place(&mut scores);
        Ok(scores)
    }

    /// Argmax of `predict_proba`; ties resolve to the lowest class index.
    pub fn predict(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Clamped, max-shifted softmax.
pub fn softmax_in_place(logits: &mut [f64]) {
    for z in logits.iter_mut() {
        *z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Parameters during training: `W = scale * raw`, so the L2 shrink step is a
/// single multiplication.
struct Params {
    dim: usize,
    raw: Vec<f64>,
    scale: f64,
    bias: Vec<f64>,
}

impl Params {
    fn new(classes: usize, dim: usize) -> Self {
        Params {
            dim,
            raw: vec![0.0; classes * dim],
            scale: 1.0,
            bias: vec![0.0; classes],
        }
    }

    fn logits(&self, x: &SparseVector, out: &mut [f64]) {
        for (c, z) in out.iter_mut().enumerate() {
            let row = &self.raw[c * self.dim..(c + 1) * self.dim];
            *z = self.scale * x.dot_dense(row) + self.bias[c];
        }
    }

    fn fold_scale(&mut self) {
        if self.scale != 1.0 {
            for w in &mut self.raw {
                *w *= self.scale;
            }
            self.scale = 1.0;
        }
    }

    fn weight_sq_norm(&self) -> f64 {
        self.scale * self.scale * self.raw.iter().map(|w| w * w).sum::<f64>()
    }

    fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.raw.iter().map(|w| w * self.scale).collect(),
            self.bias.clone(),
        )
    }

    fn step(&mut self, x: &SparseVector, label: usize, eta: f64, l2: f64, probs: &mut [f64]) {
        self.logits(x, probs);
        softmax_in_place(probs);
        if l2 > 0.0 {
            self.scale *= 1.0 - eta * l2;
            if self.scale < MIN_WEIGHT_SCALE {
                self.fold_scale();
            }
        }
        for (c, &p) in probs.iter().enumerate() {
            let residual = p - if c == label { 1.0 } else { 0.0 };
            if residual == 0.0 {
                continue;
            }
            let g = eta * residual;
            let row = &mut self.raw[c * self.dim..(c + 1) * self.dim];
            let raw_step = g / self.scale;
            for &(i, xi) in x.entries() {
                row[i] -= raw_step * xi;
            }
            self.bias[c] -= g;
        }
    }

    fn objective(&self, data: &[(SparseVector, usize)], l2: f64, buf: &mut [f64]) -> f64 {
        let mut loss = 0.0;
        for (x, y) in data {
            self.logits(x, buf);
            softmax_in_place(buf);
            loss -= buf[*y].max(f64::MIN_POSITIVE).ln();
        }
        loss / data.len() as f64 + 0.5 * l2 * self.weight_sq_norm()
    }
}

/// Mean log loss plus the L2 term, evaluated for an arbitrary model.
pub fn training_objective(model: &LinearModel, data: &[(SparseVector, usize)], l2: f64) -> f64 {
    let mut loss = 0.0;
    for (x, y) in data {
        let p = model.predict_proba(x).expect("dimension checked by caller");
        loss -= p[*y].max(f64::MIN_POSITIVE).ln();
    }
    let sq: f64 = model.weights.iter().map(|w| w * w).sum();
    loss / data.len() as f64 + 0.5 * l2 * sq
}

pub fn train(
    examples: &[(SparseVector, usize)],
    classes: usize,
    config: &TrainConfig,
) -> Result<LinearModel> {
    train_with_report(examples, classes, config).map(|(m, _)| m)
}

pub fn train_with_report(
    examples: &[(SparseVector, usize)],
    classes: usize,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainReport)> {
    config.validate()?;
    if classes < 2 {
        return Err(PedantsError::InvalidConfig(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let first = examples.first().ok_or(PedantsError::SingleClassCorpus)?;
    let dim = first.0.dimension();
    let mut seen = vec![false; classes];
    for (x, y) in examples {
        if x.dimension() != dim {
            return Err(PedantsError::InconsistentDimensions {
                expected: dim,
                found: x.dimension(),
            });
        }
        if *y >= classes {
            return Err(PedantsError::LabelOutOfRange { label: *y, classes });
        }
        seen[*y] = true;
    }
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(PedantsError::SingleClassCorpus);
    }

    let l2 = config.l2_penalty;
    let mut params = Params::new(classes, dim);
    let mut probs = vec![0.0; classes];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let initial_loss = params.objective(examples, l2, &mut probs);
    let mut best_loss = initial_loss;
    let mut best = params.snapshot();
    let mut stale = 0;
    let mut epochs = 0;

    for epoch in 1..=config.max_epochs {
        epochs = epoch;
        let eta = config.learning_rate.at_epoch(epoch);
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &examples[i];
            params.step(x, *y, eta, l2, &mut probs);
        }
        let loss = params.objective(examples, l2, &mut probs);
        if loss > best_loss - config.tolerance {
            stale += 1;
        } else {
            stale = 0;
        }
        if loss < best_loss {
            best_loss = loss;
            best = params.snapshot();
        }
        if stale >= config.n_iter_no_change {
            break;
        }
    }

    let (weights, bias) = best;
    let model = LinearModel {
        classes,
        dim,
        weights,
        bias,
        config: *config,
    };
    Ok((
        model,
        TrainReport {
            epochs,
            initial_loss,
            final_loss: best_loss,
        },
    ))
}
