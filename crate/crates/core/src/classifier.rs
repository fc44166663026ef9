//! Training, epoch selection and prediction for a single LSTM classifier.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assemble_input, ClassifierInput, FeatureCombination, TendencyProfile};
use crate::label::{ClassDistribution, ClassLabel, NUM_CLASSES};
use crate::nn::{
    cross_entropy, AdamConfig, AdamState, CellActivation, FeatureMode, Network, NetworkSpec,
};
use crate::pipeline::{Example, TextSettings};
use crate::seed;
use crate::text::{tokenize_with, vectorize, IndexVector, TokenizerConfig, Vocabulary};

/// Examples per gradient-accumulation chunk. Fixed so the reduction order,
/// and hence every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub stratified_validation: bool,
    pub vocab_size: usize,
    pub max_len: usize,
    pub lowercase: bool,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub activation: CellActivation,
    pub feature_mode: FeatureMode,
    pub masking: bool,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Optional global gradient-norm clip.
    pub clip_norm: Option<f64>,
    /// Relative slack on the running-minimum validation loss when picking
    /// the epoch to keep.
    pub loss_slack: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            max_epochs: 100,
            batch_size: 500,
            validation_fraction: 0.15,
            stratified_validation: true,
            vocab_size: crate::text::DEFAULT_VOCAB_SIZE,
            max_len: crate::text::DEFAULT_MAX_LEN,
            lowercase: true,
            hidden: 200,
            embedding_dim: 16,
            activation: CellActivation::Sigmoid,
            feature_mode: FeatureMode::Dense,
            masking: true,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            clip_norm: None,
            loss_slack: 0.01,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_epochs", self.max_epochs),
            ("batch_size", self.batch_size),
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("hidden", self.hidden),
            ("embedding_dim", self.embedding_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) || self.loss_slack < 0.0 {
            return Err(Error::Config(
                "learning_rate must be positive and loss_slack non-negative".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn text_settings(&self) -> TextSettings {
        TextSettings {
            vocab_size: self.vocab_size,
            max_len: self.max_len,
            tokenizer: TokenizerConfig {
                lowercase: self.lowercase,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// A trained network together with everything needed to encode raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub combination: FeatureCombination,
    pub network: Network,
    pub vocab: Vocabulary,
    pub tokenizer: TokenizerConfig,
    /// Class priors of the training data, used for authors without history.
    pub priors: TendencyProfile,
    pub seed: u64,
    pub selected_epoch: usize,
}

impl TrainedModel {
    pub fn max_len(&self) -> usize {
        self.network.spec.seq_len
    }

    pub fn input_dimension(&self) -> usize {
        self.combination.input_dimension(self.max_len())
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.network.spec.feature_mode
    }

    pub fn vocab_hash(&self) -> String {
        self.vocab.content_hash()
    }

    pub fn encode(&self, text: &str) -> IndexVector {
        vectorize(
            &tokenize_with(text, &self.tokenizer),
            &self.vocab,
            self.max_len(),
        )
    }

    pub fn input_for(&self, text: &str, profile: &TendencyProfile) -> ClassifierInput {
        assemble_input(self.encode(text), profile, self.combination)
    }

    pub fn predict(&self, input: &ClassifierInput) -> Result<ClassDistribution> {
        if input.combination != self.combination {
            return Err(Error::InvalidArgument(format!(
                "model expects {} inputs, got {}",
                self.combination, input.combination
            )));
        }
        self.network
            .predict(input.indices.as_slice(), &input.features)
    }

    pub fn predict_text(&self, text: &str, profile: &TendencyProfile) -> Result<ClassDistribution> {
        self.predict(&self.input_for(text, profile))
    }

    pub fn predict_examples(&self, examples: &[Example]) -> Result<Vec<ClassDistribution>> {
        examples
            .iter()
            .map(|e| {
                self.predict(&assemble_input(
                    e.indices.clone(),
                    &e.profile,
                    self.combination,
                ))
            })
            .collect()
    }

    /// Refuses a model built with a different feature mode than the caller's pipeline.
    pub fn ensure_feature_mode(&self, expected: FeatureMode) -> Result<()> {
        if self.feature_mode() != expected {
            return Err(Error::ModelFormat(format!(
                "model uses feature mode {} but the pipeline expects {}",
                self.feature_mode().name(),
                expected.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn selected(&self) -> &EpochRecord {
        &self.history[self.model.selected_epoch - 1]
    }
}

/// Seeded split of `labels` into (train, validation) positions. Stratified
/// splits take the fraction from every class separately.
pub fn validation_split(
    labels: &[ClassLabel],
    fraction: f64,
    stratified: bool,
    rng: &mut seed::Rng,
) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let groups: Vec<Vec<usize>> = if stratified {
        ClassLabel::ALL
            .iter()
            .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut train = Vec::with_capacity(n);
    let mut val = Vec::new();
    for mut g in groups {
        g.shuffle(rng);
        let k = (g.len() as f64 * fraction).round() as usize;
        let k = k.min(g.len().saturating_sub(1));
        val.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    if val.is_empty() && train.len() >= 2 {
        val.push(train.pop().expect("non-empty"));
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct Encoded {
    tokens: Vec<u32>,
    features: Vec<f64>,
    label: ClassLabel,
}

fn encode_all(examples: &[Example], combination: FeatureCombination) -> Vec<Encoded> {
    examples
        .iter()
        .map(|e| {
            let input = assemble_input(e.indices.clone(), &e.profile, combination);
            Encoded {
                tokens: input.indices.0,
                features: input.features,
                label: e.label,
            }
        })
        .collect()
}

fn evaluate(net: &Network, data: &[Encoded], which: &[usize]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &i in which {
        let e = &data[i];
        let dist = net.predict(&e.tokens, &e.features)?;
        loss += cross_entropy(&dist, e.label);
        correct += usize::from(dist.argmax().0 == e.label);
    }
    let n = which.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Loss sum, correct count and summed gradient over one mini-batch.
fn batch_gradient(
    net: &Network,
    data: &[Encoded],
    batch: &[usize],
) -> Result<(f64, usize, Network)> {
    let partials: Vec<Result<(f64, usize, Network)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = net.zeros_like();
            let mut loss = 0.0;
            let mut correct = 0;
            for &i in chunk {
                let e = &data[i];
                let (l, dist) = net.loss_and_grad(&e.tokens, &e.features, e.label, &mut g)?;
                loss += l;
                correct += usize::from(dist.argmax().0 == e.label);
            }
            Ok((loss, correct, g))
        })
        .collect();
    let mut iter = partials.into_iter();
    let (mut loss, mut correct, mut grads) = iter.next().expect("non-empty batch")?;
    for p in iter {
        let (l, c, g) = p?;
        loss += l;
        correct += c;
        grads.add_assign(&g);
    }
    Ok((loss, correct, grads))
}

/// Snapshots that can still end up selected: each is within the loss slack
/// of the running minimum, and none is beaten on both loss and accuracy by
/// an earlier one.
struct EpochSelector {
    slack: f64,
    best_loss: f64,
    candidates: Vec<(EpochRecord, Network)>,
}

impl EpochSelector {
    fn new(slack: f64) -> Self {
        EpochSelector {
            slack,
            best_loss: f64::INFINITY,
            candidates: Vec::new(),
        }
    }

    fn bound(&self) -> f64 {
        self.best_loss * (1.0 + self.slack)
    }

    fn observe(&mut self, record: EpochRecord, net: &Network) {
        self.best_loss = self.best_loss.min(record.val_loss);
        let bound = self.bound();
        self.candidates.retain(|(r, _)| r.val_loss <= bound);
        if record.val_loss > bound {
            return;
        }
        let dominated = self
            .candidates
            .iter()
            .any(|(r, _)| r.val_accuracy >= record.val_accuracy && r.val_loss <= record.val_loss);
        if dominated {
            return;
        }
        self.candidates.retain(|(r, _)| {
            !(record.val_accuracy > r.val_accuracy && record.val_loss <= r.val_loss)
        });
        self.candidates.push((record, net.clone()));
    }

    fn finish(self) -> Option<(EpochRecord, Network)> {
        let mut best: Option<(EpochRecord, Network)> = None;
        for (r, n) in self.candidates {
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    r.val_accuracy > b.val_accuracy
                        || (r.val_accuracy == b.val_accuracy && r.epoch < b.epoch)
                }
            };
            if better {
                best = Some((r, n));
            }
        }
        best
    }
}

/// Picks the epoch a run keeps: the highest validation accuracy among epochs
/// whose validation loss is within `slack` of the lowest loss of the run;
/// ties go to the earliest epoch.
pub fn select_epoch(history: &[EpochRecord], slack: f64) -> Option<usize> {
    let min = history
        .iter()
        .map(|r| r.val_loss)
        .fold(f64::INFINITY, f64::min);
    let bound = min * (1.0 + slack);
    let mut best: Option<&EpochRecord> = None;
    for r in history.iter().filter(|r| r.val_loss <= bound) {
        if best.map_or(true, |b| r.val_accuracy > b.val_accuracy) {
            best = Some(r);
        }
    }
    best.map(|r| r.epoch)
}

/// Trains one classifier on `examples`, which must have been encoded with
/// `vocab` and carry tendency profiles computed from the same partition.
pub fn train(
    examples: &[Example],
    vocab: &Vocabulary,
    priors: TendencyProfile,
    combination: FeatureCombination,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 training examples, got {}",
            examples.len()
        )));
    }
    if let Some(e) = examples.iter().find(|e| e.indices.len() != cfg.max_len) {
        return Err(Error::Shape(format!(
            "example for tweet {} has {} indices, config max_len is {}",
            e.tweet,
            e.indices.len(),
            cfg.max_len
        )));
    }

    let data = encode_all(examples, combination);
    let labels: Vec<ClassLabel> = data.iter().map(|e| e.label).collect();
    let mut split_rng = seed::stream(cfg.seed, "val-split", &[]);
    let (train_idx, val_idx) = validation_split(
        &labels,
        cfg.validation_fraction,
        cfg.stratified_validation,
        &mut split_rng,
    );

    let spec = NetworkSpec {
        token_rows: vocab.index_space(),
        embedding_dim: cfg.embedding_dim,
        hidden: cfg.hidden,
        seq_len: cfg.max_len,
        n_features: combination.feature_count(),
        activation: cfg.activation,
        feature_mode: cfg.feature_mode,
        masking: cfg.masking,
    };
    let mut init_rng = seed::stream(cfg.seed, "init", &[]);
    let mut net = Network::init(spec, &mut init_rng)?;
    let mut adam = AdamState::new(cfg.adam(), &net);
    let mut shuffle_rng = seed::stream(cfg.seed, "shuffle", &[]);

    let mut order = train_idx.clone();
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut selector = EpochSelector::new(cfg.loss_slack);
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, ok, mut grads) = batch_gradient(&net, &data, batch)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss in epoch {epoch}, batch {b} ({combination}, seed {})",
                    cfg.seed
                )));
            }
            loss_sum += loss;
            correct += ok;
            grads.scale(1.0 / batch.len() as f64);
            if let Some(max) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            adam.apply(&mut net, &grads);
        }
        let (val_loss, val_accuracy) = evaluate(&net, &data, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite validation loss in epoch {epoch}"
            )));
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            train_accuracy: correct as f64 / train_idx.len() as f64,
            val_loss,
            val_accuracy,
        };
        log::info!(
            "[{combination} seed={}] epoch {epoch:>3} train_loss {:.4} train_acc {:.4} val_loss {:.4} val_acc {:.4}",
            cfg.seed,
            record.train_loss,
            record.train_accuracy,
            record.val_loss,
            record.val_accuracy
        );
        selector.observe(record, &net);
        history.push(record);
    }

    let (chosen, network) = selector.finish().expect("at least one epoch is eligible");
    debug_assert_eq!(Some(chosen.epoch), select_epoch(&history, cfg.loss_slack));
    Ok(TrainOutcome {
        model: TrainedModel {
            combination,
            network,
            vocab: vocab.clone(),
            tokenizer: cfg.text_settings().tokenizer,
            priors,
            seed: cfg.seed,
            selected_epoch: chosen.epoch,
        },
        history,
    })
}

/// Fraction of `examples` whose argmax prediction matches the label.
pub fn accuracy(model: &TrainedModel, examples: &[Example]) -> Result<f64> {
    let preds = model.predict_examples(examples)?;
    let ok = preds
        .iter()
        .zip(examples)
        .filter(|(p, e)| p.argmax().0 == e.label)
        .count();
    Ok(ok as f64 / examples.len().max(1) as f64)
}

pub fn history_tsv(history: &[EpochRecord], selected: usize) -> String {
    use std::fmt::Write as _;
    let mut s =
        String::from("epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tselected\n");
    for r in history {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_loss,
            r.val_accuracy,
            u8::from(r.epoch == selected)
        );
    }
    s
}

/// Per-class counts of a label slice, handy for diagnostics.
pub fn label_counts(labels: &[ClassLabel]) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for l in labels {
        c[l.index()] += 1;
    }
    c
}
