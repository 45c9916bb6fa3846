use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_batches, TrainConfig};
use crate::classifiers::{prediction_from_logits, svm_score, ModelSpec, SvmWeights, EMBEDDING};
use crate::corpus::HelpfulnessLabel;
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, ParamSet};
use crate::text::{EncodedSequence, SparseVector, UNK};
use crate::util::derive_seed;

/// Gradients of a batch are accumulated in this many shards, one task each,
/// and summed in shard order. Results do not depend on the thread count.
pub const GRAD_SHARDS: usize = 4;

/// Two-class confusion counts with Helpful as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Counts from the point of view of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: HelpfulnessLabel, predicted: HelpfulnessLabel) {
        use HelpfulnessLabel::{Helpful, Unhelpful};
        match (actual, predicted) {
            (Helpful, Helpful) => self.tp += 1,
            (Unhelpful, Helpful) => self.fp += 1,
            (Unhelpful, Unhelpful) => self.tn += 1,
            (Helpful, Unhelpful) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    /// `(TP + TN) / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.correct() as f64 / self.total() as f64
        }
    }

    /// Accuracy in percentage points, as `100·correct / total`.
    pub fn accuracy_points(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (100 * self.correct()) as f64 / self.total() as f64
        }
    }

    pub fn for_class(&self, class: HelpfulnessLabel) -> ClassCounts {
        match class {
            HelpfulnessLabel::Helpful => ClassCounts { tp: self.tp, fp: self.fp, tn: self.tn, fn_: self.fn_ },
            HelpfulnessLabel::Unhelpful => ClassCounts { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    /// Errors with `EmptySplit(split)` when there is nothing to score.
    pub fn from_pairs<I>(pairs: I, split: &str) -> Result<Self>
    where
        I: IntoIterator<Item = (HelpfulnessLabel, HelpfulnessLabel)>,
    {
        let mut confusion = ConfusionMatrix::default();
        for (actual, predicted) in pairs {
            confusion.record(actual, predicted);
        }
        if confusion.total() == 0 {
            return Err(Error::EmptySplit(split.into()));
        }
        Ok(Evaluation { accuracy: confusion.accuracy(), confusion })
    }
}

fn label_of(seq: &EncodedSequence) -> Result<HelpfulnessLabel> {
    seq.label.ok_or_else(|| Error::MissingField("label".into()))
}

/// Scores a labeled split with a neural model. Empty sequences are scored
/// as a single UNK, as at prediction time.
pub fn evaluate(spec: &ModelSpec, params: &ParamSet<f32>, split: &[EncodedSequence], name: &str) -> Result<Evaluation> {
    let pairs: Vec<(HelpfulnessLabel, HelpfulnessLabel)> = split
        .par_iter()
        .map(|seq| {
            let actual = label_of(seq)?;
            let ids: &[u32] = if seq.ids.is_empty() { &[UNK] } else { &seq.ids };
            let logits: Vec<f64> = spec.logits(params, ids)?.iter().map(|&x| x as f64).collect();
            Ok((actual, prediction_from_logits(&logits).label))
        })
        .collect::<Result<_>>()?;
    Evaluation::from_pairs(pairs, name)
}

pub fn evaluate_svm(weights: &SvmWeights, split: &[(SparseVector, HelpfulnessLabel)], name: &str) -> Result<Evaluation> {
    let pairs = split.iter().map(|(x, y)| {
        let predicted =
            if svm_score(&weights.w, weights.b, x) >= 0.0 { HelpfulnessLabel::Helpful } else { HelpfulnessLabel::Unhelpful };
        (*y, predicted)
    });
    Evaluation::from_pairs(pairs, name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training cross-entropy over the epoch's examples.
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the best validation accuracy (the
    /// initialization when no epoch ran).
    pub best: ParamSet<f32>,
    /// Parameters after the last epoch.
    pub last: ParamSet<f32>,
    /// 1-based; 0 when no epoch ran.
    pub selected_epoch: usize,
    pub initial_validation_accuracy: f64,
    pub curve: Vec<EpochRecord>,
    /// Training examples left out because they encode to no tokens.
    pub skipped_empty: usize,
}

impl TrainOutcome {
    pub fn selected_validation_accuracy(&self) -> f64 {
        self.curve
            .iter()
            .find(|r| r.epoch == self.selected_epoch)
            .map_or(self.initial_validation_accuracy, |r| r.validation_accuracy)
    }
}

/// Mini-batch Adam on mean cross-entropy with validation-based selection.
///
/// Each batch's loss is the mean over its actual members, so a short final
/// batch is weighted by its true size. Ties in validation accuracy go to the
/// earliest epoch.
pub fn train_model(
    spec: &ModelSpec,
    init: ParamSet<f32>,
    cfg: &TrainConfig,
    train: &[EncodedSequence],
    validation: &[EncodedSequence],
) -> Result<TrainOutcome> {
    let examples: Vec<(&[u32], usize)> = train
        .iter()
        .filter(|s| !s.ids.is_empty())
        .map(|s| Ok((s.ids.as_slice(), label_of(s)?.class_index())))
        .collect::<Result<_>>()?;
    let skipped_empty = train.len() - examples.len();
    if examples.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if skipped_empty > 0 {
        log::warn!("skipping {skipped_empty} training examples with no tokens");
    }
    let lengths: Vec<usize> = examples.iter().map(|(ids, _)| ids.len()).collect();

    let mut params = init;
    let initial_validation_accuracy = evaluate(spec, &params, validation, "validation")?.accuracy;
    let adam = AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() };
    let mut opt = AdamState::new(&params, adam);
    let frozen: &[&str] = if cfg.freeze_embeddings { &[EMBEDDING] } else { &[] };
    let mut shards: Vec<ParamSet<f32>> = (0..GRAD_SHARDS).map(|_| params.zeros_like()).collect();

    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut selected_epoch = 0;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0f64;
        for (b, batch) in make_batches(&lengths, cfg.batch_size, cfg.seed, epoch).iter().enumerate() {
            let weight = 1.0 / batch.len() as f32;
            let per_shard = batch.len().div_ceil(GRAD_SHARDS);
            let p = &params;
            let losses: Vec<f64> = shards
                .par_iter_mut()
                .enumerate()
                .map(|(s, g)| {
                    g.set_zero();
                    let lo = (s * per_shard).min(batch.len());
                    let hi = ((s + 1) * per_shard).min(batch.len());
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("dropout/{epoch}/{b}/{s}")));
                    let mut loss = 0f64;
                    for &k in &batch[lo..hi] {
                        let (ids, class) = examples[k];
                        loss += spec.accumulate(p, ids, class, weight, g, &mut rng)? as f64;
                    }
                    Ok(loss)
                })
                .collect::<Result<_>>()?;
            let batch_loss: f64 = losses.iter().sum();
            let (head, rest) = shards.split_at_mut(1);
            for g in rest.iter() {
                head[0].add_scaled(g, 1.0)?;
            }
            if !batch_loss.is_finite() || !head[0].all_finite() {
                return Err(Error::Divergence { epoch, batch: b + 1, loss: batch_loss / batch.len() as f64 });
            }
            opt.step_except(&mut params, &head[0], frozen)?;
            loss_sum += batch_loss;
        }
        if !params.all_finite() {
            return Err(Error::Divergence { epoch, batch: 0, loss: f64::NAN });
        }
        let acc = evaluate(spec, &params, validation, "validation")?.accuracy;
        let train_loss = loss_sum / examples.len() as f64;
        log::info!("epoch {epoch}: train loss {train_loss:.5}, validation accuracy {acc:.4}");
        curve.push(EpochRecord { epoch, train_loss, validation_accuracy: acc });
        if acc > best_acc {
            best_acc = acc;
            best = params.clone();
            selected_epoch = epoch;
        }
    }
    Ok(TrainOutcome { best, last: params, selected_epoch, initial_validation_accuracy, curve, skipped_empty })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::classifiers::{LinearNgram, Rcnn};
    use crate::train::Task;
    use HelpfulnessLabel::{Helpful, Unhelpful};

    #[test]
    fn accuracy_and_per_class_counts() {
        let pairs = [(Helpful, Helpful), (Helpful, Unhelpful), (Unhelpful, Unhelpful), (Unhelpful, Unhelpful)];
        let e = Evaluation::from_pairs(pairs, "test").unwrap();
        assert_eq!(e.confusion, ConfusionMatrix { tp: 1, fp: 0, tn: 2, fn_: 1 });
        assert_eq!(e.accuracy, 0.75);
        assert_eq!(e.confusion.accuracy_points(), 75.0);
        let u = e.confusion.for_class(Unhelpful);
        assert_eq!((u.tp, u.fp, u.tn, u.fn_), (2, 1, 1, 0));
        let json = serde_json::to_value(e.confusion).unwrap();
        assert_eq!(json["fn"], 1);
    }

    #[test]
    fn perfect_and_flipped_predictions() {
        let labels: Vec<_> = (0..50).map(|i| if i % 3 == 0 { Helpful } else { Unhelpful }).collect();
        let right = Evaluation::from_pairs(labels.iter().map(|&y| (y, y)), "t").unwrap();
        assert_eq!(right.accuracy, 1.0);
        let flip = |y: HelpfulnessLabel| HelpfulnessLabel::from_class_index(1 - y.class_index());
        let wrong = Evaluation::from_pairs(labels.iter().map(|&y| (y, flip(y))), "t").unwrap();
        assert_eq!(wrong.accuracy, 0.0);
        assert_eq!(wrong.confusion.tp + wrong.confusion.tn, 0);
        assert_eq!(wrong.confusion.total(), 50);
    }

    #[test]
    fn random_predictor_is_near_chance() {
        // binomial(10000, 0.5): sd 0.005, so 0.5 ± 0.015 is a 3-sigma band
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs = (0..10_000).map(|i| {
            let y = if i % 2 == 0 { Helpful } else { Unhelpful };
            (y, if rng.gen::<bool>() { Helpful } else { Unhelpful })
        });
        let e = Evaluation::from_pairs(pairs, "t").unwrap();
        assert!((e.accuracy - 0.5).abs() <= 0.015, "{}", e.accuracy);
    }

    #[test]
    fn empty_split_is_an_error() {
        let err = Evaluation::from_pairs(std::iter::empty(), "test").unwrap_err();
        assert_eq!(err.kind(), "EmptySplit");
    }

    /// Token 2 or 3 decides the label; the rest is noise.
    fn toy(n: usize, seed: u64) -> Vec<EncodedSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Helpful } else { Unhelpful };
                let len = rng.gen_range(3..9);
                let mut ids: Vec<u32> = (0..len).map(|_| rng.gen_range(4..12)).collect();
                let at = rng.gen_range(0..len);
                ids[at] = 2 + label.class_index() as u32;
                EncodedSequence::new(ids, Some(label))
            })
            .collect()
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        let mut cfg = TrainConfig::for_task(Task::T1);
        cfg.epochs = epochs;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.02;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn learns_and_selects_best_epoch() {
        let spec = ModelSpec::Linear(LinearNgram { vocab_size: 12, dim: 8, bigram_buckets: 0 });
        let init = spec.init(crate::util::uniform_tensor(&[12, 8], 0.1, &mut ChaCha8Rng::seed_from_u64(1)), 1).unwrap();
        let (train, val) = (toy(200, 1), toy(60, 2));
        let out = train_model(&spec, init, &small_cfg(6), &train, &val).unwrap();
        assert_eq!(out.curve.len(), 6);
        let best = out.selected_validation_accuracy();
        assert!(out.curve.iter().all(|r| r.validation_accuracy <= best));
        let first_best = out.curve.iter().position(|r| r.validation_accuracy == best).unwrap() + 1;
        assert_eq!(out.selected_epoch, first_best);
        assert_eq!(evaluate(&spec, &out.best, &val, "v").unwrap().accuracy, best);
        assert!(best > 0.9, "{best}");
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let spec = ModelSpec::Rcnn(Rcnn { vocab_size: 12, embed_dim: 4, context: 3, hidden: 5 });
        let init = spec.init(crate::util::uniform_tensor(&[12, 4], 0.05, &mut ChaCha8Rng::seed_from_u64(1)), 1).unwrap();
        let out = train_model(&spec, init.clone(), &small_cfg(0), &toy(40, 1), &toy(40, 2)).unwrap();
        assert_eq!(out.best, init);
        assert_eq!(out.selected_epoch, 0);
        assert!(out.curve.is_empty());
    }

    #[test]
    fn deterministic_and_skips_empty_sequences() {
        let spec = ModelSpec::Rcnn(Rcnn { vocab_size: 12, embed_dim: 4, context: 3, hidden: 5 });
        let init = spec.init(crate::util::uniform_tensor(&[12, 4], 0.05, &mut ChaCha8Rng::seed_from_u64(1)), 1).unwrap();
        let mut train = toy(50, 1);
        train.push(EncodedSequence::new(vec![], Some(Helpful)));
        let a = train_model(&spec, init.clone(), &small_cfg(2), &train, &toy(20, 2)).unwrap();
        let b = train_model(&spec, init, &small_cfg(2), &train, &toy(20, 2)).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.skipped_empty, 1);
    }

    #[test]
    fn divergence_reports_epoch_and_batch() {
        let spec = ModelSpec::Linear(LinearNgram { vocab_size: 12, dim: 4, bigram_buckets: 0 });
        let mut init = spec.init(crate::util::uniform_tensor(&[12, 4], 0.1, &mut ChaCha8Rng::seed_from_u64(1)), 1).unwrap();
        init.get_mut("w_out").unwrap().data_mut()[0] = f32::NAN;
        let err = train_model(&spec, init, &small_cfg(2), &toy(40, 1), &toy(10, 2)).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1, batch: 1, .. }), "{err}");
    }
}
