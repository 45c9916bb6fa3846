//! Two-class text classifiers.
//!
//! The neural models (RCNN, CNN, averaged n-gram) share a look-up table named
//! [`EMBEDDING`] and are generic over [`Real`], so the same code runs in `f32`
//! for training and in `f64` for gradient checks. The SVM scores TF-IDF
//! vectors instead of token sequences.

mod cnn;
mod linear;
mod rcnn;
mod svm;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cnn::{Cnn, CnnTrace};
pub use linear::{Feature, LinearNgram};
pub use rcnn::{Rcnn, RcnnTrace};
pub use svm::{svm_objective, svm_score, svm_subgradient, svm_train, Svm, SvmWeights};

use crate::corpus::HelpfulnessLabel;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::{checkpoint, softmax, softmax_cross_entropy, ParamSet, Real, Tensor};
use crate::text::{encode, tfidf_vector, IdfTable, SparseVector, Tokenizer, Vocabulary, UNK};

/// Name of the word look-up table in every neural model.
pub const EMBEDDING: &str = "embedding";

const SVM_W: &str = "w";
const SVM_B: &str = "b";
const SVM_DF: &str = "df";
const SVM_N_DOCS: &str = "n_docs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rcnn,
    Cnn,
    Linear,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Rcnn, ModelKind::Cnn, ModelKind::Linear, ModelKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rcnn => "rcnn",
            ModelKind::Cnn => "cnn",
            ModelKind::Linear => "linear",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected rcnn, cnn, linear or svm)")))
    }
}

/// Architecture and sizes of a model; stored in checkpoint metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Rcnn(Rcnn),
    Cnn(Cnn),
    Linear(LinearNgram),
    Svm(Svm),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Rcnn(_) => ModelKind::Rcnn,
            ModelSpec::Cnn(_) => ModelKind::Cnn,
            ModelSpec::Linear(_) => ModelKind::Linear,
            ModelSpec::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            ModelSpec::Rcnn(m) => m.vocab_size,
            ModelSpec::Cnn(m) => m.vocab_size,
            ModelSpec::Linear(m) => m.vocab_size,
            ModelSpec::Svm(m) => m.vocab_size,
        }
    }

    fn set_vocab_size(&mut self, n: usize) {
        match self {
            ModelSpec::Rcnn(m) => m.vocab_size = n,
            ModelSpec::Cnn(m) => m.vocab_size = n,
            ModelSpec::Linear(m) => m.vocab_size = n,
            ModelSpec::Svm(m) => m.vocab_size = n,
        }
    }

    /// Width of the word look-up table, for the neural models.
    pub fn embed_dim(&self) -> Option<usize> {
        match self {
            ModelSpec::Rcnn(m) => Some(m.embed_dim),
            ModelSpec::Cnn(m) => Some(m.embed_dim),
            ModelSpec::Linear(m) => Some(m.dim),
            ModelSpec::Svm(_) => None,
        }
    }

    /// Initial parameters around the given look-up table.
    pub fn init(&self, embedding: Tensor<f32>, seed: u64) -> Result<ParamSet<f32>> {
        match self {
            ModelSpec::Rcnn(m) => m.init(embedding, seed),
            ModelSpec::Cnn(m) => m.init(embedding, seed),
            ModelSpec::Linear(m) => m.init(Some(embedding), seed),
            ModelSpec::Svm(_) => Err(not_sequential()),
        }
    }

    pub fn logits<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<Vec<F>> {
        match self {
            ModelSpec::Rcnn(m) => m.logits(p, ids),
            ModelSpec::Cnn(m) => m.logits(p, ids),
            ModelSpec::Linear(m) => m.logits(p, ids),
            ModelSpec::Svm(_) => Err(not_sequential()),
        }
    }

    /// Cross-entropy loss of one example. Adds `weight` times its gradient to
    /// `grads`. `rng` drives training-only randomness (CNN dropout).
    pub fn accumulate<F: Real, R: Rng + ?Sized>(
        &self,
        p: &ParamSet<F>,
        ids: &[u32],
        class: usize,
        weight: F,
        grads: &mut ParamSet<F>,
        rng: &mut R,
    ) -> Result<F> {
        let scaled = |logits: &[F]| -> Result<(F, Vec<F>)> {
            let (loss, mut d) = softmax_cross_entropy(logits, class)?;
            d.iter_mut().for_each(|x| *x *= weight);
            Ok((loss, d))
        };
        match self {
            ModelSpec::Rcnn(m) => {
                let (logits, trace) = m.forward(p, ids)?;
                let (loss, d) = scaled(&logits)?;
                m.backward(p, ids, &trace, &d, grads)?;
                Ok(loss)
            }
            ModelSpec::Cnn(m) => {
                let (logits, trace) = m.forward_train(p, ids, rng)?;
                let (loss, d) = scaled(&logits)?;
                m.backward(p, ids, &trace, &d, grads)?;
                Ok(loss)
            }
            ModelSpec::Linear(m) => {
                let (loss, d) = scaled(&m.logits(p, ids)?)?;
                m.backward(p, ids, &d, grads)?;
                Ok(loss)
            }
            ModelSpec::Svm(_) => Err(not_sequential()),
        }
    }
}

fn not_sequential() -> Error {
    Error::Config("the svm model scores TF-IDF vectors, not token sequences".into())
}

pub(crate) fn check_shapes<F: Real>(p: &ParamSet<F>, expected: &[(&str, Vec<usize>)]) -> Result<()> {
    if p.len() != expected.len() {
        return Err(Error::Shape(format!("expected {} tensors, found {}", expected.len(), p.len())));
    }
    for (name, shape) in expected {
        let t = p.get(name)?;
        if t.shape() != shape.as_slice() {
            return Err(Error::Shape(format!("`{name}` is {:?}, expected {shape:?}", t.shape())));
        }
    }
    Ok(())
}

pub(crate) fn check_ids(ids: &[u32], vocab_size: usize) -> Result<()> {
    match ids.iter().find(|&&i| i as usize >= vocab_size) {
        Some(&i) => Err(Error::Index { index: i as usize, len: vocab_size }),
        None => Ok(()),
    }
}

/// Element-wise maximum over rows, with the first row attaining it.
pub fn max_pool<F: Real>(rows: &[Vec<F>]) -> (Vec<F>, Vec<usize>) {
    let Some(first) = rows.first() else { return (vec![], vec![]) };
    let mut pooled = first.clone();
    let mut argmax = vec![0; first.len()];
    for (i, row) in rows.iter().enumerate().skip(1) {
        for (k, &v) in row.iter().enumerate() {
            if v > pooled[k] {
                pooled[k] = v;
                argmax[k] = i;
            }
        }
    }
    (pooled, argmax)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: HelpfulnessLabel,
    /// Softmax probability of the predicted class; for the SVM, the absolute
    /// margin `|w·x + b|`.
    pub confidence: f64,
    /// Set when the input had no in-vocabulary token.
    #[serde(default)]
    pub low_confidence: bool,
}

/// Argmax of two logits, ties to class 0 (Helpful).
pub fn prediction_from_logits(logits: &[f64]) -> Prediction {
    let p = softmax(logits);
    let class = if logits[0] >= logits[1] { 0 } else { 1 };
    Prediction { label: HelpfulnessLabel::from_class_index(class), confidence: p[class], low_confidence: false }
}

/// Sign of the SVM score, zero to Helpful.
pub fn prediction_from_margin(score: f64) -> Prediction {
    let label = if score >= 0.0 { HelpfulnessLabel::Helpful } else { HelpfulnessLabel::Unhelpful };
    Prediction { label, confidence: score.abs(), low_confidence: false }
}

/// A model ready for inference: architecture, weights, and the vocabulary
/// it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ParamSet<f32>,
    pub vocab_checksum: String,
    pub max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    kind: String,
    model: ModelSpec,
    vocab_checksum: String,
    max_len: usize,
    #[serde(default)]
    extra: serde_json::Value,
}

impl TrainedModel {
    /// Packs SVM weights together with the document frequencies needed to
    /// featurize new text.
    pub fn from_svm(spec: Svm, weights: &SvmWeights, idf: &IdfTable, vocab: &Vocabulary, max_len: usize) -> Result<Self> {
        if weights.w.len() != spec.vocab_size || idf.df.len() != spec.vocab_size {
            return Err(Error::Shape(format!(
                "svm over {} features got {} weights and {} document frequencies",
                spec.vocab_size,
                weights.w.len(),
                idf.df.len()
            )));
        }
        let mut params = ParamSet::new();
        params.insert(SVM_W, Tensor::vector(weights.w.iter().map(|&x| x as f32).collect()))?;
        params.insert(SVM_B, Tensor::vector(vec![weights.b as f32]))?;
        params.insert(SVM_DF, Tensor::vector(idf.df.iter().map(|&x| x as f32).collect()))?;
        params.insert(SVM_N_DOCS, Tensor::vector(vec![idf.n_docs as f32]))?;
        Ok(TrainedModel { spec: ModelSpec::Svm(spec), params, vocab_checksum: vocab.checksum(), max_len })
    }

    pub fn svm_weights(&self) -> Result<SvmWeights> {
        Ok(SvmWeights {
            w: self.params.get(SVM_W)?.data().iter().map(|&x| x as f64).collect(),
            b: self.params.get(SVM_B)?.data()[0] as f64,
        })
    }

    pub fn svm_idf(&self) -> Result<IdfTable> {
        Ok(IdfTable {
            n_docs: self.params.get(SVM_N_DOCS)?.data()[0] as u64,
            df: self.params.get(SVM_DF)?.data().iter().map(|&x| x as u64).collect(),
        })
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.checksum() != self.vocab_checksum || vocab.len() != self.spec.vocab_size() {
            return Err(Error::Alignment(format!(
                "model expects a {}-token vocabulary with checksum {}, got {} tokens with checksum {}",
                self.spec.vocab_size(),
                self.vocab_checksum,
                vocab.len(),
                vocab.checksum()
            )));
        }
        Ok(())
    }

    /// TF-IDF features for the SVM.
    pub fn svm_features<S: AsRef<str>>(&self, tokens: &[S], vocab: &Vocabulary) -> Result<SparseVector> {
        let idf = self.svm_idf()?;
        let cut = &tokens[..tokens.len().min(self.max_len)];
        Ok(tfidf_vector(cut, vocab, &idf))
    }

    /// Predicts from already-tokenized text.
    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S], vocab: &Vocabulary) -> Result<Prediction> {
        self.check_vocab(vocab)?;
        let known = tokens.iter().take(self.max_len).any(|t| vocab.get(t.as_ref()).is_some_and(|i| i > UNK));
        let mut pred = match &self.spec {
            ModelSpec::Svm(_) => {
                let w = self.svm_weights()?;
                prediction_from_margin(svm_score(&w.w, w.b, &self.svm_features(tokens, vocab)?))
            }
            spec => {
                let mut seq = encode(tokens, vocab, self.max_len, None);
                if seq.is_empty() {
                    seq.ids.push(UNK);
                    seq.length = 1;
                }
                let logits: Vec<f64> = spec.logits(&self.params, &seq.ids)?.iter().map(|&x| x as f64).collect();
                prediction_from_logits(&logits)
            }
        };
        pred.low_confidence = !known;
        Ok(pred)
    }

    pub fn predict_text(&self, text: &str, tokenizer: &Tokenizer, vocab: &Vocabulary) -> Result<Prediction> {
        self.predict_tokens(&tokenizer.tokenize(text), vocab)
    }

    /// Gives every unseen word in `docs` its own look-up row, composed from
    /// the subword vectors of `table`. Extends `vocab` and the model in step;
    /// returns the number of rows added.
    pub fn extend_vocab<'a, I, S>(&mut self, vocab: &mut Vocabulary, table: &EmbeddingTable, docs: I) -> Result<usize>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        self.check_vocab(vocab)?;
        let dim = self.spec.embed_dim().ok_or_else(not_sequential)?;
        if table.dim() != dim {
            return Err(Error::Alignment(format!("table has dimension {}, model {dim}", table.dim())));
        }
        let mut rows = Vec::new();
        for doc in docs {
            for t in doc.iter().take(self.max_len) {
                let t = t.as_ref();
                if vocab.get(t).is_none() {
                    let Some(v) = table.compose_oov(t) else {
                        return Err(Error::Alignment("extension needs a subword table".into()));
                    };
                    vocab.push_extension(t);
                    rows.push(v);
                }
            }
        }
        if rows.is_empty() {
            return Ok(0);
        }
        let old = self.params.get(EMBEDDING)?;
        let mut data = old.data().to_vec();
        for r in &rows {
            data.extend_from_slice(r);
        }
        *self.params.get_mut(EMBEDDING)? = Tensor::matrix(vocab.len(), dim, data)?;
        self.spec.set_vocab_size(vocab.len());
        self.vocab_checksum = vocab.checksum();
        Ok(rows.len())
    }

    /// Writes the checkpoint; `extra` is stored verbatim in the sidecar.
    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let meta = ModelMeta {
            kind: "model".into(),
            model: self.spec.clone(),
            vocab_checksum: self.vocab_checksum.clone(),
            max_len: self.max_len,
            extra,
        };
        checkpoint::save(path, &self.params, serde_json::to_value(meta)?)?;
        Ok(())
    }

    /// Loads a checkpoint and returns it with the stored `extra` metadata.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let (params, sidecar) = checkpoint::load(path)?;
        let meta: ModelMeta = serde_json::from_value(sidecar.meta)
            .map_err(|e| Error::Corrupt(format!("{}: not a model checkpoint ({e})", path.display())))?;
        if meta.kind != "model" {
            return Err(Error::Corrupt(format!("{}: not a model checkpoint", path.display())));
        }
        let model = TrainedModel {
            spec: meta.model,
            params,
            vocab_checksum: meta.vocab_checksum,
            max_len: meta.max_len,
        };
        if let ModelSpec::Svm(s) = &model.spec {
            for name in [SVM_W, SVM_DF] {
                if model.params.get(name)?.len() != s.vocab_size {
                    return Err(Error::Corrupt(format!("svm tensor `{name}` does not match the vocabulary size")));
                }
            }
        } else {
            match &model.spec {
                ModelSpec::Rcnn(m) => m.check(&model.params),
                ModelSpec::Cnn(m) => m.check(&model.params),
                ModelSpec::Linear(m) => m.check(&model.params),
                ModelSpec::Svm(_) => unreachable!(),
            }
            .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
        }
        Ok((model, meta.extra))
    }
}
