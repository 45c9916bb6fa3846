use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{Cnn, LinearNgram, ModelKind, ModelSpec, Rcnn, Svm};
use crate::embeddings::{EmbeddingMode, SkipgramConfig};
use crate::error::{Error, Result};
use crate::text::SubwordHasher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Supervised: random-uniform look-up table over the labeled training text.
    T1,
    /// Semi-supervised: look-up table pre-trained with subword skip-gram on
    /// labeled and unlabeled text.
    T2,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::T1 => "t1",
            Task::T2 => "t2",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Task::T1),
            "t2" => Ok(Task::T2),
            _ => Err(Error::Config(format!("unknown task `{s}` (expected t1 or t2)"))),
        }
    }
}

/// Skip-gram settings used by T2 when the table is trained in-process. The
/// vector width is the classifier's `embed_dim` and the frequency cut-off is
/// the shared `min_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub window: usize,
    pub negatives: usize,
    pub subsample_t: f64,
    pub epochs: usize,
    pub initial_lr: f64,
    pub hasher: SubwordHasher,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        let s = SkipgramConfig::default();
        PretrainConfig {
            window: s.window,
            negatives: s.negatives,
            subsample_t: s.subsample_t,
            epochs: s.epochs,
            initial_lr: s.initial_lr,
            hasher: s.hasher,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_len: usize,
    pub embedding: EmbeddingMode,
    pub embed_dim: usize,
    /// RCNN recurrent context width.
    pub rnn_hidden: usize,
    /// RCNN latent (fully connected) width.
    pub fc_hidden: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: u64,
    /// Half-width of the random-uniform look-up table initialization.
    pub init_range: f64,
    pub freeze_embeddings: bool,
    pub use_summary: bool,
    pub cnn_widths: Vec<usize>,
    pub cnn_maps: usize,
    pub dropout: f64,
    /// Hash buckets for the linear model's bigram features (0 disables them).
    pub bigram_buckets: usize,
    pub svm_lambda: f64,
    pub pretrain: PretrainConfig,
}

impl TrainConfig {
    /// Shipped defaults for a task.
    pub fn for_task(task: Task) -> Self {
        let (embedding, width) = match task {
            Task::T1 => (EmbeddingMode::RandomUniform, 256),
            Task::T2 => (EmbeddingMode::SkipgramSubword, 300),
        };
        TrainConfig {
            task,
            model: ModelKind::Rcnn,
            batch_size: 128,
            epochs: 10,
            max_len: 500,
            embedding,
            embed_dim: width,
            rnn_hidden: width,
            fc_hidden: width,
            learning_rate: 1e-3,
            seed: 0,
            min_count: 5,
            init_range: 0.05,
            freeze_embeddings: false,
            use_summary: false,
            cnn_widths: vec![3, 4, 5],
            cnn_maps: 100,
            dropout: 0.0,
            bigram_buckets: 1 << 16,
            svm_lambda: 1e-4,
            pretrain: PretrainConfig::default(),
        }
    }

    /// Applies layers of `key = value` settings over the task defaults, later
    /// layers winning. The task itself is taken from the last layer that sets
    /// it (default t1) so that defaults follow it.
    pub fn resolve(layers: &[Vec<(String, Value)>]) -> Result<Self> {
        let mut task = Task::T1;
        for (k, v) in layers.iter().flatten() {
            if k == "task" {
                task = match v {
                    Value::String(s) => s.parse()?,
                    other => return Err(Error::Config(format!("task: expected a string, got {other}"))),
                };
            }
        }
        let mut cfg = TrainConfig::for_task(task);
        for (k, v) in layers.iter().flatten() {
            cfg.set(k, v.clone())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one (possibly dotted, e.g. `pretrain.window`) key. String values
    /// for non-string fields are parsed as JSON, so flat text files work.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot.get_mut(part).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        }
        let value = match (&*slot, value) {
            (Value::String(_), v) => v,
            (_, Value::String(s)) => serde_json::from_str(&s).unwrap_or(Value::String(s)),
            (_, v) => v,
        };
        *slot = value;
        *self = serde_json::from_value(root).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        if self.embed_dim == 0 || self.rnn_hidden == 0 || self.fc_hidden == 0 {
            return bad("embed_dim, rnn_hidden and fc_hidden must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.cnn_widths.is_empty() || self.cnn_widths.contains(&0) || self.cnn_maps == 0 {
            return bad("cnn_widths must be non-empty positive widths and cnn_maps positive");
        }
        if self.bigram_buckets != 0 && !self.bigram_buckets.is_power_of_two() {
            return bad("bigram_buckets must be 0 or a power of two");
        }
        if !(self.svm_lambda > 0.0) {
            return bad("svm_lambda must be positive");
        }
        let expected = match self.task {
            Task::T1 => EmbeddingMode::RandomUniform,
            Task::T2 => EmbeddingMode::SkipgramSubword,
        };
        if self.embedding != expected {
            return Err(Error::Config(format!(
                "task {} uses {} embeddings",
                self.task,
                serde_json::to_value(expected)?.as_str().unwrap_or_default()
            )));
        }
        if self.task == Task::T2 && self.model == ModelKind::Svm {
            return bad("task t2 initializes a look-up table; the svm model has none");
        }
        self.skipgram()?.validate()
    }

    /// Keys whose values differ from the task defaults (seed excluded).
    pub fn overrides(&self) -> Vec<String> {
        let ours = serde_json::to_value(self).unwrap_or_default();
        let base = serde_json::to_value(TrainConfig::for_task(self.task)).unwrap_or_default();
        let mut out = Vec::new();
        diff_keys("", &ours, &base, &mut out);
        out.retain(|k| k != "seed");
        out
    }

    /// The model this config describes, for a vocabulary of `vocab_size`.
    pub fn model_spec(&self, vocab_size: usize) -> ModelSpec {
        match self.model {
            ModelKind::Rcnn => ModelSpec::Rcnn(Rcnn {
                vocab_size,
                embed_dim: self.embed_dim,
                context: self.rnn_hidden,
                hidden: self.fc_hidden,
            }),
            ModelKind::Cnn => ModelSpec::Cnn(Cnn {
                vocab_size,
                embed_dim: self.embed_dim,
                widths: self.cnn_widths.clone(),
                maps: self.cnn_maps,
                dropout: self.dropout,
            }),
            ModelKind::Linear => ModelSpec::Linear(LinearNgram {
                vocab_size,
                dim: self.embed_dim,
                bigram_buckets: self.bigram_buckets,
            }),
            ModelKind::Svm => ModelSpec::Svm(Svm { vocab_size, lambda: self.svm_lambda, epochs: self.epochs }),
        }
    }

    pub fn skipgram(&self) -> Result<SkipgramConfig> {
        let p = &self.pretrain;
        let cfg = SkipgramConfig {
            dim: self.embed_dim,
            window: p.window,
            negatives: p.negatives,
            subsample_t: p.subsample_t,
            epochs: p.epochs,
            initial_lr: p.initial_lr,
            min_count: self.min_count,
            hasher: p.hasher,
        };
        Ok(cfg)
    }
}

fn diff_keys(prefix: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, v) in x {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match y.get(k) {
                    Some(w) => diff_keys(&key, v, w, out),
                    None => out.push(key),
                }
            }
        }
        _ if a != b => out.push(prefix.to_string()),
        _ => {}
    }
}
