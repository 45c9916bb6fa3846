use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::checkpoint::{self, write_atomic};
use crate::numerics::{dot, ParamSet, Tensor};
use crate::text::{SubwordHasher, Vocabulary, PAD};
use crate::util::{derive_seed, uniform_tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    RandomUniform,
    SkipgramSubword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableMeta {
    mode: EmbeddingMode,
    dim: usize,
    vocab_size: usize,
    vocab_checksum: String,
    hasher: Option<SubwordHasher>,
}

/// Word look-up table, optionally backed by hashed subword vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    mode: EmbeddingMode,
    word_vectors: Tensor<f32>,
    subword_vectors: Option<Tensor<f32>>,
    hasher: Option<SubwordHasher>,
    vocab_checksum: String,
}

/// Uniform `[-range, range]` rows with a zero PAD row.
pub fn init_random_uniform(vocab: &Vocabulary, dim: usize, seed: u64, range: f64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "embedding-init"));
    let mut word_vectors = uniform_tensor(&[vocab.len(), dim], range, &mut rng);
    word_vectors.row_mut(PAD as usize).fill(0.0);
    EmbeddingTable {
        mode: EmbeddingMode::RandomUniform,
        word_vectors,
        subword_vectors: None,
        hasher: None,
        vocab_checksum: vocab.checksum(),
    }
}

impl EmbeddingTable {
    pub fn random_uniform(word_vectors: Tensor<f32>, vocab: &Vocabulary) -> Result<Self> {
        if word_vectors.rows() != vocab.len() {
            return Err(Error::Alignment(format!(
                "{} rows for a vocabulary of {}",
                word_vectors.rows(),
                vocab.len()
            )));
        }
        Ok(EmbeddingTable {
            mode: EmbeddingMode::RandomUniform,
            word_vectors,
            subword_vectors: None,
            hasher: None,
            vocab_checksum: vocab.checksum(),
        })
    }

    pub fn skipgram(
        word_vectors: Tensor<f32>,
        subword_vectors: Tensor<f32>,
        hasher: SubwordHasher,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        if word_vectors.rows() != vocab.len()
            || subword_vectors.rows() != hasher.bucket_count as usize
            || word_vectors.cols() != subword_vectors.cols()
        {
            return Err(Error::Alignment(format!(
                "word {:?} / subword {:?} for |V| = {} and {} buckets",
                word_vectors.shape(),
                subword_vectors.shape(),
                vocab.len(),
                hasher.bucket_count
            )));
        }
        Ok(EmbeddingTable {
            mode: EmbeddingMode::SkipgramSubword,
            word_vectors,
            subword_vectors: Some(subword_vectors),
            hasher: Some(hasher),
            vocab_checksum: vocab.checksum(),
        })
    }

    pub fn mode(&self) -> EmbeddingMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.word_vectors.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.word_vectors.rows()
    }

    pub fn word_vectors(&self) -> &Tensor<f32> {
        &self.word_vectors
    }

    pub fn subword_vectors(&self) -> Option<&Tensor<f32>> {
        self.subword_vectors.as_ref()
    }

    pub fn hasher(&self) -> Option<&SubwordHasher> {
        self.hasher.as_ref()
    }

    pub fn vocab_checksum(&self) -> &str {
        &self.vocab_checksum
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.checksum() != self.vocab_checksum {
            return Err(Error::Alignment(
                "embedding table was built against a different vocabulary".into(),
            ));
        }
        Ok(())
    }

    fn mean_rows(&self, word_row: Option<u32>, word: &str) -> Vec<f32> {
        let d = self.dim();
        let mut acc = vec![0f64; d];
        let mut n = 0usize;
        if let Some(id) = word_row {
            for (a, &x) in acc.iter_mut().zip(self.word_vectors.row(id as usize)) {
                *a += x as f64;
            }
            n += 1;
        }
        if let (Some(h), Some(sub)) = (&self.hasher, &self.subword_vectors) {
            for b in h.ids(word) {
                for (a, &x) in acc.iter_mut().zip(sub.row(b as usize)) {
                    *a += x as f64;
                }
                n += 1;
            }
        }
        if n == 0 {
            return vec![0.0; d];
        }
        acc.into_iter().map(|a| (a / n as f64) as f32).collect()
    }

    /// Vector for `word`.
    ///
    /// Random-uniform tables return the word's row (UNK row when unknown).
    /// Subword tables average the word row with its n-gram rows; unknown words
    /// use the n-gram rows alone.
    pub fn word_vector(&self, word: &str, vocab: &Vocabulary) -> Result<Vec<f32>> {
        self.check_vocab(vocab)?;
        Ok(self.lookup(word, vocab))
    }

    pub(crate) fn lookup(&self, word: &str, vocab: &Vocabulary) -> Vec<f32> {
        match self.mode {
            EmbeddingMode::RandomUniform => self.word_vectors.row(vocab.id(word) as usize).to_vec(),
            EmbeddingMode::SkipgramSubword => self.mean_rows(vocab.get(word), word),
        }
    }

    /// Subword-only vector for a word outside the vocabulary. `None` for
    /// random-uniform tables.
    pub fn compose_oov(&self, word: &str) -> Option<Vec<f32>> {
        (self.mode == EmbeddingMode::SkipgramSubword).then(|| self.mean_rows(None, word))
    }

    /// One row per vocabulary id, as a classifier look-up table.
    pub fn materialize(&self, vocab: &Vocabulary) -> Result<Tensor<f32>> {
        self.check_vocab(vocab)?;
        let d = self.dim();
        let mut out = Tensor::zeros(&[vocab.len(), d]);
        for id in 0..vocab.len() {
            let row = if id < 2 {
                self.word_vectors.row(id).to_vec()
            } else {
                self.lookup(vocab.token(id as u32).unwrap(), vocab)
            };
            out.row_mut(id).copy_from_slice(&row);
        }
        out.row_mut(PAD as usize).fill(0.0);
        Ok(out)
    }

    /// The `k` most cosine-similar vocabulary words (specials and the query
    /// excluded), descending; equal cosines are ordered by id.
    pub fn nearest_neighbors(&self, word: &str, k: usize, vocab: &Vocabulary) -> Result<Vec<(String, f32)>> {
        self.check_vocab(vocab)?;
        let q = self.lookup(word, vocab);
        let qn = dot(&q, &q).sqrt();
        let query_id = vocab.get(word);
        let mut scored: Vec<(u32, f32)> = (2..vocab.len() as u32)
            .filter(|&id| Some(id) != query_id)
            .map(|id| {
                let v = self.lookup(vocab.token(id).unwrap(), vocab);
                let denom = qn * dot(&v, &v).sqrt();
                let cos = if denom > 0.0 { dot(&q, &v) / denom } else { 0.0 };
                (id, cos)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(id, c)| (vocab.token(id).unwrap().to_string(), c)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut params = ParamSet::new();
        params.insert("word_vectors", self.word_vectors.clone())?;
        if let Some(s) = &self.subword_vectors {
            params.insert("subword_vectors", s.clone())?;
        }
        let meta = TableMeta {
            mode: self.mode,
            dim: self.dim(),
            vocab_size: self.vocab_size(),
            vocab_checksum: self.vocab_checksum.clone(),
            hasher: self.hasher,
        };
        checkpoint::save(path, &params, serde_json::json!({ "kind": "embedding_table", "table": meta }))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, sidecar) = checkpoint::load(path)?;
        let meta: TableMeta = serde_json::from_value(sidecar.meta["table"].clone())
            .map_err(|e| Error::Corrupt(format!("embedding table header: {e}")))?;
        let word_vectors = params.get("word_vectors").map_err(|e| Error::Corrupt(e.to_string()))?.clone();
        let subword_vectors = params.get("subword_vectors").ok().cloned();
        if word_vectors.cols() != meta.dim
            || word_vectors.rows() != meta.vocab_size
            || (meta.mode == EmbeddingMode::SkipgramSubword) != subword_vectors.is_some()
        {
            return Err(Error::Corrupt("embedding table header disagrees with payload".into()));
        }
        Ok(EmbeddingTable {
            mode: meta.mode,
            word_vectors,
            subword_vectors,
            hasher: meta.hasher,
            vocab_checksum: meta.vocab_checksum,
        })
    }

    /// Plain-text export: `"|V| d"` header, then `token v1 … vd` per word.
    pub fn to_text(&self, vocab: &Vocabulary) -> Result<String> {
        self.check_vocab(vocab)?;
        let mut out = format!("{} {}\n", vocab.len(), self.dim());
        for (id, tok) in vocab.tokens().iter().enumerate() {
            let v = if id < 2 { self.word_vectors.row(id).to_vec() } else { self.lookup(tok, vocab) };
            out.push_str(tok);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn export_text(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        write_atomic(path, self.to_text(vocab)?.as_bytes())
    }
}
