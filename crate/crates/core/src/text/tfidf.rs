use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::checkpoint::write_atomic;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
}

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, w: &[f32]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| v as f64 * w[i as usize] as f64)
            .sum()
    }
}

/// Document frequencies from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    pub n_docs: u64,
    pub df: Vec<u64>,
}

impl IdfTable {
    /// Counts, for each vocabulary id, the documents it appears in. Special
    /// and out-of-vocabulary tokens are ignored.
    pub fn fit<'a, I, S>(docs: I, vocab: &Vocabulary) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut df = vec![0u64; vocab.len()];
        let mut n_docs = 0;
        let mut seen = Vec::new();
        for doc in docs {
            n_docs += 1;
            seen.clear();
            seen.extend(doc.iter().filter_map(|t| vocab.get(t.as_ref())).filter(|&i| i > 1));
            seen.sort_unstable();
            seen.dedup();
            for &i in &seen {
                df[i as usize] += 1;
            }
        }
        IdfTable { n_docs, df }
    }

    /// Smoothed idf `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let df = self.df.get(id as usize).copied().unwrap_or(0);
        ((1 + self.n_docs) as f64 / (1 + df) as f64).ln() + 1.0
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = format!("#\tn_docs={}\n", self.n_docs);
        for (i, df) in self.df.iter().enumerate() {
            let _ = writeln!(out, "{}\t{i}\t{df}", vocab.token(i as u32).unwrap_or(""));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let n_docs = lines
            .next()
            .and_then(|h| h.split('\t').find_map(|f| f.strip_prefix("n_docs=")))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Corrupt("idf header lacks n_docs".into()))?;
        let df = lines
            .map(|l| {
                l.rsplit('\t')
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Corrupt(format!("idf line `{l}`")))
            })
            .collect::<Result<_>>()?;
        Ok(IdfTable { n_docs, df })
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        write_atomic(path, self.to_text(vocab).as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// L2-normalized TF-IDF vector with `tf = count / document length`.
pub fn tfidf_vector<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, idf: &IdfTable) -> SparseVector {
    if tokens.is_empty() {
        return SparseVector::default();
    }
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for t in tokens {
        if let Some(id) = vocab.get(t.as_ref()).filter(|&i| i > 1) {
            *counts.entry(id).or_default() += 1;
        }
    }
    let len = tokens.len() as f64;
    let weights: Vec<(u32, f64)> =
        counts.into_iter().map(|(i, c)| (i, c as f64 / len * idf.idf(i))).collect();
    let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return SparseVector::default();
    }
    SparseVector {
        indices: weights.iter().map(|(i, _)| *i).collect(),
        values: weights.iter().map(|(_, w)| (w / norm) as f32).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(docs: &[Vec<String>]) -> (Vocabulary, IdfTable) {
        let v = Vocabulary::build(docs.iter().map(Vec::as_slice), 1).unwrap();
        let idf = IdfTable::fit(docs.iter().map(Vec::as_slice), &v);
        (v, idf)
    }

    fn d(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_document_hand_computation() {
        let docs = vec![d(&["a", "a", "b"])];
        let (v, idf) = setup(&docs);
        assert_eq!(idf.idf(v.id("a")), 1.0);
        let x = tfidf_vector(&docs[0], &v, &idf);
        // tf (2/3, 1/3), idf 1 -> (2, 1)/sqrt(5)
        assert_eq!(x.indices, vec![v.id("a"), v.id("b")]);
        assert!((x.values[0] as f64 - 2.0 / 5f64.sqrt()).abs() < 1e-7);
        assert!((x.values[1] as f64 - 1.0 / 5f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn absent_tokens_have_no_coordinate() {
        let docs = vec![d(&["a"])];
        let (v, idf) = setup(&docs);
        let x = tfidf_vector(&d(&["a", "zzz"]), &v, &idf);
        assert_eq!(x.indices, vec![v.id("a")]);
        assert!(tfidf_vector(&d(&["zzz"]), &v, &idf).is_zero());
        assert!(tfidf_vector::<String>(&[], &v, &idf).is_zero());
    }

    #[test]
    fn unit_norm_and_identical_docs() {
        let docs = vec![d(&["a", "b", "c"]), d(&["a", "a"]), d(&["c", "b", "a", "a"])];
        let (v, idf) = setup(&docs);
        let x = tfidf_vector(&docs[2], &v, &idf);
        assert!((x.norm() - 1.0).abs() < 1e-6);
        assert_eq!(x, tfidf_vector(&docs[2].clone(), &v, &idf));
        // df(a) = 3 -> idf = ln(4/4)+1 = 1; df(b) = 2 -> ln(4/3)+1
        assert!((idf.idf(v.id("b")) - ((4.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let docs = vec![d(&["a", "b"]), d(&["b"])];
        let (v, idf) = setup(&docs);
        assert_eq!(IdfTable::from_text(&idf.to_text(&v)).unwrap(), idf);
    }
}
