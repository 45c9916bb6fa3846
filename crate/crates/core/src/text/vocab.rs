use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::checkpoint::write_atomic;
use crate::util::sha256_hex;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Dense token ↔ id mapping.
///
/// Ids 0 and 1 are reserved for padding and unknown tokens. The remaining ids
/// are ordered by corpus frequency (descending), ties broken by the token
/// string, so identical corpora produce identical ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
}

pub fn count_tokens<'a, I>(docs: I) -> HashMap<String, u64>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        for tok in doc {
            *counts.entry(tok.clone()).or_default() += 1;
        }
    }
    counts
}

/// Parallel frequency count; the result does not depend on the worker count.
pub fn count_tokens_par(docs: &[Vec<String>]) -> HashMap<String, u64> {
    docs.par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
            for tok in doc {
                *acc.entry(tok.clone()).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}

impl Vocabulary {
    pub fn build<'a, I>(docs: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        Self::from_counts(count_tokens(docs), min_count)
    }

    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut freq = vec![0, 0];
        for (t, c) in kept {
            tokens.push(t);
            freq.push(c);
        }
        Ok(Self::assemble(tokens, freq, min_count))
    }

    fn assemble(tokens: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        // specials are reachable by id only, so literal "<pad>" text never encodes to PAD
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, counts, index, min_count }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Appends `token` with count 0 if absent, returning its id. Used to give
    /// out-of-vocabulary words their own rows when vectors can be composed
    /// from subwords.
    pub fn push_extension(&mut self, token: &str) -> u32 {
        if let Some(id) = self.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.counts.push(0);
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#\tmin_count={}\tspecials={},{}\n",
            self.min_count, PAD_TOKEN, UNK_TOKEN
        );
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{c}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Corrupt("empty vocabulary file".into()))?;
        let min_count = header
            .split('\t')
            .find_map(|f| f.strip_prefix("min_count="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Corrupt("vocabulary header lacks min_count".into()))?;
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in lines.enumerate() {
            let mut f = line.split('\t');
            let (Some(tok), Some(id), Some(count), None) = (f.next(), f.next(), f.next(), f.next())
            else {
                return Err(Error::Corrupt(format!("vocabulary line {}: `{line}`", n + 2)));
            };
            let id: usize = id
                .parse()
                .map_err(|_| Error::Corrupt(format!("vocabulary line {}: bad id", n + 2)))?;
            if id != tokens.len() {
                return Err(Error::Corrupt(format!("vocabulary ids not dense at line {}", n + 2)));
            }
            tokens.push(tok.to_string());
            counts.push(
                count
                    .parse()
                    .map_err(|_| Error::Corrupt(format!("vocabulary line {}: bad count", n + 2)))?,
            );
        }
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Corrupt("vocabulary lacks PAD/UNK specials".into()));
        }
        Ok(Self::assemble(tokens, counts, min_count))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 over the id-ordered token list.
    pub fn checksum(&self) -> String {
        sha256_hex(self.tokens.join("\n").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn doc(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ids_by_frequency() {
        let corpus = [doc(&["a", "b", "a"])];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 1).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a", "b"]);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), 3);
        assert_eq!(v.id("zzz"), UNK);
    }

    #[test]
    fn min_count_drops_rare() {
        let corpus = [doc(&["a", "b", "a"])];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 2).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.get("b"), None);
    }

    #[test]
    fn empty_corpus() {
        let corpus: [Vec<String>; 1] = [vec![]];
        assert!(matches!(
            Vocabulary::build(corpus.iter().map(Vec::as_slice), 1),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn matches_count_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let docs: Vec<Vec<String>> = (0..1000)
            .map(|_| {
                let n = rng.gen_range(1..20);
                (0..n).map(|_| format!("w{}", rng.gen_range(0..300))).collect()
            })
            .collect();
        for min_count in [1, 5, 40] {
            let v = Vocabulary::build(docs.iter().map(Vec::as_slice), min_count).unwrap();
            let mut oracle: std::collections::BTreeMap<&str, u64> = Default::default();
            for d in &docs {
                for t in d {
                    *oracle.entry(t).or_default() += 1;
                }
            }
            let expected: BTreeSet<&str> =
                oracle.iter().filter(|(_, &c)| c >= min_count).map(|(t, _)| *t).collect();
            let got: BTreeSet<&str> = v.tokens()[2..].iter().map(String::as_str).collect();
            assert_eq!(got, expected);
            for id in 2..v.len() as u32 {
                assert_eq!(v.count(id), oracle[v.token(id).unwrap()]);
            }
            let par = Vocabulary::from_counts(count_tokens_par(&docs), min_count).unwrap();
            assert_eq!(par, v);
        }
    }

    #[test]
    fn text_round_trip() {
        let corpus = [doc(&["x", "y", "y", "z"])];
        let mut v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 1).unwrap();
        v.push_extension("oov");
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.checksum(), v.checksum());
        assert!(Vocabulary::from_text("#\tmin_count=1\n<pad>\t0\t0\n").is_err());
    }
}
