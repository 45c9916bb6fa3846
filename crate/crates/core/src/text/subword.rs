use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hashes character n-grams of `<word>` into a fixed number of buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordHasher {
    pub n_min: usize,
    pub n_max: usize,
    pub bucket_count: u32,
}

impl Default for SubwordHasher {
    fn default() -> Self {
        SubwordHasher { n_min: 3, n_max: 6, bucket_count: 1 << 18 }
    }
}

/// 32-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

impl SubwordHasher {
    pub fn new(n_min: usize, n_max: usize, bucket_count: u32) -> Result<Self> {
        if n_min == 0 || n_min > n_max {
            return Err(Error::Config(format!("invalid n-gram range {n_min}..={n_max}")));
        }
        if !bucket_count.is_power_of_two() {
            return Err(Error::Config(format!("bucket_count {bucket_count} is not a power of two")));
        }
        Ok(SubwordHasher { n_min, n_max, bucket_count })
    }

    /// All character n-grams of `<word>` with `n_min <= n <= n_max`, shortest
    /// first, in order of position.
    pub fn ngrams(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
        let mut out = Vec::new();
        for n in self.n_min..=self.n_max.min(chars.len()) {
            for w in chars.windows(n) {
                out.push(w.iter().collect());
            }
        }
        out
    }

    pub fn bucket(&self, ngram: &str) -> u32 {
        fnv1a(ngram.as_bytes()) & (self.bucket_count - 1)
    }

    pub fn ids(&self, word: &str) -> Vec<u32> {
        self.ngrams(word).iter().map(|g| self.bucket(g)).collect()
    }
}
