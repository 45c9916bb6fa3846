use serde::{Deserialize, Serialize};

use super::{check_ids, check_shapes, EMBEDDING};
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Real, Tensor};
use crate::text::{fnv1a, UNK};
use crate::util::{rng_for, uniform_tensor};

const BIGRAM: &str = "bigram";
const W_OUT: &str = "w_out";
const B_OUT: &str = "b_out";

/// Bag of words and hashed word bigrams, averaged, then a linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearNgram {
    pub vocab_size: usize,
    pub dim: usize,
    /// Power of two, or 0 to disable bigram features.
    pub bigram_buckets: usize,
}

/// One feature: a row of the word table or of the bigram table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Feature {
    Word(u32),
    Bigram(u32),
}

impl LinearNgram {
    pub fn new(vocab_size: usize) -> Self {
        LinearNgram { vocab_size, dim: 100, bigram_buckets: 1 << 16 }
    }

    fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut s = vec![(EMBEDDING, vec![self.vocab_size, self.dim])];
        if self.bigram_buckets > 0 {
            s.push((BIGRAM, vec![self.bigram_buckets, self.dim]));
        }
        s.push((W_OUT, vec![2, self.dim]));
        s.push((B_OUT, vec![2]));
        s
    }

    /// Input tables uniform in `±1/dim`, zero output layer.
    pub fn init(&self, embedding: Option<Tensor<f32>>, seed: u64) -> Result<ParamSet<f32>> {
        if self.bigram_buckets != 0 && !self.bigram_buckets.is_power_of_two() {
            return Err(Error::Config(format!("bigram buckets {} is not a power of two", self.bigram_buckets)));
        }
        let mut rng = rng_for(seed, "linear-init");
        let range = 1.0 / self.dim as f64;
        let mut p = ParamSet::new();
        for (name, shape) in self.shapes() {
            let t = match (name, &embedding) {
                (EMBEDDING, Some(e)) => e.clone(),
                (EMBEDDING | BIGRAM, _) => uniform_tensor(&shape, range, &mut rng),
                _ => Tensor::zeros(&shape),
            };
            p.insert(name, t)?;
        }
        self.check(&p)?;
        Ok(p)
    }

    pub fn check<F: Real>(&self, p: &ParamSet<F>) -> Result<()> {
        check_shapes(p, &self.shapes())
    }

    /// Word features in order, then one bigram feature per adjacent pair.
    /// An empty document is the single feature UNK.
    pub fn features(&self, ids: &[u32]) -> Vec<Feature> {
        if ids.is_empty() {
            return vec![Feature::Word(UNK)];
        }
        let mut f: Vec<Feature> = ids.iter().map(|&i| Feature::Word(i)).collect();
        if self.bigram_buckets > 0 {
            let mask = (self.bigram_buckets - 1) as u32;
            for pair in ids.windows(2) {
                let mut key = [0u8; 8];
                key[..4].copy_from_slice(&pair[0].to_le_bytes());
                key[4..].copy_from_slice(&pair[1].to_le_bytes());
                f.push(Feature::Bigram(fnv1a(&key) & mask));
            }
        }
        f
    }

    pub fn document_vector<F: Real>(&self, p: &ParamSet<F>, features: &[Feature]) -> Result<Vec<F>> {
        let e = p.get(EMBEDDING)?;
        let mut doc = vec![F::zero(); self.dim];
        for &f in features {
            let row = match f {
                Feature::Word(i) => e.row(i as usize),
                Feature::Bigram(b) => p.get(BIGRAM)?.row(b as usize),
            };
            crate::numerics::axpy(F::one(), row, &mut doc);
        }
        let inv = F::one() / F::of(features.len().max(1) as f64);
        doc.iter_mut().for_each(|x| *x *= inv);
        Ok(doc)
    }

    pub fn logits_from_features<F: Real>(&self, p: &ParamSet<F>, features: &[Feature]) -> Result<Vec<F>> {
        let doc = self.document_vector(p, features)?;
        let mut logits = p.get(B_OUT)?.data().to_vec();
        p.get(W_OUT)?.matvec_acc(&doc, &mut logits);
        Ok(logits)
    }

    pub fn logits<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<Vec<F>> {
        self.check(p)?;
        check_ids(ids, self.vocab_size)?;
        self.logits_from_features(p, &self.features(ids))
    }

    pub fn backward<F: Real>(&self, p: &ParamSet<F>, ids: &[u32], dlogits: &[F], grads: &mut ParamSet<F>) -> Result<()> {
        self.check(p)?;
        self.check(grads)?;
        check_ids(ids, self.vocab_size)?;
        let features = self.features(ids);
        let doc = self.document_vector(p, &features)?;
        {
            let [g_w, g_b] = grads.get_many_mut([W_OUT, B_OUT])?;
            g_w.add_outer(dlogits, &doc);
            for (g, &dl) in g_b.data_mut().iter_mut().zip(dlogits) {
                *g += dl;
            }
        }
        let mut ddoc = vec![F::zero(); self.dim];
        p.get(W_OUT)?.matvec_t_acc(dlogits, &mut ddoc);
        let inv = F::one() / F::of(features.len() as f64);
        ddoc.iter_mut().for_each(|x| *x *= inv);
        for f in features {
            let row = match f {
                Feature::Word(i) => grads.get_mut(EMBEDDING)?.row_mut(i as usize),
                Feature::Bigram(b) => grads.get_mut(BIGRAM)?.row_mut(b as usize),
            };
            crate::numerics::axpy(F::one(), &ddoc, row);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::{affine, grad_check, softmax_cross_entropy, TwoFloat};

    fn model(bigrams: usize) -> LinearNgram {
        LinearNgram { vocab_size: 20, dim: 6, bigram_buckets: bigrams }
    }

    fn params(m: &LinearNgram, seed: u64) -> ParamSet<f64> {
        let mut p = m.init(None, seed).unwrap().cast::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, t) in p.iter_mut() {
            if name == W_OUT || name == B_OUT {
                for x in t.data_mut() {
                    *x = rng.gen_range(-1.0..1.0);
                }
            }
        }
        p
    }

    #[test]
    fn single_token_is_affine_of_its_row() {
        let m = model(0);
        let p = params(&m, 1);
        let got = m.logits(&p, &[7]).unwrap();
        let want = affine(p.get(EMBEDDING).unwrap().row(7), p.get(W_OUT).unwrap(), p.get(B_OUT).unwrap().data()).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn mean_invariance_under_duplication() {
        let m = model(0);
        let p = params(&m, 2);
        let doc = [3, 9, 4];
        let twice = [3, 9, 4, 3, 9, 4];
        let (a, b) = (m.logits(&p, &doc).unwrap(), m.logits(&p, &twice).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // with bigrams, duplicating the feature multiset is still invariant
        let m = model(16);
        let p = params(&m, 2);
        let f = m.features(&doc);
        let ff: Vec<Feature> = f.iter().chain(&f).copied().collect();
        let (a, b) = (m.logits_from_features(&p, &f).unwrap(), m.logits_from_features(&p, &ff).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_invariant_without_bigrams() {
        let m = model(0);
        let p = params(&m, 3);
        let a = m.logits(&p, &[3, 7, 11, 2]).unwrap();
        let b = m.logits(&p, &[3, 11, 7, 2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_document_uses_unk() {
        let m = model(16);
        let p = params(&m, 4);
        assert_eq!(m.features(&[]), vec![Feature::Word(UNK)]);
        assert_eq!(m.logits(&p, &[]).unwrap(), m.logits(&p, &[UNK]).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(16);
        let p = params(&m, 5);
        let ids = [3, 8, 8, 15, 2, 19];
        let logits = m.logits(&p, &ids).unwrap();
        let (_, dl) = softmax_cross_entropy(&logits, 1).unwrap();
        let mut g = p.zeros_like();
        m.backward(&p, &ids, &dl, &mut g).unwrap();
        let loss = |q: &ParamSet<f64>| Ok(softmax_cross_entropy(&m.logits(&q.cast::<TwoFloat>(), &ids)?, 1)?.0);
        let report = grad_check(&p, &g, loss, 200, 1e-5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(report.max_rel_error < 1e-5, "{:?}", report.worst());
    }
}
