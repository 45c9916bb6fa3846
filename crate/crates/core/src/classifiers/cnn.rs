use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_ids, check_shapes, EMBEDDING};
use crate::error::{Error, Result};
use crate::numerics::{dot, ParamSet, Real, Tensor};
use crate::util::{glorot_range, rng_for, uniform_tensor};

const W_OUT: &str = "w_out";
const B_OUT: &str = "b_out";

fn filter_name(width: usize) -> String {
    format!("conv{width}_w")
}

fn bias_name(width: usize) -> String {
    format!("conv{width}_b")
}

/// Kim-style convolutional classifier: one filter bank per window width,
/// ReLU, max-over-time pooling, affine output over the concatenated maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub maps: usize,
    /// Dropout on the pooled features during training; 0 disables it.
    #[serde(default)]
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrace<F> {
    /// Sequence length after padding to the widest filter.
    pub padded_len: usize,
    /// Per width, the winning window start for each map.
    pub argmax: Vec<Vec<usize>>,
    /// Concatenated post-ReLU maxima.
    pub pooled: Vec<F>,
    /// Inverted-dropout mask applied to `pooled` (all ones at inference).
    pub mask: Vec<F>,
}

impl Cnn {
    pub fn new(vocab_size: usize, embed_dim: usize) -> Self {
        Cnn { vocab_size, embed_dim, widths: vec![3, 4, 5], maps: 100, dropout: 0.0 }
    }

    fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    fn features(&self) -> usize {
        self.widths.len() * self.maps
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let d = self.embed_dim;
        let mut s = vec![(EMBEDDING.to_string(), vec![self.vocab_size, d])];
        for &k in &self.widths {
            s.push((filter_name(k), vec![self.maps, k * d]));
            s.push((bias_name(k), vec![self.maps]));
        }
        s.push((W_OUT.into(), vec![2, self.features()]));
        s.push((B_OUT.into(), vec![2]));
        s
    }

    fn validate(&self) -> Result<()> {
        let mut w = self.widths.clone();
        w.sort_unstable();
        w.dedup();
        if w.len() != self.widths.len() || w.is_empty() || w[0] == 0 || self.maps == 0 {
            return Err(Error::Config(format!("invalid filter widths {:?} × {} maps", self.widths, self.maps)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn init(&self, embedding: Tensor<f32>, seed: u64) -> Result<ParamSet<f32>> {
        self.validate()?;
        let mut rng = rng_for(seed, "cnn-init");
        let mut p = ParamSet::new();
        for (name, shape) in self.shapes() {
            let t = if name == EMBEDDING {
                embedding.clone()
            } else if shape.len() == 1 {
                Tensor::zeros(&shape)
            } else {
                uniform_tensor(&shape, glorot_range(shape[1], shape[0]), &mut rng)
            };
            p.insert(name, t)?;
        }
        self.check(&p)?;
        Ok(p)
    }

    pub fn check<F: Real>(&self, p: &ParamSet<F>) -> Result<()> {
        let shapes = self.shapes();
        let refs: Vec<(&str, Vec<usize>)> = shapes.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        check_shapes(p, &refs)
    }

    fn window<F: Real>(&self, e: &Tensor<F>, ids: &[u32], start: usize, width: usize) -> Vec<F> {
        let d = self.embed_dim;
        let mut w = vec![F::zero(); width * d];
        for o in 0..width {
            // positions past the end are zero padding
            if let Some(&id) = ids.get(start + o) {
                w[o * d..(o + 1) * d].copy_from_slice(e.row(id as usize));
            }
        }
        w
    }

    /// Inference forward pass (no dropout).
    pub fn forward<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<(Vec<F>, CnnTrace<F>)> {
        self.forward_with_mask(p, ids, None)
    }

    /// Training forward pass; draws a dropout mask from `rng` when dropout
    /// is enabled.
    pub fn forward_train<F: Real, R: Rng + ?Sized>(
        &self,
        p: &ParamSet<F>,
        ids: &[u32],
        rng: &mut R,
    ) -> Result<(Vec<F>, CnnTrace<F>)> {
        if self.dropout == 0.0 {
            return self.forward(p, ids);
        }
        let keep = 1.0 - self.dropout;
        let mask = (0..self.features())
            .map(|_| if rng.gen::<f64>() < keep { F::of(1.0 / keep) } else { F::zero() })
            .collect();
        self.forward_with_mask(p, ids, Some(mask))
    }

    fn forward_with_mask<F: Real>(
        &self,
        p: &ParamSet<F>,
        ids: &[u32],
        mask: Option<Vec<F>>,
    ) -> Result<(Vec<F>, CnnTrace<F>)> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.validate()?;
        self.check(p)?;
        check_ids(ids, self.vocab_size)?;
        let e = p.get(EMBEDDING)?;
        let padded_len = ids.len().max(self.max_width());
        let mut pooled = Vec::with_capacity(self.features());
        let mut argmax = Vec::with_capacity(self.widths.len());
        for &k in &self.widths {
            let (w, b) = (p.get(&filter_name(k))?, p.get(&bias_name(k))?.data());
            let mut best = vec![F::zero(); self.maps];
            let mut best_at = vec![0usize; self.maps];
            let mut seen = vec![false; self.maps];
            for t in 0..=padded_len - k {
                let win = self.window(e, ids, t, k);
                for j in 0..self.maps {
                    let a = (b[j] + dot(w.row(j), &win)).max(F::zero());
                    if !seen[j] || a > best[j] {
                        best[j] = a;
                        best_at[j] = t;
                        seen[j] = true;
                    }
                }
            }
            pooled.extend(best);
            argmax.push(best_at);
        }
        let mask = mask.unwrap_or_else(|| vec![F::one(); pooled.len()]);
        let hidden: Vec<F> = pooled.iter().zip(&mask).map(|(&a, &m)| a * m).collect();
        let mut logits = p.get(B_OUT)?.data().to_vec();
        p.get(W_OUT)?.matvec_acc(&hidden, &mut logits);
        Ok((logits, CnnTrace { padded_len, argmax, pooled, mask }))
    }

    pub fn backward<F: Real>(
        &self,
        p: &ParamSet<F>,
        ids: &[u32],
        trace: &CnnTrace<F>,
        dlogits: &[F],
        grads: &mut ParamSet<F>,
    ) -> Result<()> {
        let nf = self.features();
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if trace.padded_len != ids.len().max(self.max_width())
            || trace.pooled.len() != nf
            || trace.mask.len() != nf
            || trace.argmax.len() != self.widths.len()
        {
            return Err(Error::Trace(format!("trace does not describe a length-{} sequence", ids.len())));
        }
        self.check(p)?;
        self.check(grads)?;
        check_ids(ids, self.vocab_size)?;

        let hidden: Vec<F> = trace.pooled.iter().zip(&trace.mask).map(|(&a, &m)| a * m).collect();
        {
            let [g_w, g_b] = grads.get_many_mut([W_OUT, B_OUT])?;
            g_w.add_outer(dlogits, &hidden);
            for (g, &dl) in g_b.data_mut().iter_mut().zip(dlogits) {
                *g += dl;
            }
        }
        let mut dhidden = vec![F::zero(); nf];
        p.get(W_OUT)?.matvec_t_acc(dlogits, &mut dhidden);

        let d = self.embed_dim;
        let e = p.get(EMBEDDING)?;
        let mut de: Vec<(u32, Vec<F>)> = Vec::new();
        for (bank, &k) in self.widths.iter().enumerate() {
            let w = p.get(&filter_name(k))?;
            let (fname, bname) = (filter_name(k), bias_name(k));
            let [g_w, g_b] = grads.get_many_mut([fname.as_str(), bname.as_str()])?;
            for j in 0..self.maps {
                let f = bank * self.maps + j;
                // ReLU: no gradient unless the winning activation is positive
                if trace.pooled[f] <= F::zero() {
                    continue;
                }
                let dz = dhidden[f] * trace.mask[f];
                if dz == F::zero() {
                    continue;
                }
                let t = trace.argmax[bank][j];
                if t + k > trace.padded_len {
                    return Err(Error::Trace(format!("window start {t} out of range")));
                }
                let win = self.window(e, ids, t, k);
                crate::numerics::axpy(dz, &win, g_w.row_mut(j));
                g_b.data_mut()[j] += dz;
                for o in 0..k {
                    if let Some(&id) = ids.get(t + o) {
                        let slice: Vec<F> = w.row(j)[o * d..(o + 1) * d].iter().map(|&x| x * dz).collect();
                        de.push((id, slice));
                    }
                }
            }
        }
        let g_e = grads.get_mut(EMBEDDING)?;
        for (id, v) in de {
            for (g, x) in g_e.row_mut(id as usize).iter_mut().zip(v) {
                *g += x;
            }
        }
        Ok(())
    }

    pub fn logits<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<Vec<F>> {
        Ok(self.forward(p, ids)?.0)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::classifiers::max_pool;
    use crate::numerics::{grad_check, softmax_cross_entropy, TwoFloat};

    fn tiny() -> Cnn {
        Cnn { vocab_size: 20, embed_dim: 6, widths: vec![3, 4, 5], maps: 4, dropout: 0.0 }
    }

    fn params(m: &Cnn, seed: u64) -> ParamSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = uniform_tensor(&[m.vocab_size, m.embed_dim], 0.5, &mut rng);
        let mut p = m.init(emb, seed).unwrap().cast::<f64>();
        for (name, t) in p.iter_mut() {
            if name.ends_with("_b") {
                for x in t.data_mut() {
                    *x = rng.gen_range(0.0..0.2);
                }
            }
        }
        p
    }

    #[test]
    fn zero_filters_give_output_bias() {
        let m = tiny();
        let mut p = params(&m, 1);
        for (name, t) in p.iter_mut() {
            if name != B_OUT {
                t.fill(0.0);
            }
        }
        for x in p.get_mut(B_OUT).unwrap().data_mut() {
            *x = 0.25;
        }
        assert_eq!(m.logits(&p, &[2, 3, 4, 5, 6, 7]).unwrap(), vec![0.25, 0.25]);
    }

    #[test]
    fn short_sequences_are_padded() {
        let m = tiny();
        let p = params(&m, 2);
        let (logits, trace) = m.forward(&p, &[4, 9]).unwrap();
        assert_eq!(trace.padded_len, 5);
        assert!(logits.iter().all(|x| x.is_finite()));
        assert!(matches!(m.forward(&p, &[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = tiny();
        let p = params(&m, 3);
        for ids in [vec![3u32, 8, 8, 15, 2, 19, 6, 11, 5], vec![7, 2]] {
            let (logits, trace) = m.forward(&p, &ids).unwrap();
            let (_, dl) = softmax_cross_entropy(&logits, 0).unwrap();
            let mut g = p.zeros_like();
            m.backward(&p, &ids, &trace, &dl, &mut g).unwrap();
            let loss = |q: &ParamSet<f64>| Ok(softmax_cross_entropy(&m.logits(&q.cast::<TwoFloat>(), &ids)?, 0)?.0);
            let report = grad_check(&p, &g, loss, 300, 1e-5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert!(report.max_rel_error < 1e-5, "{:?}", report.worst());
        }
    }

    #[test]
    fn pooling_dominance() {
        let m = tiny();
        let p = params(&m, 4);
        let e = p.get(EMBEDDING).unwrap();
        let ids = [1u32, 5, 9, 13, 17, 3, 7];
        let (logits, trace) = m.forward(&p, &ids).unwrap();
        // per-window activations of the width-3 bank
        let w = p.get(&filter_name(3)).unwrap();
        let b = p.get(&bias_name(3)).unwrap().data();
        let mut acts: Vec<Vec<f64>> = (0..=ids.len() - 3)
            .map(|t| {
                let win = m.window(e, &ids, t, 3);
                (0..m.maps).map(|j| (b[j] + dot(w.row(j), &win)).max(0.0)).collect()
            })
            .collect();
        let (pooled, argmax) = max_pool(&acts);
        assert_eq!(pooled[..], trace.pooled[..m.maps]);
        assert_eq!(argmax, trace.argmax[0]);
        for j in 0..m.maps {
            for t in 0..acts.len() {
                if t != argmax[j] {
                    acts[t][j] += (pooled[j] - acts[t][j]) * 0.5;
                }
            }
        }
        assert_eq!(max_pool(&acts).0, pooled);
        let _ = logits;
    }

    #[test]
    fn dropout_is_seeded_and_inverted() {
        let mut m = tiny();
        m.dropout = 0.5;
        let p = params(&m, 5);
        let ids = [2u32, 4, 6, 8, 10, 12];
        let (a, ta) = m.forward_train(&p, &ids, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (b, _) = m.forward_train(&p, &ids, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(ta.mask.iter().all(|&x| x == 0.0 || x == 2.0));
        let (_, tinf) = m.forward(&p, &ids).unwrap();
        assert!(tinf.mask.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn rejects_duplicate_widths() {
        let m = Cnn { widths: vec![3, 3], ..tiny() };
        assert!(m.init(Tensor::zeros(&[20, 6]), 0).is_err());
    }
}
