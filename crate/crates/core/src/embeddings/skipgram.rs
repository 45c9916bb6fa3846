//! Skip-gram with negative sampling over word + character n-gram inputs.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, log_sigmoid, sigmoid, Real, Tensor};
use crate::text::{SubwordHasher, Vocabulary};
use crate::util::{rng_for, uniform_tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub subsample_t: f64,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_count: u64,
    pub hasher: SubwordHasher,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            subsample_t: 1e-4,
            epochs: 5,
            initial_lr: 0.025,
            min_count: 5,
            hasher: SubwordHasher::default(),
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.window == 0
            || self.epochs == 0
            || self.subsample_t <= 0.0
            || self.initial_lr <= 0.0
        {
            return Err(Error::Config(format!("invalid skip-gram config {self:?}")));
        }
        SubwordHasher::new(self.hasher.n_min, self.hasher.n_max, self.hasher.bucket_count)?;
        Ok(())
    }
}

/// Draws word ids with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    ids: Vec<u32>,
    probs: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Result<Self> {
        let ids: Vec<u32> = (2..vocab.len() as u32).filter(|&i| vocab.count(i) > 0).collect();
        if ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let weights: Vec<f64> = ids.iter().map(|&i| (vocab.count(i) as f64).powf(0.75)).collect();
        let z: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / z).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(NegativeSampler { ids, probs, dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.ids[self.dist.sample(rng)]
    }

    /// `(id, probability)` pairs of the target distribution.
    pub fn distribution(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.ids.iter().copied().zip(self.probs.iter().copied())
    }
}

/// Probability of discarding a token with relative frequency `f`.
pub fn discard_probability(f: f64, t: f64) -> f64 {
    if f <= t {
        0.0
    } else {
        (1.0 - (t / f).sqrt()).max(0.0)
    }
}

/// Loss and gradients of one negative-sampling step.
///
/// The hidden vector is the mean of `inputs`; `outputs[0]` is the observed
/// context word and the rest are noise words. The loss is
/// `-ln σ(h·o₀) - Σ ln σ(-h·oₖ)`.
pub struct SgnsGradients<F> {
    pub loss: F,
    /// Gradient for each input row (identical, since h is their mean).
    pub d_input: Vec<F>,
    pub d_outputs: Vec<Vec<F>>,
}

pub fn sgns_gradients<F: Real>(inputs: &[&[F]], outputs: &[&[F]]) -> SgnsGradients<F> {
    let d = inputs[0].len();
    let n = F::of(inputs.len() as f64);
    let mut h = vec![F::zero(); d];
    for row in inputs {
        axpy(F::one(), row, &mut h);
    }
    h.iter_mut().for_each(|x| *x /= n);

    let mut loss = F::zero();
    let mut d_h = vec![F::zero(); d];
    let mut d_outputs = Vec::with_capacity(outputs.len());
    for (k, o) in outputs.iter().enumerate() {
        let label = if k == 0 { F::one() } else { F::zero() };
        let s = dot(&h, o);
        loss -= if k == 0 { log_sigmoid(s) } else { log_sigmoid(-s) };
        let coef = sigmoid(s) - label;
        axpy(coef, o, &mut d_h);
        d_outputs.push(h.iter().map(|&x| coef * x).collect());
    }
    let d_input = d_h.into_iter().map(|g| g / n).collect();
    SgnsGradients { loss, d_input, d_outputs }
}

/// One SGD step on the output rows of `targets` (context first, then
/// negatives). Leaves `-lr · ∂loss/∂h` in `grad_h` and returns the loss.
fn apply_pair(hidden: &[f32], targets: &[u32], word_out: &mut Tensor<f32>, grad_h: &mut [f32], lr: f32) -> f32 {
    grad_h.fill(0.0);
    let mut loss = 0.0;
    for (k, &t) in targets.iter().enumerate() {
        let out = word_out.row_mut(t as usize);
        let s = dot(hidden, out);
        let label = if k == 0 { 1.0 } else { 0.0 };
        loss -= if k == 0 { log_sigmoid(s) } else { log_sigmoid(-s) };
        let g = lr * (label - sigmoid(s));
        axpy(g, out, grad_h);
        axpy(g, hidden, out);
    }
    loss
}

/// Trained input/output tables plus per-epoch mean loss.
pub struct SkipgramOutcome {
    pub table: EmbeddingTable,
    pub output_vectors: Tensor<f32>,
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: Vec<u64>,
}

/// Trains subword skip-gram vectors on `docs` (already tokenized).
///
/// Tokens outside `vocab` are skipped. Single-threaded and deterministic in
/// `(docs, vocab, cfg, seed)`.
pub fn train_skipgram(docs: &[Vec<String>], vocab: &Vocabulary, cfg: &SkipgramConfig, seed: u64) -> Result<SkipgramOutcome> {
    cfg.validate()?;
    let corpus: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.get(t)).collect::<Vec<_>>())
        .filter(|d: &Vec<u32>| !d.is_empty())
        .collect();
    let total_tokens: u64 = corpus.iter().map(|d| d.len() as u64).sum();
    if total_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    let corpus_counts = crate::text::count_tokens(docs.iter().map(Vec::as_slice));
    for id in 2..vocab.len() as u32 {
        let tok = vocab.token(id).unwrap();
        if vocab.count(id) > 0 && !corpus_counts.contains_key(tok) {
            return Err(Error::Alignment(format!(
                "vocabulary word `{tok}` does not occur in the training corpus"
            )));
        }
    }

    let d = cfg.dim;
    let hasher = cfg.hasher;
    let mut rng = rng_for(seed, "skipgram");
    let range = 1.0 / d as f64;
    let mut word_in: Tensor<f32> = uniform_tensor(&[vocab.len(), d], range, &mut rng);
    let mut sub_in: Tensor<f32> = uniform_tensor(&[hasher.bucket_count as usize, d], range, &mut rng);
    let mut word_out: Tensor<f32> = Tensor::zeros(&[vocab.len(), d]);

    let subwords: Vec<Vec<u32>> = (0..vocab.len() as u32)
        .map(|id| if id < 2 { vec![] } else { hasher.ids(vocab.token(id).unwrap()) })
        .collect();
    let total_count: f64 = (2..vocab.len() as u32).map(|i| vocab.count(i) as f64).sum();
    let keep_prob: Vec<f64> = (0..vocab.len() as u32)
        .map(|i| 1.0 - discard_probability(vocab.count(i) as f64 / total_count, cfg.subsample_t))
        .collect();
    let sampler = NegativeSampler::new(vocab)?;

    let planned = (cfg.epochs as u64 * total_tokens) as f64;
    let mut processed = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut pairs_per_epoch = Vec::with_capacity(cfg.epochs);
    let mut kept = Vec::new();
    let mut targets: Vec<u32> = Vec::with_capacity(cfg.negatives + 1);
    let mut grad_in = vec![0f32; d];
    let mut hidden = vec![0f32; d];

    for _epoch in 0..cfg.epochs {
        let mut loss_sum = 0f64;
        let mut pairs = 0u64;
        for doc in &corpus {
            let lr = (cfg.initial_lr * (1.0 - processed as f64 / planned)).max(cfg.initial_lr * 1e-4) as f32;
            processed += doc.len() as u64;
            kept.clear();
            kept.extend(doc.iter().copied().filter(|&w| rng.gen::<f64>() < keep_prob[w as usize]));
            for i in 0..kept.len() {
                let center = kept[i] as usize;
                let b = rng.gen_range(1..=cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(kept.len() - 1);
                let n_in = 1 + subwords[center].len();
                let inv_n = 1.0 / n_in as f32;
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = kept[j];
                    targets.clear();
                    targets.push(context);
                    for _ in 0..cfg.negatives {
                        let neg = sampler.sample(&mut rng);
                        if neg != context {
                            targets.push(neg);
                        }
                    }

                    hidden.copy_from_slice(word_in.row(center));
                    for &s in &subwords[center] {
                        axpy(1.0, sub_in.row(s as usize), &mut hidden);
                    }
                    hidden.iter_mut().for_each(|x| *x *= inv_n);

                    loss_sum += apply_pair(&hidden, &targets, &mut word_out, &mut grad_in, lr) as f64;
                    pairs += 1;
                    // every input row takes the full step on h, as in fastText's
                    // skip-gram; the exact per-row gradient is 1/n of this
                    axpy(1.0, &grad_in, word_in.row_mut(center));
                    for &s in &subwords[center] {
                        axpy(1.0, &grad_in, sub_in.row_mut(s as usize));
                    }
                }
            }
        }
        let mean = if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 };
        log::debug!("skip-gram epoch {}: mean loss {mean:.5} over {pairs} pairs", epoch_losses.len() + 1);
        epoch_losses.push(mean);
        pairs_per_epoch.push(pairs);
    }
    if !word_in.all_finite() || !sub_in.all_finite() {
        return Err(Error::Numerical("skip-gram vectors diverged".into()));
    }
    let table = EmbeddingTable::skipgram(word_in, sub_in, hasher, vocab)?;
    Ok(SkipgramOutcome { table, output_vectors: word_out, epoch_losses, pairs_per_epoch })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::relative_error;

    fn small_cfg() -> SkipgramConfig {
        SkipgramConfig {
            dim: 16,
            epochs: 3,
            min_count: 1,
            hasher: SubwordHasher::new(3, 6, 1 << 10).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn triple_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 6;
        let mk = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.gen_range(-0.8..0.8)).collect::<Vec<f64>>();
        let inputs: Vec<Vec<f64>> = (0..3).map(|_| mk(&mut rng)).collect();
        let outputs: Vec<Vec<f64>> = (0..2).map(|_| mk(&mut rng)).collect();
        let loss = |i: &[Vec<f64>], o: &[Vec<f64>]| {
            let ir: Vec<&[f64]> = i.iter().map(Vec::as_slice).collect();
            let or: Vec<&[f64]> = o.iter().map(Vec::as_slice).collect();
            sgns_gradients(&ir, &or).loss
        };
        let ir: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let or: Vec<&[f64]> = outputs.iter().map(Vec::as_slice).collect();
        let g = sgns_gradients(&ir, &or);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for r in 0..inputs.len() {
            for c in 0..d {
                let (mut up, mut down) = (inputs.clone(), inputs.clone());
                up[r][c] += h;
                down[r][c] -= h;
                let num = (loss(&up, &outputs) - loss(&down, &outputs)) / (2.0 * h);
                worst = worst.max(relative_error(g.d_input[c], num));
            }
        }
        for r in 0..outputs.len() {
            for c in 0..d {
                let (mut up, mut down) = (outputs.clone(), outputs.clone());
                up[r][c] += h;
                down[r][c] -= h;
                let num = (loss(&inputs, &up) - loss(&inputs, &down)) / (2.0 * h);
                worst = worst.max(relative_error(g.d_outputs[r][c], num));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn trainer_step_follows_analytic_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 5;
        let hidden: Vec<f32> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut out: Tensor<f32> = uniform_tensor(&[4, d], 0.5, &mut rng);
        let before = out.clone();
        let targets = [2u32, 0, 3];
        let lr = 0.1f32;
        let mut grad_h = vec![0f32; d];
        let loss = apply_pair(&hidden, &targets, &mut out, &mut grad_h, lr);

        let outs: Vec<&[f32]> = targets.iter().map(|&t| before.row(t as usize)).collect();
        let g = sgns_gradients(&[&hidden], &outs);
        assert!((loss - g.loss).abs() < 1e-6);
        for c in 0..d {
            assert!((grad_h[c] + lr * g.d_input[c]).abs() < 1e-6);
        }
        for (k, &t) in targets.iter().enumerate() {
            for c in 0..d {
                let moved = out.row(t as usize)[c] - before.row(t as usize)[c];
                assert!((moved + lr * g.d_outputs[k][c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn discard_rule() {
        assert_eq!(discard_probability(1e-5, 1e-4), 0.0);
        assert_eq!(discard_probability(1e-4, 1e-4), 0.0);
        assert!((discard_probability(0.01, 1e-4) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn repeated_pair_loss_decreases() {
        let docs: Vec<Vec<String>> = (0..200).map(|_| vec!["a".to_string(), "b".to_string()]).collect();
        let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice), 1).unwrap();
        // with two words each has frequency 0.5, so subsampling would drop nearly everything
        let cfg = SkipgramConfig { subsample_t: 1.0, ..small_cfg() };
        let out = train_skipgram(&docs, &vocab, &cfg, 4).unwrap();
        assert!(out.pairs_per_epoch.iter().all(|&p| p > 0));
        let l = &out.epoch_losses;
        assert!(l[1] < l[0] && l[2] < l[1], "{l:?}");
    }

    #[test]
    fn deterministic_and_checked() {
        let docs: Vec<Vec<String>> = (0..50)
            .map(|i| (0..8).map(|j| format!("t{}", (i * 3 + j) % 17)).collect())
            .collect();
        let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice), 1).unwrap();
        let a = train_skipgram(&docs, &vocab, &small_cfg(), 9).unwrap();
        let b = train_skipgram(&docs, &vocab, &small_cfg(), 9).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.epoch_losses, b.epoch_losses);

        let other: Vec<Vec<String>> = vec![vec!["zz".into()]];
        assert!(matches!(train_skipgram(&other, &vocab, &small_cfg(), 0), Err(Error::EmptyCorpus)));
        let partial = vec![docs[0].clone()];
        assert!(matches!(train_skipgram(&partial, &vocab, &small_cfg(), 0), Err(Error::Alignment(_))));
    }
}
