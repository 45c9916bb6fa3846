use serde::{Deserialize, Serialize};

use super::{check_ids, check_shapes, max_pool, EMBEDDING};
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Real, Tensor};
use crate::util::{glorot_range, rng_for, uniform_tensor};

const W_L: &str = "w_l";
const W_SL: &str = "w_sl";
const W_R: &str = "w_r";
const W_SR: &str = "w_sr";
const C_LEFT: &str = "c_left_init";
const C_RIGHT: &str = "c_right_init";
const W2: &str = "w2";
const B2: &str = "b2";
const W4: &str = "w4";
const B4: &str = "b4";

/// Recurrent convolutional network: left and right context recurrences
/// around each word, a tanh projection of `[c_l; e; c_r]`, element-wise
/// max pooling over positions, and a two-class affine output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rcnn {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Context (recurrent state) size.
    pub context: usize,
    /// Latent layer size.
    pub hidden: usize,
}

/// Intermediate values of one forward pass, indexed by position.
#[derive(Debug, Clone, PartialEq)]
pub struct RcnnTrace<F> {
    pub left: Vec<Vec<F>>,
    pub right: Vec<Vec<F>>,
    pub concat: Vec<Vec<F>>,
    pub latent: Vec<Vec<F>>,
    pub pooled: Vec<F>,
    pub argmax: Vec<usize>,
}

fn tanh_in_place<F: Real>(v: &mut [F]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

impl Rcnn {
    fn shapes(&self) -> [(&'static str, Vec<usize>); 11] {
        let (v, d, c, h) = (self.vocab_size, self.embed_dim, self.context, self.hidden);
        [
            (EMBEDDING, vec![v, d]),
            (W_L, vec![c, c]),
            (W_SL, vec![c, d]),
            (W_R, vec![c, c]),
            (W_SR, vec![c, d]),
            (C_LEFT, vec![c]),
            (C_RIGHT, vec![c]),
            (W2, vec![h, 2 * c + d]),
            (B2, vec![h]),
            (W4, vec![2, h]),
            (B4, vec![2]),
        ]
    }

    /// Glorot-uniform matrices, zero biases, boundary contexts uniform in
    /// `±1/sqrt(c)`. `embedding` must be `vocab_size × embed_dim`.
    pub fn init(&self, embedding: Tensor<f32>, seed: u64) -> Result<ParamSet<f32>> {
        let mut rng = rng_for(seed, "rcnn-init");
        let mut p = ParamSet::new();
        for (name, shape) in self.shapes() {
            let t = match name {
                EMBEDDING => embedding.clone(),
                C_LEFT | C_RIGHT => uniform_tensor(&shape, 1.0 / (self.context as f64).sqrt(), &mut rng),
                B2 | B4 => Tensor::zeros(&shape),
                _ => uniform_tensor(&shape, glorot_range(shape[1], shape[0]), &mut rng),
            };
            p.insert(name, t)?;
        }
        self.check(&p)?;
        Ok(p)
    }

    pub fn check<F: Real>(&self, p: &ParamSet<F>) -> Result<()> {
        check_shapes(p, &self.shapes())
    }

    pub fn forward<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<(Vec<F>, RcnnTrace<F>)> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        self.check(p)?;
        check_ids(ids, self.vocab_size)?;
        let (c, h) = (self.context, self.hidden);
        let e = p.get(EMBEDDING)?;
        let emb = |i: usize| e.row(ids[i] as usize);

        let mut left = vec![p.get(C_LEFT)?.data().to_vec()];
        let (w_l, w_sl) = (p.get(W_L)?, p.get(W_SL)?);
        for i in 1..n {
            let mut s = vec![F::zero(); c];
            w_l.matvec_acc(&left[i - 1], &mut s);
            w_sl.matvec_acc(emb(i - 1), &mut s);
            tanh_in_place(&mut s);
            left.push(s);
        }

        let mut right = vec![Vec::new(); n];
        right[n - 1] = p.get(C_RIGHT)?.data().to_vec();
        let (w_r, w_sr) = (p.get(W_R)?, p.get(W_SR)?);
        for i in (0..n - 1).rev() {
            let mut s = vec![F::zero(); c];
            w_r.matvec_acc(&right[i + 1], &mut s);
            w_sr.matvec_acc(emb(i + 1), &mut s);
            tanh_in_place(&mut s);
            right[i] = s;
        }

        let (w2, b2) = (p.get(W2)?, p.get(B2)?.data());
        let mut concat = Vec::with_capacity(n);
        let mut latent = Vec::with_capacity(n);
        for i in 0..n {
            let x: Vec<F> = left[i].iter().chain(emb(i)).chain(&right[i]).copied().collect();
            let mut y = b2.to_vec();
            w2.matvec_acc(&x, &mut y);
            tanh_in_place(&mut y);
            concat.push(x);
            latent.push(y);
        }

        let (pooled, argmax) = max_pool(&latent);
        debug_assert_eq!(pooled.len(), h);
        let mut logits = p.get(B4)?.data().to_vec();
        p.get(W4)?.matvec_acc(&pooled, &mut logits);
        Ok((logits, RcnnTrace { left, right, concat, latent, pooled, argmax }))
    }

    /// Accumulates the gradient of `dlogits · logits` into `grads`
    /// (back-propagation through the full sequence, no truncation).
    pub fn backward<F: Real>(
        &self,
        p: &ParamSet<F>,
        ids: &[u32],
        trace: &RcnnTrace<F>,
        dlogits: &[F],
        grads: &mut ParamSet<F>,
    ) -> Result<()> {
        let n = ids.len();
        let (c, d, h) = (self.context, self.embed_dim, self.hidden);
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        if trace.left.len() != n
            || trace.right.len() != n
            || trace.concat.len() != n
            || trace.latent.len() != n
            || trace.pooled.len() != h
            || trace.argmax.len() != h
            || trace.argmax.iter().any(|&a| a >= n)
            || trace.concat.iter().any(|x| x.len() != 2 * c + d)
        {
            return Err(Error::Trace(format!("trace does not describe a length-{n} sequence")));
        }
        if dlogits.len() != 2 {
            return Err(Error::Shape(format!("dlogits has length {}", dlogits.len())));
        }
        self.check(p)?;
        self.check(grads)?;
        check_ids(ids, self.vocab_size)?;

        let [g_w4, g_b4, g_w2, g_b2] = grads.get_many_mut([W4, B4, W2, B2])?;
        g_w4.add_outer(dlogits, &trace.pooled);
        for (g, &dl) in g_b4.data_mut().iter_mut().zip(dlogits) {
            *g += dl;
        }
        let mut dpooled = vec![F::zero(); h];
        p.get(W4)?.matvec_t_acc(dlogits, &mut dpooled);

        // max pooling routes each coordinate to its argmax position
        let mut dz = vec![vec![F::zero(); h]; n];
        for (k, &pos) in trace.argmax.iter().enumerate() {
            let y = trace.latent[pos][k];
            dz[pos][k] = dpooled[k] * (F::one() - y * y);
        }
        let w2 = p.get(W2)?;
        let mut dcl = vec![vec![F::zero(); c]; n];
        let mut dcr = vec![vec![F::zero(); c]; n];
        let mut de = vec![vec![F::zero(); d]; n];
        for i in 0..n {
            if dz[i].iter().all(|&v| v == F::zero()) {
                continue;
            }
            g_w2.add_outer(&dz[i], &trace.concat[i]);
            for (g, &v) in g_b2.data_mut().iter_mut().zip(&dz[i]) {
                *g += v;
            }
            let mut dx = vec![F::zero(); 2 * c + d];
            w2.matvec_t_acc(&dz[i], &mut dx);
            for (a, &b) in dcl[i].iter_mut().zip(&dx[..c]) {
                *a += b;
            }
            for (a, &b) in de[i].iter_mut().zip(&dx[c..c + d]) {
                *a += b;
            }
            for (a, &b) in dcr[i].iter_mut().zip(&dx[c + d..]) {
                *a += b;
            }
        }

        let e = p.get(EMBEDDING)?;
        {
            let (w_l, w_sl) = (p.get(W_L)?, p.get(W_SL)?);
            let [g_wl, g_wsl, g_cl] = grads.get_many_mut([W_L, W_SL, C_LEFT])?;
            for i in (1..n).rev() {
                let s = &trace.left[i];
                let dpre: Vec<F> = dcl[i].iter().zip(s).map(|(&g, &v)| g * (F::one() - v * v)).collect();
                g_wl.add_outer(&dpre, &trace.left[i - 1]);
                g_wsl.add_outer(&dpre, e.row(ids[i - 1] as usize));
                let (before, _) = dcl.split_at_mut(i);
                w_l.matvec_t_acc(&dpre, &mut before[i - 1]);
                w_sl.matvec_t_acc(&dpre, &mut de[i - 1]);
            }
            for (g, &v) in g_cl.data_mut().iter_mut().zip(&dcl[0]) {
                *g += v;
            }
        }
        {
            let (w_r, w_sr) = (p.get(W_R)?, p.get(W_SR)?);
            let [g_wr, g_wsr, g_cr] = grads.get_many_mut([W_R, W_SR, C_RIGHT])?;
            for i in 0..n - 1 {
                let s = &trace.right[i];
                let dpre: Vec<F> = dcr[i].iter().zip(s).map(|(&g, &v)| g * (F::one() - v * v)).collect();
                g_wr.add_outer(&dpre, &trace.right[i + 1]);
                g_wsr.add_outer(&dpre, e.row(ids[i + 1] as usize));
                let (_, after) = dcr.split_at_mut(i + 1);
                w_r.matvec_t_acc(&dpre, &mut after[0]);
                w_sr.matvec_t_acc(&dpre, &mut de[i + 1]);
            }
            for (g, &v) in g_cr.data_mut().iter_mut().zip(&dcr[n - 1]) {
                *g += v;
            }
        }

        let g_e = grads.get_mut(EMBEDDING)?;
        for (i, &id) in ids.iter().enumerate() {
            for (g, &v) in g_e.row_mut(id as usize).iter_mut().zip(&de[i]) {
                *g += v;
            }
        }
        Ok(())
    }

    pub fn logits<F: Real>(&self, p: &ParamSet<F>, ids: &[u32]) -> Result<Vec<F>> {
        Ok(self.forward(p, ids)?.0)
    }
}

/// Recomputes the head from a pooled vector; used to check pooling behavior.
#[cfg(test)]
pub(crate) fn head<F: Real>(p: &ParamSet<F>, pooled: &[F]) -> Result<Vec<F>> {
    let w4 = p.get(W4)?;
    let b4 = p.get(B4)?.data();
    Ok((0..2).map(|r| b4[r] + crate::numerics::dot(w4.row(r), pooled)).collect())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::{grad_check, softmax_cross_entropy, TwoFloat};

    const TINY: Rcnn = Rcnn { vocab_size: 20, embed_dim: 8, context: 8, hidden: 8 };

    fn tiny_params(seed: u64) -> ParamSet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = uniform_tensor(&[20, 8], 0.5, &mut rng);
        let mut p = TINY.init(emb, seed).unwrap().cast::<f64>();
        // non-zero biases and boundary vectors so every path is exercised
        for name in [B2, B4, C_LEFT, C_RIGHT] {
            for x in p.get_mut(name).unwrap().data_mut() {
                *x = rng.gen_range(-0.3..0.3);
            }
        }
        p
    }

    fn mat(p: &ParamSet<f64>, name: &str) -> Vec<Vec<f64>> {
        let t = p.get(name).unwrap();
        (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
    }

    /// Straightforward re-implementation with explicit loops.
    fn reference_logits(p: &ParamSet<f64>, ids: &[u32]) -> Vec<f64> {
        let e = mat(p, EMBEDDING);
        let (wl, wsl, wr, wsr, w2, w4) =
            (mat(p, W_L), mat(p, W_SL), mat(p, W_R), mat(p, W_SR), mat(p, W2), mat(p, W4));
        let (b2, b4) = (p.get(B2).unwrap().data().to_vec(), p.get(B4).unwrap().data().to_vec());
        let n = ids.len();
        let mv = |m: &Vec<Vec<f64>>, x: &[f64]| -> Vec<f64> {
            m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
        };
        let mut cl = vec![p.get(C_LEFT).unwrap().data().to_vec()];
        for i in 1..n {
            let a = mv(&wl, &cl[i - 1]);
            let b = mv(&wsl, &e[ids[i - 1] as usize]);
            cl.push(a.iter().zip(&b).map(|(x, y)| (x + y).tanh()).collect());
        }
        let mut cr = vec![vec![]; n];
        cr[n - 1] = p.get(C_RIGHT).unwrap().data().to_vec();
        for i in (0..n - 1).rev() {
            let a = mv(&wr, &cr[i + 1]);
            let b = mv(&wsr, &e[ids[i + 1] as usize]);
            cr[i] = a.iter().zip(&b).map(|(x, y)| (x + y).tanh()).collect();
        }
        let mut pooled = vec![f64::NEG_INFINITY; b2.len()];
        for i in 0..n {
            let mut x = cl[i].clone();
            x.extend(&e[ids[i] as usize]);
            x.extend(&cr[i]);
            let y = mv(&w2, &x);
            for k in 0..pooled.len() {
                pooled[k] = pooled[k].max((y[k] + b2[k]).tanh());
            }
        }
        mv(&w4, &pooled).iter().zip(&b4).map(|(a, b)| a + b).collect()
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut p = tiny_params(1);
        for (name, t) in p.iter_mut() {
            if name != B4 {
                t.fill(0.0);
            }
        }
        let (logits, trace) = TINY.forward(&p, &[3, 4, 5]).unwrap();
        assert_eq!(logits, p.get(B4).unwrap().data());
        assert!(trace.pooled.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_position_pools_to_itself() {
        let p = tiny_params(2);
        let (_, trace) = TINY.forward(&p, &[7]).unwrap();
        assert_eq!(trace.pooled, trace.latent[0]);
    }

    #[test]
    fn matches_reference_implementation() {
        let p = tiny_params(3);
        let ids = [2, 9, 4, 4, 17, 11];
        let got = TINY.logits(&p, &ids).unwrap();
        let want = reference_logits(&p, &ids);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn empty_sequence() {
        assert!(matches!(TINY.forward(&tiny_params(0), &[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn mismatched_trace() {
        let p = tiny_params(4);
        let (_, trace) = TINY.forward(&p, &[2, 3, 4]).unwrap();
        let mut g = p.zeros_like();
        let err = TINY.backward(&p, &[2, 3], &trace, &[1.0, -1.0], &mut g).unwrap_err();
        assert_eq!(err.kind(), "TraceError");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = tiny_params(5);
        let ids = [3, 8, 8, 15, 2, 19, 6];
        let (logits, trace) = TINY.forward(&p, &ids).unwrap();
        let (_, dl) = softmax_cross_entropy(&logits, 1).unwrap();
        let mut g = p.zeros_like();
        TINY.backward(&p, &ids, &trace, &dl, &mut g).unwrap();
        let loss = |q: &ParamSet<f64>| Ok(softmax_cross_entropy(&TINY.logits(&q.cast::<TwoFloat>(), &ids)?, 1)?.0);
        let report = grad_check(&p, &g, loss, 300, 1e-5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(report.max_rel_error < 1e-5, "{:?}", report.worst());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let p = tiny_params(6);
        let ids = [1, 2, 3];
        let (_, trace) = TINY.forward(&p, &ids).unwrap();
        let mut g = p.zeros_like();
        TINY.backward(&p, &ids, &trace, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|(_, t)| t.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn unused_token_rows_get_no_gradient() {
        let p = tiny_params(7);
        let ids = [4, 5, 6, 5];
        let (_, trace) = TINY.forward(&p, &ids).unwrap();
        let mut g = p.zeros_like();
        TINY.backward(&p, &ids, &trace, &[0.7, -0.7], &mut g).unwrap();
        let ge = g.get(EMBEDDING).unwrap();
        for row in 0..20 {
            let used = ids.contains(&(row as u32));
            assert_eq!(ge.row(row).iter().any(|&x| x != 0.0), used, "row {row}");
        }
    }

    #[test]
    fn pooling_dominance() {
        let p = tiny_params(8);
        let (logits, trace) = TINY.forward(&p, &[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
        let mut latent = trace.latent.clone();
        for k in 0..TINY.hidden {
            let top = trace.argmax[k];
            let runner_up = (0..latent.len())
                .filter(|&i| i != top)
                .max_by(|&a, &b| latent[a][k].total_cmp(&latent[b][k]))
                .unwrap();
            let gap = trace.pooled[k] - latent[runner_up][k];
            latent[runner_up][k] += gap * 0.5;
        }
        let (pooled, _) = max_pool(&latent);
        assert_eq!(pooled, trace.pooled);
        assert_eq!(head(&p, &pooled).unwrap(), logits);
    }

    #[test]
    fn order_sensitive() {
        let p = tiny_params(9);
        let a = TINY.logits(&p, &[3, 7, 11, 2]).unwrap();
        let b = TINY.logits(&p, &[3, 11, 7, 2]).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }
}
