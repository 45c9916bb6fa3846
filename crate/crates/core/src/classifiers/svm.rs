use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::HelpfulnessLabel;
use crate::error::{Error, Result};
use crate::text::SparseVector;
use crate::util::rng_for;

/// Linear SVM over TF-IDF vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub vocab_size: usize,
    pub lambda: f64,
    pub epochs: usize,
}

impl Svm {
    pub fn new(vocab_size: usize) -> Self {
        Svm { vocab_size, lambda: 1e-4, epochs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmWeights {
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn svm_score(w: &[f64], b: f64, x: &SparseVector) -> f64 {
    x.indices.iter().zip(&x.values).map(|(&i, &v)| w[i as usize] * v as f64).sum::<f64>() + b
}

/// `λ/2 ‖w‖² + mean hinge`.
pub fn svm_objective(weights: &SvmWeights, data: &[(SparseVector, HelpfulnessLabel)], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * weights.w.iter().map(|x| x * x).sum::<f64>();
    let hinge: f64 = data
        .iter()
        .map(|(x, y)| (1.0 - y.sign() * svm_score(&weights.w, weights.b, x)).max(0.0))
        .sum();
    reg + hinge / data.len().max(1) as f64
}

/// Objective and a subgradient with respect to `(w, b)`. At the hinge kink
/// the zero branch is taken.
pub fn svm_subgradient(
    weights: &SvmWeights,
    data: &[(SparseVector, HelpfulnessLabel)],
    lambda: f64,
) -> (f64, SvmWeights) {
    let n = data.len().max(1) as f64;
    let mut g = SvmWeights { w: weights.w.iter().map(|&x| lambda * x).collect(), b: 0.0 };
    for (x, label) in data {
        let y = label.sign();
        if y * svm_score(&weights.w, weights.b, x) < 1.0 {
            for (&i, &v) in x.indices.iter().zip(&x.values) {
                g.w[i as usize] -= y * v as f64 / n;
            }
            g.b -= y / n;
        }
    }
    (svm_objective(weights, data, lambda), g)
}

/// Stochastic subgradient descent on the regularized hinge objective
/// (Pegasos): step `1/(λt)`, weights projected onto the ball of radius
/// `1/√λ`. The unregularized bias takes steps of `1/√t`. Examples are
/// reshuffled each epoch from `seed`.
pub fn svm_train(
    data: &[(SparseVector, HelpfulnessLabel)],
    svm: &Svm,
    seed: u64,
) -> Result<SvmWeights> {
    if !(svm.lambda > 0.0) {
        return Err(Error::Config(format!("svm lambda must be positive, got {}", svm.lambda)));
    }
    let first = data.first().ok_or(Error::EmptySplit("train".into()))?.1;
    if data.iter().all(|(_, y)| *y == first) {
        return Err(Error::DegenerateLabels);
    }
    for (x, _) in data {
        if let Some(&i) = x.indices.iter().find(|&&i| i as usize >= svm.vocab_size) {
            return Err(Error::Index { index: i as usize, len: svm.vocab_size });
        }
    }
    let lambda = svm.lambda;
    let radius = 1.0 / lambda.sqrt();
    // w = scale * v keeps each update proportional to the example's sparsity
    let mut v = vec![0.0f64; svm.vocab_size];
    let mut scale = 1.0f64;
    let mut v_sq = 0.0f64;
    let mut b = 0.0f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_for(seed, "svm");
    let mut t = 0u64;
    for _ in 0..svm.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            t += 1;
            let (x, label) = &data[k];
            let y = label.sign();
            let eta = 1.0 / (lambda * t as f64);
            let vx: f64 = x.indices.iter().zip(&x.values).map(|(&i, &xv)| v[i as usize] * xv as f64).sum();
            let margin = y * (scale * vx + b);

            scale *= 1.0 - eta * lambda;
            if scale <= 1e-12 {
                v.iter_mut().for_each(|a| *a = 0.0);
                v_sq = 0.0;
                scale = 1.0;
            }
            if margin < 1.0 {
                let alpha = eta * y / scale;
                let vx_now: f64 = x.indices.iter().zip(&x.values).map(|(&i, &xv)| v[i as usize] * xv as f64).sum();
                let x_sq: f64 = x.values.iter().map(|&a| (a as f64).powi(2)).sum();
                for (&i, &xv) in x.indices.iter().zip(&x.values) {
                    v[i as usize] += alpha * xv as f64;
                }
                v_sq += 2.0 * alpha * vx_now + alpha * alpha * x_sq;
                b += y / (t as f64).sqrt();
            }
            let norm = scale * v_sq.max(0.0).sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
        }
    }
    Ok(SvmWeights { w: v.iter().map(|&a| a * scale).collect(), b })
}
