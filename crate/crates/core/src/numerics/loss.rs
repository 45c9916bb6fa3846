use super::Real;
use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(F::zero(), |a, &e| a + e);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `true_class`.
///
/// Returns the loss and its gradient with respect to the logits,
/// `softmax(logits) - onehot(true_class)`.
pub fn softmax_cross_entropy<F: Real>(logits: &[F], true_class: usize) -> Result<(F, Vec<F>)> {
    if true_class >= logits.len() {
        return Err(Error::Index { index: true_class, len: logits.len() });
    }
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let sum = logits.iter().fold(F::zero(), |a, &z| a + (z - max).exp());
    let log_z = max + sum.ln();
    let loss = log_z - logits[true_class];
    let mut grad: Vec<F> = logits.iter().map(|&z| (z - log_z).exp()).collect();
    grad[true_class] -= F::one();
    Ok((loss, grad))
}

/// Hinge loss `max(0, 1 - label * score)` with its subgradient in `score`.
///
/// `label` must be +1 or -1. At the kink (margin exactly 1) the subgradient 0
/// is returned.
pub fn hinge_loss<F: Real>(score: F, label: F) -> (F, F) {
    let margin = label * score;
    if margin < F::one() {
        (F::one() - margin, -label)
    } else {
        (F::zero(), F::zero())
    }
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln σ(x)` without overflow.
#[inline]
pub fn log_sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits() {
        let (loss, grad) = softmax_cross_entropy(&[0.0f64, 0.0], 0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad[0] + 0.5).abs() < 1e-12);
        assert!((grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confident_logits() {
        // ln(1 + e^-20)
        let (loss, _) = softmax_cross_entropy(&[10.0f64, -10.0], 0).unwrap();
        assert!((loss - 2.061_153_618_190_204_4e-9).abs() < 1e-15);
        let (loss32, _) = softmax_cross_entropy(&[10.0f32, -10.0], 0).unwrap();
        assert!((0.0..1e-7).contains(&loss32));
    }

    #[test]
    fn cross_entropy_matches_finite_differences() {
        let logits = [0.3f64, -1.2, 2.5];
        let h = 1e-5;
        for class in 0..3 {
            let (_, grad) = softmax_cross_entropy(&logits, class).unwrap();
            for j in 0..3 {
                let mut up = logits;
                let mut down = logits;
                up[j] += h;
                down[j] -= h;
                let numeric = (softmax_cross_entropy(&up, class).unwrap().0
                    - softmax_cross_entropy(&down, class).unwrap().0)
                    / (2.0 * h);
                let rel = (numeric - grad[j]).abs() / numeric.abs().max(grad[j].abs()).max(1e-8);
                assert!(rel < 1e-4, "class {class} coord {j}: {rel}");
            }
        }
    }

    #[test]
    fn class_out_of_range() {
        assert!(matches!(
            softmax_cross_entropy(&[0.0f32, 1.0], 2),
            Err(Error::Index { index: 2, len: 2 })
        ));
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let p = softmax(&[1.0f32, 2.0, -3.0]);
        let q = softmax(&[101.0f32, 102.0, 97.0]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hinge_cases() {
        assert_eq!(hinge_loss(2.0f64, 1.0), (0.0, 0.0));
        assert_eq!(hinge_loss(0.0f64, 1.0), (1.0, -1.0));
        assert_eq!(hinge_loss(-0.5f64, -1.0), (0.5, 1.0));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0f64) + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(log_sigmoid(-800.0f64).is_finite());
        assert!(log_sigmoid(800.0f64).abs() < 1e-300);
        assert!((sigmoid(3.0f64) - 0.952_574_126_822_433_4).abs() < 1e-12);
    }
}
