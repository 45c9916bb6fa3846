use serde::{Deserialize, Serialize};

use super::{ParamSet, Real};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moment buffers, shaped like the parameters they track.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    m: ParamSet<F>,
    v: ParamSet<F>,
    t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(params: &ParamSet<F>, config: AdamConfig) -> Self {
        AdamState { config, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &ParamSet<F>) -> Result<()> {
        self.step_except(params, grads, &[])
    }

    /// Like [`step`](Self::step), but tensors named in `frozen` keep their
    /// values. Their moments still advance.
    pub fn step_except(
        &mut self,
        params: &mut ParamSet<F>,
        grads: &ParamSet<F>,
        frozen: &[&str],
    ) -> Result<()> {
        params.check_same_layout(grads)?;
        params.check_same_layout(&self.m)?;
        self.t += 1;
        let c = self.config;
        let b1 = F::of(c.beta1);
        let b2 = F::of(c.beta2);
        let one = F::one();
        let bc1 = F::of(1.0 - c.beta1.powi(self.t as i32));
        let bc2 = F::of(1.0 - c.beta2.powi(self.t as i32));
        let lr = F::of(c.learning_rate);
        let eps = F::of(c.epsilon);
        for i in 0..params.len() {
            let skip = frozen.contains(&params.name_at(i));
            let g = grads.at(i).data();
            let m = self.m.at_mut(i).data_mut();
            let v = self.v.at_mut(i).data_mut();
            let p = params.at_mut(i).data_mut();
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                if !skip {
                    let m_hat = m[j] / bc1;
                    let v_hat = v[j] / bc2;
                    p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn scalar(x: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("p", Tensor::vector(vec![x])).unwrap();
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = scalar(0.5);
        let grads = scalar(1.0);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        adam.step(&mut params, &grads).unwrap();
        // m = 0.1, v = 0.001; bias-corrected both are 1 -> step lr / (1 + eps)
        let moved = 0.5 - params.get("p").unwrap().data()[0];
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = scalar(0.5);
        let grads = scalar(0.0);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        adam.step(&mut params, &grads).unwrap();
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params.get("p").unwrap().data()[0], 0.5);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn update_is_bounded_by_learning_rate() {
        let mut params = scalar(0.0);
        let mut adam = AdamState::new(&params, AdamConfig::default());
        let mut prev = 0.0;
        for k in 0..50 {
            let g = if k % 3 == 0 { 100.0 } else { -0.01 };
            adam.step(&mut params, &scalar(g)).unwrap();
            let now = params.get("p").unwrap().data()[0];
            // |m_hat| <= sqrt(v_hat) for Adam with beta1^2 < beta2
            assert!((now - prev).abs() <= 1e-3 * (1.0 + 1e-6));
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut params = scalar(0.0);
        let mut grads = ParamSet::new();
        grads.insert("p", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut adam = AdamState::new(&params, AdamConfig::default());
        assert!(adam.step(&mut params, &grads).is_err());
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut params = scalar(0.3);
            let mut adam = AdamState::new(&params, AdamConfig::default());
            for k in 0..20 {
                adam.step(&mut params, &scalar((k as f64).sin())).unwrap();
            }
            params.get("p").unwrap().data()[0].to_bits()
        };
        assert_eq!(run(), run());
    }
}
