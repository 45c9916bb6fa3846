use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::numerics::{Real, Tensor};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stage-local seed: the first eight bytes (little-endian) of
/// `SHA-256(seed.to_le_bytes() || stage)`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub fn rng_for(seed: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage))
}

pub fn uniform_tensor<F: Real, R: Rng + ?Sized>(shape: &[usize], range: f64, rng: &mut R) -> Tensor<F> {
    let n = shape.iter().product();
    let data = if range > 0.0 {
        let dist = Uniform::new_inclusive(-range, range);
        (0..n).map(|_| F::of(dist.sample(rng))).collect()
    } else {
        vec![F::zero(); n]
    };
    Tensor::from_vec(shape, data).expect("shape matches data")
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_range(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_stage() {
        assert_eq!(derive_seed(7, "split"), derive_seed(7, "split"));
        assert_ne!(derive_seed(7, "split"), derive_seed(7, "sample"));
        assert_ne!(derive_seed(7, "split"), derive_seed(8, "split"));
    }
}
