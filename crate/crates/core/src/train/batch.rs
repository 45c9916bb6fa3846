use rand::seq::SliceRandom;

use crate::util::rng_for;

/// Batches sorted by length within a pool of this many batches.
const POOL_BATCHES: usize = 50;

/// Example indices for one epoch, grouped into batches.
///
/// The order is reshuffled from `(seed, epoch)`. Within pools of
/// `POOL_BATCHES` consecutive batches examples are sorted by length so that
/// batches hold similar lengths; the full batches are then shuffled. A final
/// partial batch is kept, last.
pub fn make_batches(lengths: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut rng = rng_for(seed, &format!("batches/{epoch}"));
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(&mut rng);
    for pool in order.chunks_mut(batch_size * POOL_BATCHES) {
        pool.sort_by_key(|&i| lengths[i]);
    }
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    let full = if lengths.len().is_multiple_of(batch_size) { batches.len() } else { batches.len() - 1 };
    batches[..full].shuffle(&mut rng);
    batches
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn sizes_and_partial_batch() {
        let lengths: Vec<usize> = (0..300).map(|i| i % 17).collect();
        let b = make_batches(&lengths, 128, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![128, 128, 44]);
        assert!(make_batches(&[], 128, 1, 0).is_empty());
    }

    #[test]
    fn keyed_by_seed_and_epoch() {
        let lengths: Vec<usize> = (0..1000).map(|i| (i * 7919) % 101).collect();
        assert_eq!(make_batches(&lengths, 32, 5, 2), make_batches(&lengths, 32, 5, 2));
        assert_ne!(make_batches(&lengths, 32, 5, 2), make_batches(&lengths, 32, 5, 3));
        assert_ne!(make_batches(&lengths, 32, 5, 2), make_batches(&lengths, 32, 6, 2));
    }

    #[test]
    fn batches_are_length_homogeneous() {
        let lengths: Vec<usize> = (0..640).map(|i| (i * 37) % 200).collect();
        let spread = |b: &Vec<usize>| {
            let l: Vec<usize> = b.iter().map(|&i| lengths[i]).collect();
            l.iter().max().unwrap() - l.iter().min().unwrap()
        };
        let max_spread = make_batches(&lengths, 64, 0, 0).iter().map(spread).max().unwrap();
        assert!(max_spread < 40, "{max_spread}");
    }

    proptest! {
        #[test]
        fn every_example_exactly_once(n in 0usize..700, bs in 1usize..150, seed: u64, epoch in 0usize..5) {
            let lengths: Vec<usize> = (0..n).map(|i| (i * 31) % 13).collect();
            let mut seen: Vec<usize> = make_batches(&lengths, bs, seed, epoch).into_iter().flatten().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }
}
