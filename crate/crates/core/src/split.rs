//! Seeded shuffling and ratio splits shared by the corpus emitters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic permutation of `0..n` for `seed`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Splits `n` items by integer `weights`: every part but the last gets
/// `floor(n * w / total)`, the last part takes the remainder.
pub fn ratio_counts(n: usize, weights: &[usize]) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    assert!(total > 0, "weights must not all be zero");
    let mut counts: Vec<usize> = weights[..weights.len() - 1]
        .iter()
        .map(|w| n * w / total)
        .collect();
    let assigned: usize = counts.iter().sum();
    counts.push(n - assigned);
    counts
}
