//! Randomly shifted Halton points for deterministic multi-start seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let base_f = f64::from(base);
    let mut inv = 1.0 / base_f;
    let mut value = 0.0;
    while index > 0 {
        value += (index % u64::from(base)) as f64 * inv;
        index /= u64::from(base);
        inv /= base_f;
    }
    value
}

/// `count` points in `[0, 1)^dim`, Cranley-Patterson rotated by offsets
/// drawn from `seed`.
pub(crate) fn shifted_halton(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|k| {
            (0..dim)
                .map(|d| (radical_inverse(k, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}
