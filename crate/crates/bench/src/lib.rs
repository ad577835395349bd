//! Fixtures shared by the criterion benches.

use givetake::{make_instance, Instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded random instance with `k`-element initial sets.
pub fn fixture(m: usize, n: usize, k: usize, seed: u64) -> Instance {
    make_instance(m, n, k, &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("valid benchmark parameters")
}
