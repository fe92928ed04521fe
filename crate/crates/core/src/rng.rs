//! Seeded generators shared by every stochastic component.
//!
//! All randomness is ChaCha8 keyed by a 64-bit seed; independent sub-streams
//! (shuffle epochs, datagen rounds, init) select a ChaCha stream id so that
//! results never depend on call order elsewhere in the program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `seed` on ChaCha stream `stream`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from N(0, 1).
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// 64-bit FNV-1a over a byte string, used for prompt hashing in the mock client.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
