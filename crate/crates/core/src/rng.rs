//! Seeded, platform-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent streams derived from one user seed, so that consuming randomness
/// for one purpose (e.g. mixup) never shifts another (e.g. batch order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Synth = 1,
    Init = 2,
    Shuffle = 3,
    Mixup = 4,
    Jitter = 5,
    Views = 6,
    Theory = 7,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
