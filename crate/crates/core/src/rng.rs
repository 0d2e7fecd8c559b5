//! Seeded random streams.
//!
//! Every randomized consumer draws from its own ChaCha stream keyed by the
//! root seed and a fixed stream id, so adding a consumer never shifts the
//! draws seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Embeddings = 2,
    Scorer = 3,
    Shuffle = 4,
    Negatives = 5,
    Ranking = 6,
    Perturb = 7,
    Folds = 8,
    Classifier = 9,
    Synthetic = 10,
    Gradcheck = 11,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Sub-stream for consumers that need one generator per item (e.g. per sweep point).
pub fn substream(seed: u64, which: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((which as u64) << 32) | (index & 0xffff_ffff));
    rng
}
