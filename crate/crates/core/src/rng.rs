//! Seeded random streams.
//!
//! Every generator in the crate draws from ChaCha20 (RFC 7539 block function,
//! 20 rounds) seeded with `ChaCha20Rng::seed_from_u64(master_seed)`. Independent
//! substreams are selected with the 64-bit ChaCha stream id, so trial `t` and
//! purpose `p` always see the same sequence regardless of how trials are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// What a substream is used for. Keeps e.g. the dataset of trial 3 independent
/// of the hidden layer drawn for trial 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Data = 1,
    Noise = 2,
    HiddenLayer = 3,
    Reservoir = 4,
    Shuffle = 5,
    Split = 6,
}

/// Stream id layout: trial index in the high 56 bits, purpose in the low 8.
pub fn stream_id(trial: u64, purpose: Purpose) -> u64 {
    (trial << 8) | purpose as u64
}

pub fn substream(seed: u64, trial: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(trial, purpose));
    rng
}

/// Plain stream 0 for callers that only have a seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}
