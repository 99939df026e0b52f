//! Seeded random sub-streams.
//!
//! Every random draw in a run comes from a generator keyed by the run seed, a
//! named stream and a couple of counters (epoch, batch, sample...). Nothing
//! carries hidden generator state between calls, which makes runs resumable
//! from `(seed, epoch)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Weights = 1,
    Dropout = 2,
    Encoder = 3,
    Noise = 4,
    Shuffle = 5,
    Order = 6,
    EvalEncoder = 7,
    Synthetic = 8,
    Sampling = 9,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with any number of counters into a new 64-bit key.
pub fn derive(seed: u64, stream: Stream, counters: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(stream as u64));
    for &c in counters {
        h = splitmix(h ^ c.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    h
}

pub fn stream_rng(seed: u64, stream: Stream, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, counters))
}
