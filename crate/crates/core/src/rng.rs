//! Counter-based random streams.
//!
//! Every random quantity drawn by the estimator is taken from a stream keyed
//! by `(seed, purpose, counters...)`, so the values do not depend on which
//! worker evaluates them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that separate the key spaces of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    BuyerSweep = 2,
    SellerSweep = 3,
    PolicySweep = 4,
    GapAugment = 5,
    PredictBuyer = 6,
    PredictSeller = 7,
    PredictPolicy = 8,
    Generate = 9,
    PredictNew = 10,
    StdErrBuyer = 11,
    StdErrSeller = 12,
    StdErrPolicy = 13,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed and a sequence of counters into one 64-bit stream key.
pub fn stream_key(seed: u64, purpose: Purpose, counters: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ (purpose as u64));
    for &c in counters {
        h = splitmix64(h ^ c);
    }
    h
}

/// A fresh generator for the stream identified by `(seed, purpose, counters)`.
pub fn stream(seed: u64, purpose: Purpose, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, purpose, counters))
}
