//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every stochastic component draws from its own `ChaCha8Rng`, keyed by the
//! master seed, a component tag and an index. Member `k` gets the same stream
//! whether members run sequentially or on a thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Component tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    TruthParameters = 2,
    TruthNetwork = 3,
    TruthObservation = 4,
    Member = 5,
    Analysis = 6,
    Sweep = 7,
    Toy = 8,
    Transport = 9,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream as u64)).wrapping_add(index))
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_stable() {
        let a = derive_seed(42, Stream::Member, 0);
        let b = derive_seed(42, Stream::Member, 1);
        let c = derive_seed(42, Stream::Analysis, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, Stream::Member, 0));

        let x: f64 = stream_rng(7, Stream::Toy, 3).random();
        let y: f64 = stream_rng(7, Stream::Toy, 3).random();
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
