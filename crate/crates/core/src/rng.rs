//! Counter-based random streams.
//!
//! A stream is identified by a 64-bit key. Child streams are derived from
//! `(key, index)` by a fixed mixing function, so the generator handed to a
//! particle, run or sample depends only on its position in the derivation
//! tree and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic draw in the crate.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            key: splitmix64(seed),
        }
    }

    /// Child stream number `index`. Distinct indices give unrelated keys.
    pub fn substream(&self, index: u64) -> Self {
        RngStream {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_mul(GOLDEN) ^ 0xA5A5_A5A5)),
        }
    }

    /// Convenience for a path of indices.
    pub fn derive(&self, path: &[u64]) -> Self {
        path.iter().fold(*self, |s, &i| s.substream(i))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut seed = [0u8; 32];
        let mut k = self.key;
        for chunk in seed.chunks_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
