//! Splittable counter-based seed derivation.
//!
//! Every random stream in a run is addressed by a path of counters
//! (root seed, trial, iteration, arm). Each step mixes the parent seed with
//! the child index through the SplitMix64 finalizer, so a stream depends only
//! on its path and never on the order in which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used for all sampling.
pub type ArmRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreamSeed(pub u64);

impl StreamSeed {
    pub fn new(root: u64) -> Self {
        StreamSeed(root)
    }

    /// Child stream for `index`.
    pub fn child(self, index: u64) -> Self {
        let salted = mix64(self.0.wrapping_add(GOLDEN_GAMMA));
        StreamSeed(mix64(salted ^ index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
    }

    pub fn rng(self) -> ArmRng {
        ArmRng::seed_from_u64(self.0)
    }
}
