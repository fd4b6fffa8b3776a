//! Deterministic seeding.
//!
//! Every sampler takes a [`Seed`] and builds its own generator from it, so a
//! result is a pure function of its arguments. Independent sub-streams
//! (replicates, outer-process copies, excursion labels) are obtained with
//! [`Seed::derive`], which mixes the parent seed with a stream index through
//! SplitMix64. The mixing is fixed, so results do not depend on the order in
//! which replicates are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;

/// Human-readable identifier of the generator, recorded in result files.
pub const GENERATOR_ID: &str = "chacha8+splitmix64-derive+ziggurat-normal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    pub master: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub const fn new(master: u64) -> Self {
        Seed { master }
    }

    /// Child seed for stream `index`: `splitmix64(splitmix64(master) ^ splitmix64(index + golden))`.
    pub fn derive(self, index: u64) -> Seed {
        let a = splitmix64(self.master);
        let b = splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019));
        Seed {
            master: splitmix64(a ^ b.rotate_left(17)),
        }
    }

    /// Shorthand for `derive(a).derive(b)`.
    pub fn derive2(self, a: u64, b: u64) -> Seed {
        self.derive(a).derive(b)
    }

    pub fn rng(self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.master)
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Seed { master }
    }
}
