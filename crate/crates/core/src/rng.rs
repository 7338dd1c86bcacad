//! Counter-based seed derivation.
//!
//! Every random quantity in the workbench is addressed by a
//! `(master seed, domain, index)` triple. The master seed and domain pick a
//! ChaCha8 key, the index picks the ChaCha stream, so the draws for site `x`
//! or sample `i` never depend on how many other sites or samples were
//! generated, or in which order, or on how many threads did the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random-number domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    EnvironmentSite = 0x656e_765f_7369_7465,
    HittingSample = 0x6869_745f_7361_6d70,
    PositionSample = 0x706f_735f_7361_6d70,
    BacktrackSample = 0x6261_636b_7472_6b00,
    Replicate = 0x7265_706c_6963_6174,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, index)`; used for replicate seeds.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix64(mix64(seed ^ domain as u64).wrapping_add(index))
}

/// A factory of per-index ChaCha8 streams sharing one key.
#[derive(Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

impl StreamFactory {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(mix64(seed ^ domain as u64)),
        }
    }

    /// The generator for `index`, positioned at the start of its stream.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// Map a signed site index onto a stream id (zig-zag, so `x` and `-x` differ).
pub fn site_stream(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}
