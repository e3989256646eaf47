//! Deterministic random substreams.
//!
//! Every logical draw stream is keyed by `(master seed, stream tag, index)` and
//! mapped through SplitMix64 finalizers onto a fresh ChaCha8 generator. Results
//! therefore never depend on scheduling or thread count.
//!
//! Gaussian variates use `rand_distr::StandardNormal` (ziggurat sampler), which
//! is a fixed, platform-independent transform of the uniform stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Matrix = 1,
    Signal = 2,
    Noise = 3,
    Corruption = 4,
    Trial = 5,
    Channel = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream `(master, tag, index)`.
pub fn substream_seed(master: u64, tag: Stream, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (tag as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn substream(master: u64, tag: Stream, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, tag, index))
}

/// Per-trial seed for sweep point `point` and trial `trial`.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    substream_seed(master, Stream::Trial, ((point as u64) << 32) | trial as u64)
}

#[inline]
pub fn gaussian<R: rand::Rng + ?Sized>(rng: &mut R, std_dev: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std_dev * z
}
