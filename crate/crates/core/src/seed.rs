//! Seed derivation and the random-number conventions shared by every
//! stochastic routine.
//!
//! Every replica owns one ChaCha8 stream. Its seed is derived from a master
//! seed, a [`Stream`] tag and a replica index by [`derive_seed`], which
//! composes SplitMix64 finalizers:
//!
//! ```text
//! seed = mix(mix(master ^ stream_tag) ^ (index * 0x9E3779B97F4A7C15))
//! ```
//!
//! Distinct tags keep environment, dynamics, graphical and theory streams
//! disjoint even when they share a master seed and index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Independent families of random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Environment,
    Dynamics,
    Graphical,
    Theory,
}

impl Stream {
    const fn tag(self) -> u64 {
        match self {
            Stream::Environment => 0x454E_5649_524F_4E00,
            Stream::Dynamics => 0x4459_4E41_4D49_4300,
            Stream::Graphical => 0x4752_4150_4849_4300,
            Stream::Theory => 0x5448_454F_5259_0000,
        }
    }
}

/// SplitMix64 output function.
pub const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.tag()) ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Derives a seed from a path of indices, e.g. `(n, λ, environment, replica)`.
pub fn derive_seed_path(master: u64, stream: Stream, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master ^ stream.tag()), |acc, &i| {
            splitmix64(acc ^ i.wrapping_mul(GOLDEN_GAMMA))
        })
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Uniform draw from `(0, 1]`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Exponential waiting time with the given positive rate.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(open_unit(rng)) / rate
}
