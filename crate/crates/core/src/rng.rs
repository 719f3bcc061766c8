//! Seeded random streams.
//!
//! Every trial derives its own substreams from a root seed so that results do not depend on
//! scheduling order. Draws are made in `f64` and converted, so `f32` and `f64` simulations
//! consume identical random sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Real;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep the scene, noise and policy streams of one trial independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene = 1,
    Noise = 2,
    Policy = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `hash(root, index)`.
pub fn substream_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn trial_rng(root: u64, trial: u64, stream: Stream) -> SimRng {
    let seed = substream_seed(substream_seed(root, trial), stream as u64);
    SimRng::seed_from_u64(seed)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent streams of a single trial.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub scene: SimRng,
    pub noise: SimRng,
    pub policy: SimRng,
}

impl TrialStreams {
    pub fn new(root: u64, trial: u64) -> Self {
        Self {
            scene: trial_rng(root, trial, Stream::Scene),
            noise: trial_rng(root, trial, Stream::Noise),
            policy: trial_rng(root, trial, Stream::Policy),
        }
    }
}

pub fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
