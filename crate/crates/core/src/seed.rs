//! Seed derivation.
//!
//! Every random stream in an experiment is keyed by `(master_seed, run_index, stage)`
//! through [`hash64`], so runs and stages never share draws and adding a run does not
//! shift the streams of earlier runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stages that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Simulation = 1,
    GaussianReference = 2,
    Threshold = 3,
    Calibration = 4,
    SolverInit = 5,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `hash64(master, run, stage) = mix64(mix64(mix64(master) ^ run) ^ stage)`.
pub fn hash64(master_seed: u64, run_index: u64, stage: Stage) -> u64 {
    mix64(mix64(mix64(master_seed) ^ run_index) ^ stage as u64)
}

/// A ChaCha8 generator on a given stream of a seed. Distinct streams are independent.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
