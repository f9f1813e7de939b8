//! Deterministic seed derivation.
//!
//! Every random stream in a run is a ChaCha8 stream keyed by the run seed and
//! selected by `(agent, purpose)` through the cipher's stream id, so draws made
//! by one agent never shift the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Exploration = 0,
    ReplaySampling = 1,
    WeightInit = 2,
    Backoff = 3,
    /// Used by the uniform-random oracle agents in the analysis module.
    Oracle = 4,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run` of an experiment with the given master seed.
pub fn run_seed(master_seed: u64, run: u64) -> u64 {
    mix64(mix64(master_seed) ^ mix64(run.wrapping_add(0x5151)))
}

/// Independent stream for one agent and purpose within a run.
pub fn agent_stream(run_seed: u64, agent: usize, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(run_seed ^ (i as u64).wrapping_mul(0xA24B_AED4_963E_E407)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((agent as u64) << 8) | purpose as u64);
    rng
}
