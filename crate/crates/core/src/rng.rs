//! Seed derivation and the stream RNG used by every randomized operation.
//!
//! All randomness flows from explicit u64 seeds through [`derive_seed`], a
//! SplitMix64 mix of (master, stream). Independent consumers use distinct
//! stream namespaces so adding draws in one place never shifts another.

use rand_chacha::ChaCha8Rng;

/// Noise-draw stream inside a single trial.
pub const STREAM_NOISE: u64 = 1;
/// Mode-selection stream inside a single trial.
pub const STREAM_SELECT: u64 = 2;
/// Per-cell trial batches inside a sweep.
pub const STREAM_TRIALS: u64 = 3;
/// Bootstrap resampling inside a decay fit.
pub const STREAM_BOOTSTRAP: u64 = 4;

/// Derives a child seed for `stream` from `master` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The crate's stream cipher RNG, fully determined by its seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
