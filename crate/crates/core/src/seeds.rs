//! Seed derivation.
//!
//! Every random stream in the crate (hash rows, sign rows, noise draws,
//! Monte Carlo trials) gets its own seed derived from a master seed and a
//! stream id, so streams are decorrelated and replayable in any order.

/// splitmix64 step: the standard 64-bit finalizer-based generator.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for stream `stream` under `master`.
#[inline]
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(stream ^ 0xA076_1D64_78BD_642F))
}
