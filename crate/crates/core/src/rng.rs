//! Deterministic random streams.
//!
//! Every random draw in the crate goes through a [`Stream`] derived from a
//! master seed and a path of integer coordinates (scenario, outer draw,
//! inner draw, purpose). Two tasks with different paths never share state,
//! so results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags used as the last path coordinate.
pub mod tag {
    pub const BIDS: u64 = 0xB1D5;
    pub const TAU_STAR: u64 = 0x7A05;
    pub const CELL: u64 = 0xCE11;
    pub const MONTE_CARLO: u64 = 0x3C3C;
}

/// Derive the stream for `path` under `master_seed`.
pub fn derive_stream(master_seed: u64, path: &[u64]) -> Stream {
    let mut state = splitmix64(master_seed ^ 0x0005_EED0_F7A1_1AB5);
    for (depth, &coord) in path.iter().enumerate() {
        state = splitmix64(state ^ splitmix64(coord.wrapping_add((depth as u64 + 1) << 56)));
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
