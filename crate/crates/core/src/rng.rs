//! Seed derivation for reproducible parallel runs.
//!
//! Every random stream in the engine is derived from a master seed plus a
//! list of integer tags (stage, maturity index, column index, pass, ...).
//! Streams for distinct tag lists are statistically independent and the
//! derivation is order-sensitive, so per-maturity work can run on any
//! thread layout and still produce identical output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags for stream derivation. Keeping them in one place avoids
/// accidental tag collisions between modules.
pub mod stream {
    pub const SYNTH_SMILES: u64 = 1;
    pub const SYNTH_INDEX: u64 = 2;
    pub const DRAW_UNIFORMS: u64 = 3;
    pub const ISM_MIX: u64 = 4;
    pub const ISM_HARVEST: u64 = 5;
    pub const PATHS: u64 = 6;
    pub const ORACLE: u64 = 7;
}

/// splitmix64 finalizer; good avalanche on sequential inputs.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a tag path.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix64(master ^ 0x5851_f42d_4c95_7f2d);
    for (i, &t) in tags.iter().enumerate() {
        state = mix64(state ^ t.wrapping_add(0x0100_0000_0000_0000u64.wrapping_mul(i as u64 + 1)));
    }
    state
}

/// Deterministic sub-stream generator for a tag path.
pub fn substream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
