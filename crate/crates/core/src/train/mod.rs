//! Training loop, evaluation metrics, checkpoints and sweeps.

pub mod ablation;
pub mod artifacts;
pub mod checkpoint;
pub mod disentangle;
pub mod metrics;
pub mod optim;
pub mod trainer;

/// Independent seed for a named sub-stream (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream ids passed to [`derive_seed`].
pub mod streams {
    pub const INIT: u64 = 1;
    pub const OVERSAMPLE: u64 = 2;
    pub const SHIFTED_TEST: u64 = 3;
    /// Epoch `e` shuffles with stream `SHUFFLE + e`.
    pub const SHUFFLE: u64 = 1 << 32;
}
