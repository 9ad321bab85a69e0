//! Benchmark inputs shared by the criterion benches.

use unitax_core::taxonomy::{fixtures, Collection};

/// Collections large enough for construction timings to be stable.
pub fn collections(n: u64) -> Vec<Collection> {
    (0..n).map(|s| fixtures::random_collection(s, 6, 12, 40)).collect()
}

/// Deterministic logits in `[-4, 4)` without pulling in an RNG.
pub fn logits(k: usize, salt: u64) -> Vec<f64> {
    (0..k as u64)
        .map(|i| {
            let h = (i ^ salt).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 11;
            (h as f64 / (1u64 << 53) as f64) * 8.0 - 4.0
        })
        .collect()
}
