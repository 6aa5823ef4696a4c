//! Seed derivation for reproducible Monte Carlo streams.
//!
//! Every trial owns a seed derived from (master seed, sample size, trial
//! index), so results do not depend on scheduling, worker count, or how many
//! trials run in total: the first t trials of a run with 2t trials see
//! exactly the same streams.

/// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: a splittable hash of (master, n, trial index).
#[inline]
pub fn derive_seed(master: u64, n: u64, trial: u64) -> u64 {
    let mut z = splitmix64(master ^ 0x243F_6A88_85A3_08D3);
    z = splitmix64(z ^ n);
    splitmix64(z ^ trial)
}

/// Seed for re-drawing a degenerate trial; distinct per attempt and
/// deterministic given the trial seed.
#[inline]
pub fn derive_retry_seed(trial_seed: u64, attempt: u32) -> u64 {
    splitmix64(trial_seed ^ splitmix64(0x452A_F8A1_D219_7D4B ^ u64::from(attempt)))
}
