//! Seed derivation. All randomness in a run flows from one 64-bit seed;
//! sub-streams (selection rng, per-trial evaluation seeds, Monte-Carlo
//! trials) are split off with a fixed mixer so runs are reproducible.

/// splitmix64 finalizer.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a stream index.
pub(crate) fn derive(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream))
}

/// Hashes a slice of option indices into a 64-bit key.
pub(crate) fn hash_choices(choices: &[usize]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &c in choices {
        h = mix64(h ^ (c as u64).wrapping_add(0x100));
    }
    h
}
