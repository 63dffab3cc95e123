//! Deterministic sub-seeds from one master seed.
//!
//! `derive_seed(master, tag) = splitmix64(master ^ fnv1a(tag))`, with the
//! usual splitmix64 constants and 64-bit FNV-1a (offset basis
//! `0xcbf29ce484222325`, prime `0x100000001b3`). Each component of a run
//! draws from its own tag, so any one of them can be re-derived without the
//! others.

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn derive_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a(tag))
}

/// Sub-seed for the `index`-th item under `tag`.
pub fn derive_indexed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, tag) ^ splitmix64(index))
}
