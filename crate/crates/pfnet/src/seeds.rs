//! Derivation of independent RNG streams from one experiment seed.
//!
//! Each component (front-end init, head init, shuffling, corpus latents,
//! individual utterances) draws from its own stream, so configuration changes
//! in one component never shift the random values seen by another.

/// Stable 64-bit stream seed from a base seed and a tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the base through splitmix64 finalizers
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stream seed further specialized by an index (per utterance, per epoch).
pub fn derive_seed_indexed(base: u64, tag: &str, index: u64) -> u64 {
    derive_seed(
        derive_seed(base, tag) ^ index.wrapping_mul(0xd1342543de82ef95),
        "idx",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, "head"), derive_seed(7, "head"));
        assert_ne!(derive_seed(7, "head"), derive_seed(7, "front"));
        assert_ne!(derive_seed(7, "head"), derive_seed(8, "head"));
        assert_ne!(
            derive_seed_indexed(7, "utt", 0),
            derive_seed_indexed(7, "utt", 1)
        );
    }
}
