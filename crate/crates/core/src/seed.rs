//! Derivation of independent RNG streams from one user seed.

/// SplitMix64-style mixing of a base seed with stream indices.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut z = base;
    for &s in stream {
        z = z
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(s.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
