//! Deterministic derivation of independent RNG streams from one master seed.

/// splitmix64 finalizer; decorrelates nearby (master, salt) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed for a named stream: `derive(master, salt)` is stable
/// across runs and platforms, and distinct salts give independent streams.
pub fn derive(master: u64, salt: u64) -> u64 {
    mix(master ^ mix(salt))
}

/// Two-level derivation for grid cells: (master, cell, trial).
pub fn derive2(master: u64, salt_a: u64, salt_b: u64) -> u64 {
    derive(derive(master, salt_a), salt_b)
}
