/// Deterministic seed derivation: a splitmix64 chain over `base` and `parts`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |h, &p| mix(h ^ mix(p)))
}

/// Seed of the Dirichlet partition used by a run with `run_seed`.
pub fn partition_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, &[tag::PARTITION])
}

/// Fixed tags separating the seed streams of a run.
pub(crate) mod tag {
    pub const MODEL: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const CLIENT: u64 = 3;
    pub const EXTRACTOR: u64 = 4;
    pub const SERVER: u64 = 5;
    pub const SELECT: u64 = 6;
    pub const FEDAVG: u64 = 7;
}
