//! Experiment harness: synthetic corpus, method presets, config files, the
//! comparison matrix, and the oracle acceptance checks.

pub mod config;
pub mod experiment;
pub mod oracle;
pub mod presets;
pub mod synth;

/// Derives an independent seed from `seed` and a list of tags (splitmix64
/// finalizer folded over the tags).
pub fn mix_seed(seed: u64, tags: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}
