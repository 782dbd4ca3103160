// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod encoding;
pub mod graph;
pub mod kinematics;
pub mod model;
pub mod nn;
pub mod planners;
pub mod tensor;
pub mod training;

/// Counter-based seed derivation: mixes `master` with each stream index
/// through the SplitMix64 finalizer, so per-trial seeds are independent of
/// execution order.
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    stream.iter().fold(mix(master), |acc, &s| mix(acc ^ mix(s)))
}
