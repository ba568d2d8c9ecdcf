//! Deterministic seed derivation.
//!
//! Every random draw in the toolkit flows from a single root seed through
//! `derive_seed`, which mixes the root with a list of integer labels
//! (experiment tag, k, replicate index, field index, ...). The mixing function
//! is SplitMix64 applied to each label in sequence; it is pinned and must not
//! change, since recorded experiments identify their streams by these values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer: one 64-bit mixing step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream seed from a root seed and a label path.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(root ^ 0x6a09_e667_f3bc_c908);
    for &label in labels {
        state = splitmix64(state ^ splitmix64(label.wrapping_add(0x243f_6a88_85a3_08d3)));
    }
    state
}

/// Counter-based generator for a derived stream.
pub fn stream(root: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: changing the mixer would silently re-route every
        // experiment's randomness, so these bytes are pinned.
        assert_eq!(derive_seed(0, &[]), 0x1ac0_46dd_a8e8_6e2a);
        assert_eq!(derive_seed(42, &[1, 2, 3]), 0xffd0_0809_040f_630e);
    }

    #[test]
    fn labels_separate_streams() {
        let a = derive_seed(7, &[0, 0]);
        let b = derive_seed(7, &[0, 1]);
        let c = derive_seed(7, &[1, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn same_path_same_stream() {
        use rand::RngCore;
        let mut r1 = stream(99, &[4, 5]);
        let mut r2 = stream(99, &[4, 5]);
        for _ in 0..16 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }
}
