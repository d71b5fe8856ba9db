//! Counter-based random streams: each `(seed, index)` pair owns an
//! independent, reproducible generator, so parallel sample generation is
//! order-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for stream `index` of the run keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ index.rotate_left(32) ^ 0x6a09_e667_f3bc_c908;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..8).map(|_| 0.0).collect::<Vec<_>>();
        let _ = a;
        let mut r1 = stream(7, 3);
        let mut r2 = stream(7, 3);
        let mut r3 = stream(7, 4);
        let x1: f64 = r1.random();
        let x2: f64 = r2.random();
        let x3: f64 = r3.random();
        assert_eq!(x1, x2);
        assert_ne!(x1, x3);
    }

    #[test]
    fn index_zero_and_seed_zero_not_degenerate() {
        let mut r = stream(0, 0);
        let x: f64 = r.random();
        assert!(x.is_finite());
    }
}
