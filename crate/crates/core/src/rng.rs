//! Counter-based seeding so every Monte-Carlo work unit owns an independent
//! stream regardless of which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the work unit addressed by `path` under `seed`.
pub fn derive(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut h = splitmix64(seed);
    for &x in path {
        h = splitmix64(h ^ splitmix64(x.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    for chunk in key.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn paths_are_reproducible_and_distinct() {
        let a: u64 = derive(7, &[1, 2, 3]).random();
        let b: u64 = derive(7, &[1, 2, 3]).random();
        let c: u64 = derive(7, &[1, 3, 2]).random();
        let d: u64 = derive(8, &[1, 2, 3]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
