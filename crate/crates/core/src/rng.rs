//! Seed handling. Every random draw in the crate descends from a master seed
//! and a stream id, so a replicate is reproducible in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Stream for the `replicate`-th draw of the `task`-th independent job
    /// (e.g. one displacement of a pair-connectedness scan).
    pub fn task_stream(seed: u64, task: u64, replicate: u64) -> Self {
        Self::new(seed, (task << 40) ^ replicate)
    }

    /// Key for [`pair_uniform`]; distinct for distinct (seed, stream).
    pub fn edge_key(&self) -> u64 {
        mix64(self.seed ^ mix64(self.stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based uniform in [0, 1) for the unordered pair {i, j}.
///
/// The value depends only on the key and the sorted pair, never on the order in
/// which pairs are visited.
#[inline]
pub fn pair_uniform(key: u64, i: usize, j: usize) -> f64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let h = mix64(key ^ mix64((a as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ mix64(b as u64 + 1)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_spec_same_stream() {
        let a: Vec<u64> = (0..8).map({
            let mut r = RngSpec::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = RngSpec::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        let mut c = RngSpec::new(7, 4).rng();
        assert_ne!(a[0], c.random::<u64>());
    }

    #[test]
    fn pair_uniform_is_symmetric_and_uniform() {
        let key = RngSpec::new(1, 2).edge_key();
        assert_eq!(pair_uniform(key, 3, 9), pair_uniform(key, 9, 3));
        let n = 200_000;
        let mut sum = 0.0;
        let mut below = 0usize;
        for k in 0..n {
            let u = pair_uniform(key, k, k + 17);
            assert!((0.0..1.0).contains(&u));
            sum += u;
            if u < 0.25 {
                below += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
        let frac = below as f64 / n as f64;
        assert!((frac - 0.25).abs() < 4.0 * (0.25 * 0.75 / n as f64).sqrt());
    }
}
