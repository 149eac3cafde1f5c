use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;

/// Deterministic random stream addressed by `(seed, stream)`.
///
/// Each stream is an independent ChaCha keystream, so per-sample streams can
/// be drawn in any order (or concurrently) and still reproduce the same
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream, for nesting (e.g. sample `i` of experiment stream `s`).
    pub fn substream(&self, index: u64) -> Self {
        // splitmix-style mixing keeps children of different parents apart
        let mut z = self.stream.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(index.wrapping_add(1));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Self { seed: self.seed, stream: z ^ (z >> 31) ^ index }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    pub fn normal_vec(&self, len: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Matrix with i.i.d. `N(0, scale^2)` entries.
    pub fn normal_matrix(&self, rows: usize, cols: usize, scale: f64) -> Matrix {
        let mut rng = self.rng();
        Matrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
    }

    pub fn uniform_matrix(&self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        use rand::Rng;
        let mut rng = self.rng();
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_draws() {
        let a = RngStream::new(7, 3).normal_matrix(3, 4, 1.0);
        let _other = RngStream::new(7, 4).normal_matrix(10, 10, 1.0);
        let b = RngStream::new(7, 3).normal_matrix(3, 4, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, RngStream::new(7, 4).normal_matrix(3, 4, 1.0));
        assert_ne!(a, RngStream::new(8, 3).normal_matrix(3, 4, 1.0));
    }

    #[test]
    fn substreams_differ() {
        let s = RngStream::new(1, 0);
        assert_ne!(s.substream(0), s.substream(1));
        assert_eq!(s.substream(5), s.substream(5));
    }
}
