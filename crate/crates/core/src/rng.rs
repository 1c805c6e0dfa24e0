use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded, stream-separated random source.
///
/// Backed by ChaCha8, whose output is fully specified and therefore identical
/// across platforms. Two streams with the same `(seed, stream)` pair produce
/// the same draws; distinct stream ids are independent.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Stream for work item `item` of step `step` under a run seed. Used to give
    /// every (iteration, sequence) pair its own stream so results do not
    /// depend on how work is spread over threads.
    pub fn for_item(seed: u64, step: u64, item: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(step.wrapping_add(0x5151))), item)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Draws an index with probability proportional to `weights`.
    ///
    /// Weights need not be normalized; they must be non-negative with a
    /// positive finite sum.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0 && total.is_finite(), "bad weights {weights:?}");
        let mut u = self.uniform() * total;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if u < w {
                    return i;
                }
                u -= w;
                last = i;
            }
        }
        // rounding left u marginally above the final bucket
        last
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seed_and_stream_replay() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        for _ in 0..1_000_000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_diverge() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn first_draws_are_pinned() {
        // Guards the cross-platform contract: changing the generator changes
        // every seeded result downstream.
        let mut r = RngStream::new(1, 0);
        let first = r.next_u64();
        let mut again = RngStream::new(1, 0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, 7_424_550_030_962_593_201);
        assert_ne!(first, RngStream::new(2, 0).next_u64());
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut r = RngStream::new(9, 9);
        for _ in 0..10_000 {
            assert_eq!(r.categorical(&[0.0, 2.0, 0.0]), 1);
        }
    }
}
