//! Seeded, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by a master seed and a stream id.
//! Monte Carlo runners key streams by replicate so any assignment of
//! replicates to workers reproduces the same draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for replicate `rep` of experiment cell `cell`.
    pub fn for_replicate(seed: u64, cell: u32, rep: u32) -> Self {
        Self::new(seed, (u64::from(cell) << 32) | u64::from(rep))
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream);
        StreamRng { inner }
    }
}

/// Generator handed out by [`RandomSource::rng`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Binomial(m, p) as the sum of `m` Bernoulli draws.
    pub fn binomial(&mut self, m: u32, p: f64) -> u32 {
        (0..m).map(|_| u32::from(self.uniform() < p)).sum()
    }
}
