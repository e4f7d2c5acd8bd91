//! Deterministic random streams.
//!
//! Every random quantity in this crate is drawn from ChaCha8 (`rand_chacha`)
//! seeded with `seed_from_u64`, with an explicit stream id per independent
//! consumer. Gaussian variates use the Box-Muller transform; subsampling
//! uses a partial Fisher-Yates shuffle. Results are bit-reproducible across
//! platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Offset added to a training seed to obtain the Monte Carlo evaluation seed.
pub const MC_SEED_OFFSET: u64 = 0x9E37_79B9;

/// Points per independently seeded chunk when drawing large samples.
pub const CHUNK: usize = 4096;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal variates by Box-Muller, caching the second value.
pub struct Normals<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> Normals<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// `m` distinct indices drawn uniformly from `0..n`, in draw order.
pub fn sample_without_replacement<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    assert!(m <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}
