//! The seeded random-number contract shared by every randomized operation.
//!
//! All randomness flows through [`SeedStream`], a ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng`) keyed by `SeedableRng::seed_from_u64`. Independent
//! streams for parallel replications are obtained by selecting a ChaCha stream
//! id with [`SeedStream::substream`], so results never depend on how work is
//! scheduled across threads.
//!
//! Integer draws and shuffles are defined here rather than delegated to `rand`
//! so that partitions can be reproduced bit-for-bit from another language:
//!
//! * `uniform_below(b)` draws `x = next_u64()` and rejects while
//!   `x >= u64::MAX - (u64::MAX % b)` (wrapping the threshold to `2^64` when the
//!   remainder is `b - 1`), then returns `x % b`.
//! * `shuffle` is the descending Fisher–Yates walk: for `i = len-1 .. 1`,
//!   swap `i` with `uniform_below(i + 1)`.
//!
//! Test vector: the first four `next_u64` outputs for seed 42 are recorded in
//! [`SEED_42_VECTOR`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// First four `next_u64` outputs of `SeedStream::new(42)`.
pub const SEED_42_VECTOR: [u64; 4] = [
    0xae90_bfb5_395d_5ba1,
    0xf345_3fc6_2579_9188,
    0x6d71_b708_c5b6_538c,
    0xa09a_b2f9_5816_6752,
];

#[derive(Debug, Clone)]
pub struct SeedStream {
    inner: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` under master seed `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Derive a child seed; used to hand seeds to sub-operations.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "uniform_below needs a positive bound");
        let rem = u64::MAX % bound;
        if rem == bound - 1 {
            // bound divides 2^64
            return self.inner.next_u64() % bound;
        }
        let zone = u64::MAX - rem;
        loop {
            let x = self.inner.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    pub fn index_below(&mut self, bound: usize) -> usize {
        self.uniform_below(bound as u64) as usize
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index_below(i + 1);
            xs.swap(i, j);
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn bernoulli(&mut self, p: f64) -> f64 {
        if self.uniform() < p {
            1.0
        } else {
            0.0
        }
    }

    pub fn sample<T, D: Distribution<T>>(&mut self, dist: &D) -> T {
        dist.sample(&mut self.inner)
    }
}

impl RngCore for SeedStream {
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
