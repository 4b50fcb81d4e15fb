//! Replication streams.
//!
//! Every replication draws from ChaCha8 keyed with
//! `ChaCha8Rng::seed_from_u64(master_seed)` (the rand_core PCG32 seed
//! expansion) and switched to stream `replication_index ^ STREAM_SALT`.
//! ChaCha is counter based, so distinct stream ids give non-overlapping
//! keystreams, and the output is identical on every platform.
//!
//! Uniforms are built from the top 53 bits of `next_u64`, so they do not
//! depend on any float conversion inside `rand`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// XOR-folded into the stream id ("logshare" in ASCII).
pub const STREAM_SALT: u64 = 0x6c6f_6773_6861_7265;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        SeedSpec { master_seed, replication_index }
    }

    pub fn stream(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.replication_index ^ STREAM_SALT);
        StreamRng { inner }
    }
}

pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on `(0, 1]`, safe to feed to `ln`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * INV_2_53
    }

    /// Exponential variate with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform_open0().ln() / rate
    }

    /// Standard normal by Box–Muller (one of the pair is discarded).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
