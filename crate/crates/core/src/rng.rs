//! Counter-based pseudo-random streams.
//!
//! Thermal momenta are drawn from keyed counters rather than a sequential
//! generator state, so any subset of particles can be sampled in any order
//! (per region, per injection epoch) and still reproduce the exact values a
//! single global pass would produce. The mixer is splitmix64; each draw
//! hashes (seed, stream, counter).

use std::f64::consts::TAU;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A keyed stream: `uniform(ctr)` and `gaussian(ctr)` are pure functions of
/// (seed, stream, ctr).
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix64(seed ^ mix64(stream.wrapping_mul(0xa076_1d64_78bd_642f))),
        }
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, ctr: u64) -> f64 {
        let bits = mix64(self.key ^ mix64(ctr));
        ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box–Muller; consumes counters 2·ctr, 2·ctr+1.
    #[inline]
    pub fn gaussian(&self, ctr: u64) -> f64 {
        let u1 = self.uniform(2 * ctr);
        let u2 = self.uniform(2 * ctr + 1);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}
