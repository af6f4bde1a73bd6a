//! Counter-based pseudo-random numbers, `splitmix64-ctr/v1`.
//!
//! Every stochastic routine in this crate derives its randomness from a
//! `u64` seed through this generator, so identical seeds give identical
//! results regardless of thread count or platform. The generator is the
//! SplitMix64 finalizer applied to `seed + (i + 1) * GAMMA` where `i` is a
//! running counter; it is stateless per draw, which is what makes per-task
//! substreams (indexed by task number) cheap and order-independent.

/// Weyl increment from the SplitMix64 reference implementation.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Name advertised in reports so seeds can be re-interpreted elsewhere.
pub const RNG_NAME: &str = "splitmix64-ctr/v1";

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-mode SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, counter: 0 }
    }

    /// Substream for task `index` under a master seed. Streams with
    /// distinct (seed, stream, index) triples are statistically independent
    /// for practical purposes.
    pub fn substream(master_seed: u64, stream: u64, index: u64) -> Self {
        let s = mix(master_seed ^ mix(stream.wrapping_mul(GAMMA) ^ index.wrapping_add(GAMMA)));
        CounterRng::new(s)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). n must be positive.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Multiply-shift rejection-free mapping; bias < 2^-64 * n is
        // irrelevant at the sample counts used here.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
