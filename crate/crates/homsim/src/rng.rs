//! Counter-based random streams.
//!
//! Every random decision in the simulator is drawn from a stream that is a
//! pure function of (master seed, a small tuple of ids). Typical ids are
//! (scan point, pulse index, lane). Workers can therefore sample any pulse
//! in any order and still reproduce the sequential stream bit for bit.

use rand::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Key for deriving per-(tuple) streams from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKey {
    seed: u64,
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        RngKey { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive a sub-key; chains are order-sensitive.
    #[inline]
    pub fn child(&self, id: u64) -> RngKey {
        RngKey {
            seed: mix64(self.seed.wrapping_add(GAMMA).wrapping_add(id)),
        }
    }

    /// Sequential stream for this key.
    #[inline]
    pub fn stream(&self) -> Stream {
        Stream {
            state: mix64(self.seed ^ 0x6A09_E667_F3BC_C908),
        }
    }

    /// One-shot draw addressed by a counter, without constructing a stream.
    #[inline(always)]
    pub fn at(&self, counter: u64) -> u64 {
        mix64(
            self.seed
                .wrapping_add(GAMMA.wrapping_mul(counter.wrapping_add(1))),
        )
    }
}

/// Small sequential generator (SplitMix64). Cheap to construct per pulse.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform f64 in [0, 1) with 53 random bits.
    #[inline(always)]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli trial against a precomputed 2^64-scaled threshold.
    #[inline(always)]
    pub fn hit(&mut self, threshold: u64) -> bool {
        self.next_u64() < threshold
    }

    /// Number of failures before the first success for success probability
    /// encoded as `ln(1-p)`. Used to skip runs of irrelevant pulses.
    #[inline]
    pub fn geometric_skip(&mut self, ln_one_minus_p: f64) -> u64 {
        // p == 1 encodes as -inf, every pulse relevant
        if ln_one_minus_p == f64::NEG_INFINITY {
            return 0;
        }
        let u = 1.0 - self.next_f64(); // (0, 1]
        let skips = (u.ln() / ln_one_minus_p).floor();
        if skips >= u64::MAX as f64 {
            u64::MAX
        } else {
            skips as u64
        }
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Stream::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next_u64().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = self.next_u64().to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Converts a probability to the 2^64-scaled threshold used by [`Stream::hit`].
#[inline]
pub fn threshold(p: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * (u64::MAX as f64)) as u64
    }
}
