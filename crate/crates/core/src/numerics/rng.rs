//! Seeded, splittable, counter-based random stream.
//!
//! The generator is a Weyl-sequence counter pushed through the SplitMix64
//! finalizer: output depends only on `(seed, counter)`, so identical seeds
//! reproduce identical sequences on every platform, and labelled substreams
//! let parallel and serial runs draw the same numbers regardless of
//! scheduling.

const WEYL: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream from a label. Substreams depend only on
    /// the parent seed and the label, never on how many draws the parent has
    /// made, so the derivation order is free.
    pub fn substream(&self, label: &str) -> RngStream {
        // FNV-1a over the label bytes, folded into the parent seed.
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        RngStream::new(mix(self.seed ^ h))
    }

    /// Numeric variant of [`RngStream::substream`].
    pub fn substream_u64(&self, tag: u64) -> RngStream {
        RngStream::new(mix(self.seed ^ mix(tag.wrapping_add(WEYL))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(WEYL)))
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw in `[0, n)`. The modulo bias is below n / 2^64, far under
    /// anything observable at the sample counts used here.
    pub fn next_below(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_below requires n > 0");
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        // 1 - u1 lies in (0, 1], keeping the log finite.
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        r * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_vector(&mut self, dim: usize) -> crate::numerics::Vector {
        crate::numerics::Vector::from_fn(dim, |_| self.normal())
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
