//! SplitMix64, the reference generator for every seeded computation.
//!
//! The recurrence is normative so that seeded runs can be reproduced bit for
//! bit by other implementations:
//!
//! ```text
//! s <- s + 0x9E3779B97F4A7C15
//! z <- s
//! z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)                       (all arithmetic mod 2^64)
//! ```
//!
//! Uniform doubles are `(out >> 11) * 2^-53`, so they lie in `[0, 1)`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * UNIT
    }

    /// Uniform draw in `[-limit, limit)`.
    pub fn next_symmetric(&mut self, limit: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * limit
    }

    /// Standard normal draw (Box-Muller, cosine branch; consumes two uniforms).
    pub fn next_gaussian(&mut self) -> f64 {
        // 1 - u keeps the logarithm argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Advances the stream by `n` outputs.
    pub fn skip(&mut self, n: usize) {
        self.state = self
            .state
            .wrapping_add(GOLDEN_GAMMA.wrapping_mul(n as u64));
    }

    /// Derives an independent child seed, e.g. for cross-validation fold `index`.
    pub fn derive_seed(root: u64, index: u64) -> u64 {
        let mut rng = SplitMix64::new(root ^ index.wrapping_mul(MIX_2));
        rng.next_u64()
    }
}
