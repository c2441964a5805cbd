//! Counter-based deterministic random numbers.
//!
//! Every stream is keyed by a `(seed, stream)` pair, and output `n` of a
//! stream is a pure function of that key and `n`. Nothing depends on how many
//! other streams were drawn or in what order, which is what lets a parallel
//! sampler consume exactly the noise a sequential run would. Mixing is the
//! SplitMix64 finalizer; not cryptographically secure.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tag reserved for prior draws so they never collide with the
/// per-step noise streams, which use the step index as their tag.
pub const PRIOR_STREAM: u64 = u64::MAX;

/// Deterministic generator over one `(seed, stream)` key.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN).wrapping_add(1)));
        CounterRng { key, counter: 0, spare_normal: None }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller. Pairs are generated together and the
    /// second value cached, so a stream yields a fixed sequence regardless of
    /// how calls are batched.
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // Shift into (0, 1] so the log stays finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(r * s);
        r * c
    }

    pub fn standard_normal_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.next_standard_normal()).collect()
    }
}
