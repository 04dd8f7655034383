//! Seeded pseudo-random numbers with a fully specified algorithm, so that
//! seeded experiments reproduce bit-for-bit across platforms and ports.
//!
//! Uniforms come from SplitMix64 (a Weyl counter `s += 0x9E3779B97F4A7C15`
//! followed by the standard 64-bit finalizer); doubles take the top 53 bits.
//! Normals use the basic Box–Muller transform
//! `√(−2 ln u₁)·cos(2πu₂)`, `√(−2 ln u₁)·sin(2πu₂)` with `u₁ ∈ (0, 1]`,
//! returning the cosine variate first and caching the sine variate.

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_vec(&mut self, len: usize, std_dev: f64) -> Vec<f64> {
        (0..len).map(|_| std_dev * self.standard_normal()).collect()
    }

    /// Uniform sample from the Euclidean ball of the given radius.
    pub fn in_ball(&mut self, dim: usize, radius: f64) -> Vec<f64> {
        let dir = self.normal_vec(dim, 1.0);
        let norm = dir
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let r = radius * self.next_f64().powf(1.0 / dim as f64);
        dir.into_iter().map(|v| v * r / norm).collect()
    }
}
