//! Seeded pseudo-random generator with a fixed, platform-independent core.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood 2014): the state advances
//! by the 64-bit golden-ratio constant and each output is a finalizing
//! permutation of the state,
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Everything else derives from that stream: uniform doubles take the top
//! 53 bits, bounded integers use a multiply-shift, and normal deviates use
//! the polar Box-Muller transform (with the spare deviate cached). Equal
//! seeds therefore produce equal draw sequences, which the training loop
//! and the CLI rely on for byte-identical reruns.

/// Deterministic pseudo-random generator. Single-owner: it is never shared
/// between concurrent tasks; spawn independent streams with [`Rng::split`].
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            state: seed,
            spare_normal: None,
        }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next raw 64-bit draw (SplitMix64).
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by multiply-shift. `n` must be nonzero.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Standard normal deviate via the polar Box-Muller transform.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * m);
                return u * m;
            }
        }
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Derive an independent child generator. Advances this generator once.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}
