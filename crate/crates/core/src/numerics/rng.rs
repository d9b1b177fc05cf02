//! Counter-based random source with labeled sub-streams.
//!
//! Every experiment component (data draw, weight init, augmentation, noise)
//! owns a named sub-stream derived from one root seed, so results do not
//! depend on the order in which components consume randomness.
//!
//! The generator is SplitMix64: the state advances by a fixed odd constant
//! and each output is a bijective mix of the counter. Sub-streams reseed the
//! counter from the parent seed and the label, so a split never disturbs the
//! parent stream.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT_LABEL_TAG: u64 = 0xA0B4_28DB_8A2A_1D4F;
const SPLIT_INDEX_TAG: u64 = 0x4528_21E6_38D0_1377;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Deterministic stream of pseudo-random draws.
///
/// Two sources built with the same seed produce bit-identical sequences.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    state: u64,
    spare_normal: Option<f64>,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed, spare_normal: None }
    }

    /// Seed this stream was created with; identifies the stream, not its position.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the sub-stream named `label`. Does not advance `self`.
    pub fn split(&self, label: &str) -> RandomSource {
        RandomSource::new(mix64(self.seed ^ mix64(fnv1a(label.as_bytes()) ^ SPLIT_LABEL_TAG)))
    }

    /// Derives the `index`-th sub-stream. Does not advance `self`.
    pub fn split_index(&self, index: u64) -> RandomSource {
        RandomSource::new(mix64(self.seed ^ mix64(index.wrapping_add(SPLIT_INDEX_TAG))))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, bound)` via rejection sampling (no modulo bias).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0) is undefined");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let v = self.next_u64();
            if v >= threshold {
                return v % bound;
            }
        }
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    /// Uniform draw from {+1, -1}.
    pub fn sign(&mut self) -> f64 {
        if self.coin() {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via Box-Muller; the second draw of each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u in (0, 1] so the log is finite
        let u = 1.0 - self.uniform();
        let v = self.uniform();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * v;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Vector of standard normals.
    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
