//! Deterministic random number generation.
//!
//! Reproducibility is a hard contract for this crate: the same seed must
//! produce the same graph bytes on every platform, and repetition seeds must
//! be derivable independently of execution order. We therefore pin the
//! generators explicitly instead of relying on the stream stability of an
//! external crate:
//!
//! * Seed mixing / stream splitting: the SplitMix64 finalizer with the
//!   constants `0x9E3779B97F4A7C15`, `0xBF58476D1CE4E5B9`,
//!   `0x94D049BB133111EB` (Steele, Lea & Flood, via Vigna's reference code).
//!   `rep_seed(master, r)` is the `r`-th output of the SplitMix64 sequence
//!   seeded with `master`.
//! * Main stream: xoshiro256++ (Blackman & Vigna), state seeded from four
//!   successive SplitMix64 outputs.
//! * `f64` uniforms use the top 53 bits (`(x >> 11) * 2^-53`), normals use
//!   the Box-Muller transform (two uniforms per draw, cosine branch only),
//!   and bounded integers use Lemire's unbiased multiply-shift rejection.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective; used for seed derivation and for
/// node-indexed tie-breaking draws that must not depend on execution order.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for repetition `rep` of a batch run with the given master seed.
///
/// This is the `rep`-th output of SplitMix64 seeded with `master_seed`, so
/// repetitions can be computed in any order (or in parallel) and still match
/// a sequential run.
#[inline]
pub fn rep_seed(master_seed: u64, rep: u64) -> u64 {
    mix64(master_seed.wrapping_add(rep.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// xoshiro256++ generator with SplitMix64 seeding.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut x = seed;
        let mut s = [0u64; 4];
        for w in &mut s {
            x = x.wrapping_add(GOLDEN_GAMMA);
            *w = mix64(x);
        }
        Rng { s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn next_normal(&mut self) -> f64 {
        // 1 - u in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n` (Lemire's method, unbiased). `n` must be > 0.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct items sampled uniformly from `pool`, by partial shuffle.
    pub fn sample_without_replacement<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        let mut items: Vec<T> = pool.to_vec();
        let k = k.min(items.len());
        for i in 0..k {
            let j = i + self.index(items.len() - i);
            items.swap(i, j);
        }
        items.truncate(k);
        items
    }

    /// Draw from a categorical distribution given by `probs` (assumed to sum
    /// to ~1); rounding mass beyond the last entry falls back to the last
    /// index.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

/// Uniform index in `0..n` derived from a single hash value; used for
/// node-indexed tie breaking where draws must be independent of the order in
/// which nodes are processed.
#[inline]
pub fn hash_index(hash: u64, n: usize) -> usize {
    ((hash as u128 * n as u128) >> 64) as usize
}
