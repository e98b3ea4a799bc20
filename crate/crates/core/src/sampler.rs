//! Seedable random streams and exact binomial variates.
//!
//! Every bit of randomness in the crate comes from an [`RngStream`]. A
//! stream is identified by `(master_seed, replica_index)`: the pair is
//! folded through the SplitMix64 finalizer into a 128-bit seed for a
//! PCG 64-bit MCG generator (period 2¹²⁶). Equal pairs give identical
//! sequences; distinct replica indices land on unrelated seeds.

use rand::{RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution};
use rand_pcg::Pcg64Mcg;

use crate::error::{Error, Result};

/// Recorded in reports so results can be tied to the generator that made them.
pub const ALGORITHM_ID: &str = "pcg64mcg/splitmix64-split";

/// Above this mean, sequential inversion is replaced by a rejection sampler.
const INVERSION_MAX_MEAN: f64 = 30.0;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct RngStream {
    rng: Pcg64Mcg,
    master_seed: u64,
    replica_index: u64,
}

/// Build the stream for one replica.
///
/// The seed words are `s₀ = splitmix64(master_seed ^ splitmix64(index))`
/// and `s₁ = splitmix64(s₀)`, laid out little-endian.
pub fn seed_stream(master_seed: u64, replica_index: u64) -> RngStream {
    let s0 = splitmix64(master_seed ^ splitmix64(replica_index));
    let s1 = splitmix64(s0);
    let mut seed = [0u8; 16];
    seed[..8].copy_from_slice(&s0.to_le_bytes());
    seed[8..].copy_from_slice(&s1.to_le_bytes());
    RngStream {
        rng: Pcg64Mcg::from_seed(seed),
        master_seed,
        replica_index,
    }
}

impl RngStream {
    pub fn algorithm_id(&self) -> &'static str {
        ALGORITHM_ID
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replica_index(&self) -> u64 {
        self.replica_index
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Binomial sampler for a fixed success probability and varying trial count.
///
/// The walk draws `Bin(m, p)` with the same `p` at every step, so the
/// per-`p` constants are computed once. Probabilities above one half are
/// handled through `m - Bin(m, 1-p)`.
#[derive(Debug, Clone, Copy)]
pub struct BinomialSampler {
    p: f64,
    /// Success probability actually sampled (`min(p, 1-p)`).
    q: f64,
    flipped: bool,
    /// `ln(1 - q)`
    log_fail: f64,
    /// `q / (1 - q)`
    odds: f64,
}

impl BinomialSampler {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!(
                "binomial probability must lie in [0, 1], got {p}"
            )));
        }
        let flipped = p > 0.5;
        let q = if flipped { 1.0 - p } else { p };
        Ok(BinomialSampler {
            p,
            q,
            flipped,
            log_fail: (-q).ln_1p(),
            odds: q / (1.0 - q),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Draw `Bin(m, p)`.
    #[inline]
    pub fn sample(&self, stream: &mut RngStream, m: u64) -> u64 {
        if m == 0 || self.q == 0.0 {
            return if self.flipped { m } else { 0 };
        }
        let k = if m as f64 * self.q <= INVERSION_MAX_MEAN {
            self.invert(stream, m)
        } else {
            // Mean above the inversion cutoff; only reached off the walk's hot path.
            Binomial::new(m, self.q)
                .expect("probability checked at construction")
                .sample(stream)
        };
        if self.flipped {
            m - k
        } else {
            k
        }
    }

    /// Sequential-search inversion from `k = 0`.
    #[inline]
    fn invert(&self, stream: &mut RngStream, m: u64) -> u64 {
        let mut mass = (m as f64 * self.log_fail).exp();
        let mut u = stream.uniform();
        let mut k = 0u64;
        loop {
            if u < mass {
                return k;
            }
            u -= mass;
            if k == m {
                // Rounding left a sliver of mass beyond the support.
                return m;
            }
            mass *= self.odds * (m - k) as f64 / (k + 1) as f64;
            k += 1;
        }
    }
}

/// Draw one `Bin(m, p)` variate.
pub fn binomial(stream: &mut RngStream, m: u64, p: f64) -> Result<u64> {
    Ok(BinomialSampler::new(p)?.sample(stream, m))
}
