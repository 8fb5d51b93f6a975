//! Deterministic, splittable random streams.
//!
//! Every frame draws from its own SplitMix64 stream whose starting state is
//! derived from `(master_seed, trial, round)`:
//!
//! ```text
//! mix(z)   = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!            z ^= z >> 27; z *= 0x94D049BB133111EB; z ^ (z >> 31)
//! key      = mix(master_seed ^ 0x9E3779B97F4A7C15)
//! key      = mix(key ^ (trial * 0xD1B54A32D192ED03))
//! state    = mix(key ^ (round * 0xABC98388FB8FAC03))
//! next()   = state += 0x9E3779B97F4A7C15; mix(state)
//! uniform  = (next() >> 11) * 2^-53                  in [0, 1)
//! below(n) = (next() as u128 * n as u128) >> 64      in [0, n)
//! ```
//!
//! All arithmetic wraps modulo 2^64. The probe frame of a trial uses
//! `round = u64::MAX`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TRIAL_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const ROUND_MUL: u64 = 0xABC9_8388_FB8F_AC03;

/// Round index reserved for the population probe.
pub const PROBE_ROUND: u64 = u64::MAX;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimSeed {
    pub master_seed: u64,
}

impl SimSeed {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, trial: u64, round: u64) -> SplitMix64 {
        let key = mix64(self.master_seed ^ GOLDEN);
        let key = mix64(key ^ trial.wrapping_mul(TRIAL_MUL));
        SplitMix64::new(mix64(key ^ round.wrapping_mul(ROUND_MUL)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)` by multiply-shift. Bias is below `n / 2^64`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Always consumes exactly one draw.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
