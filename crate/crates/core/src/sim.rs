//! Framed slotted Aloha under the {0,1} channel model.
//!
//! Each tag participates with probability `p` and, if active, hashes to
//! exactly one slot chosen uniformly from the frame. A slot reads 1 when at
//! least one tag replied in it.

use crate::error::{Error, Result};
use crate::estimator::{ChannelParams, FrameObservation};
use crate::planner::FramePlan;
use crate::rng::{SimSeed, PROBE_ROUND};

pub fn simulate_frame(
    t: u64,
    ch: ChannelParams,
    seed: SimSeed,
    trial: u64,
    round: u64,
) -> FrameObservation {
    let f = ch.f();
    let mut bits = vec![false; f];
    let mut rng = seed.stream(trial, round);
    for _ in 0..t {
        if rng.bernoulli(ch.p()) {
            bits[rng.below(f as u64) as usize] = true;
        }
    }
    FrameObservation::from_bits(bits)
}

/// Runs the `n` frames of a plan, rounds `0..n` in order.
pub fn run_rounds(t: u64, plan: &FramePlan, seed: SimSeed, trial: u64) -> Vec<FrameObservation> {
    let ch = plan.channel();
    (0..plan.n)
        .map(|round| simulate_frame(t, ch, seed, trial, round))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub probe_slots: usize,
    pub safety_multiplier: f64,
    pub fm_correction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            probe_slots: 32,
            safety_multiplier: 2.0,
            fm_correction: 1.0 / 0.773_51,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.probe_slots < 8 {
            return Err(Error::domain("probe needs at least 8 slots"));
        }
        if !(self.safety_multiplier.is_finite() && self.safety_multiplier >= 1.0) {
            return Err(Error::domain(
                "safety multiplier must be finite and at least 1",
            ));
        }
        if !(self.fm_correction.is_finite() && self.fm_correction > 0.0) {
            return Err(Error::domain("FM correction must be positive"));
        }
        Ok(())
    }
}

/// Index (1-based) of the first empty slot of a probe frame in which every
/// tag picks slot `j` with probability `2^-j`, the last slot absorbing the
/// remaining mass. Returns `probe_slots + 1` when no slot is empty.
pub fn probe_first_empty(t: u64, cfg: &ProbeConfig, seed: SimSeed, trial: u64) -> usize {
    let slots = cfg.probe_slots;
    let mut occupied = vec![false; slots];
    let mut rng = seed.stream(trial, PROBE_ROUND);
    for _ in 0..t {
        // leading zeros of a uniform word are geometric: P(lz = k) = 2^-(k+1)
        let j = (rng.next_u64().leading_zeros() as usize).min(slots - 1);
        occupied[j] = true;
    }
    occupied
        .iter()
        .position(|&o| !o)
        .map_or(slots + 1, |i| i + 1)
}

/// Rough upper bound on the population: `ceil(correction * 2^(R-1) * safety)`.
pub fn fm_probe(t: u64, cfg: &ProbeConfig, seed: SimSeed, trial: u64) -> u64 {
    let r = probe_first_empty(t, cfg, seed, trial);
    let raw = cfg.fm_correction * 2f64.powi(r as i32 - 1) * cfg.safety_multiplier;
    (raw.ceil() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{g, variance_z};

    fn ch(f: usize, p: f64) -> ChannelParams {
        ChannelParams::new(f, p).unwrap()
    }

    #[test]
    fn empty_population() {
        let obs = simulate_frame(0, ch(16, 0.5), SimSeed::new(1), 0, 0);
        assert_eq!(obs.n_nonempty, 0);
        assert_eq!(obs.z, -1.0);
    }

    #[test]
    fn single_tag_single_slot() {
        for round in 0..50 {
            let obs = simulate_frame(1, ch(4, 1.0), SimSeed::new(3), 0, round);
            assert_eq!(obs.n_nonempty, 1);
            assert_eq!(obs.z, -0.5);
        }
    }

    #[test]
    fn counts_match_bits() {
        for round in 0..200 {
            let obs = simulate_frame(150, ch(97, 0.8), SimSeed::new(9), 3, round);
            let ones = obs.bits.iter().filter(|&&b| b).count();
            assert_eq!(ones, obs.n_nonempty);
            assert_eq!(obs.n_zero, 97 - ones);
        }
    }

    #[test]
    fn deterministic() {
        let a = simulate_frame(500, ch(300, 0.6), SimSeed::new(11), 4, 2);
        let b = simulate_frame(500, ch(300, 0.6), SimSeed::new(11), 4, 2);
        assert_eq!(a, b);
        let c = simulate_frame(500, ch(300, 0.6), SimSeed::new(11), 4, 3);
        assert_ne!(a.bits, c.bits);
    }

    #[test]
    fn empty_slot_marginal_matches_exact_power() {
        // Marginal per-slot emptiness equals (1 - p/f)^t under the one-slot-per-tag protocol.
        let c = ch(50, 0.7);
        let t = 60u64;
        let frames = 100_000u64;
        let seed = SimSeed::new(2024);
        let mut empties = 0u64;
        for round in 0..frames {
            empties += simulate_frame(t, c, seed, 0, round).n_zero as u64;
        }
        let n = (frames * c.f() as u64) as f64;
        let p0 = (1.0 - 0.7f64 / 50.0).powi(60);
        // Slots in one frame are dependent; bound with the per-frame variance of N0.
        let a = p0;
        let b = (1.0 - 2.0 * 0.7f64 / 50.0).powi(60);
        let f = c.f() as f64;
        let var_n0 = f * a * (1.0 - a) + f * (f - 1.0) * (b - a * a);
        let se = (var_n0 * frames as f64).sqrt() / n;
        let binom_se = (p0 * (1.0 - p0) / n).sqrt();
        let freq = empties as f64 / n;
        assert!(
            (freq - p0).abs() <= 4.0 * se.max(binom_se),
            "freq={freq} p0={p0}"
        );
    }

    #[test]
    fn protocol_moments() {
        // Sample mean matches g; sample variance matches the exact occupancy
        // variance of the one-slot-per-tag protocol, which sits below the
        // independent-slot value for any t >= 2.
        let c = ch(200, 0.9);
        let t = 180u64;
        let frames = 100_000u64;
        let seed = SimSeed::new(77);
        let zs: Vec<f64> = (0..frames)
            .map(|r| simulate_frame(t, c, seed, 1, r).z)
            .collect();
        let mean = zs.iter().sum::<f64>() / frames as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (frames - 1) as f64;
        let model_var = variance_z(t as f64, c);
        assert!((mean - g(t as f64, c)).abs() <= 4.0 * (model_var / frames as f64).sqrt());

        let f = 200.0f64;
        let a = (1.0 - 0.9 / f).powi(180);
        let b = (1.0 - 1.8 / f).powi(180);
        let var_n0 = f * a * (1.0 - a) + f * (f - 1.0) * (b - a * a);
        let exact = 4.0 * var_n0 / (f * f);
        assert!((var / exact - 1.0).abs() < 0.05, "var={var} exact={exact}");
        assert!(exact < model_var);
    }

    #[test]
    fn stream_independence() {
        let c = ch(64, 1.0);
        let seed = SimSeed::new(5);
        let pairs = 100_000u64;
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..pairs)
            .map(|i| {
                (
                    simulate_frame(64, c, seed, i, 0).z,
                    simulate_frame(64, c, seed, i, 1).z,
                )
            })
            .unzip();
        let mx = xs.iter().sum::<f64>() / pairs as f64;
        let my = ys.iter().sum::<f64>() / pairs as f64;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.01, "corr={corr}");
    }

    #[test]
    fn probe_empty_population() {
        let cfg = ProbeConfig::default();
        assert_eq!(probe_first_empty(0, &cfg, SimSeed::new(1), 0), 1);
        let expected = (cfg.fm_correction * cfg.safety_multiplier).ceil() as u64;
        assert_eq!(fm_probe(0, &cfg, SimSeed::new(1), 0), expected);
    }

    #[test]
    fn probe_deterministic() {
        let cfg = ProbeConfig::default();
        let a = fm_probe(1000, &cfg, SimSeed::new(8), 5);
        assert_eq!(a, fm_probe(1000, &cfg, SimSeed::new(8), 5));
    }

    #[test]
    fn probe_config_validation() {
        assert!(ProbeConfig::default().validate().is_ok());
        let bad = ProbeConfig {
            probe_slots: 4,
            ..ProbeConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProbeConfig {
            safety_multiplier: 0.5,
            ..ProbeConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn probe_coverage_matches_exact_probability() {
        // With defaults, t_m >= 1000 iff slots 1..=9 are all occupied; by
        // inclusion-exclusion over those slots that has probability 0.840951.
        let cfg = ProbeConfig::default();
        let seed = SimSeed::new(31);
        let probes = 2000u64;
        let hits = (0..probes)
            .filter(|&trial| fm_probe(1000, &cfg, seed, trial) >= 1000)
            .count() as f64;
        let exact = 0.840_950_929_460_401;
        let se = (exact * (1.0 - exact) / probes as f64).sqrt();
        assert!(
            (hits / probes as f64 - exact).abs() <= 4.0 * se,
            "coverage={}",
            hits / probes as f64
        );
    }

    #[test]
    fn probe_coverage_with_larger_multiplier() {
        // multiplier 4: exact coverage at t = 1000 is 0.979653
        let cfg = ProbeConfig {
            safety_multiplier: 4.0,
            ..ProbeConfig::default()
        };
        let seed = SimSeed::new(31);
        let hits = (0..200)
            .filter(|&trial| fm_probe(1000, &cfg, seed, trial) >= 1000)
            .count();
        assert!(hits >= 190, "hits={hits}");
    }

    #[test]
    fn probe_scales_with_population() {
        let cfg = ProbeConfig::default();
        let seed = SimSeed::new(13);
        let median = |t: u64| {
            let mut rs: Vec<usize> = (0..401)
                .map(|trial| probe_first_empty(t, &cfg, seed, trial))
                .collect();
            rs.sort_unstable();
            rs[200] as f64
        };
        for t in [500u64, 2000, 8000] {
            let shift = median(2 * t) - median(t);
            assert!((shift - 1.0).abs() <= 1.0, "t={t} shift={shift}");
        }
        let mean = |t: u64| {
            (0..2000)
                .map(|trial| probe_first_empty(t, &cfg, seed, trial) as f64)
                .sum::<f64>()
                / 2000.0
        };
        let shift = mean(4000) - mean(2000);
        assert!((shift - 1.0).abs() < 0.15, "mean shift={shift}");
    }
}
