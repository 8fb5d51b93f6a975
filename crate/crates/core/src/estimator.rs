//! Expected-value curve of the `(N_n - N_0) / f` statistic and its inversion.
//!
//! All runtime formulas use the exact power `(1 - p/f)^t`; the exponential
//! approximation `e^{-tp/f}` only appears in the planner's `k(r)` bounds.

use crate::error::{Error, Result};

/// Required accuracy: `P[|t_hat - t| <= beta * t] >= alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracySpec {
    alpha: f64,
    beta: f64,
}

impl AccuracySpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Frame size and persistence probability announced by the reader.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    f: usize,
    p: f64,
}

impl ChannelParams {
    /// `f >= 1` and `0 < p <= 1`, so the per-slot reply probability `p/f`
    /// never exceeds one. `p/f == 1` (a single slot with `p = 1`) is accepted
    /// but cannot be inverted.
    pub fn new(f: usize, p: f64) -> Result<Self> {
        if f == 0 {
            return Err(Error::domain("frame size must be at least 1"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!(
                "persistence probability must lie in (0, 1], got {p}"
            )));
        }
        Ok(Self { f, p })
    }

    pub(crate) fn new_unchecked(f: usize, p: f64) -> Self {
        debug_assert!(f >= 1 && p > 0.0 && p <= 1.0);
        Self { f, p }
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Probability that a given tag replies in a given slot.
    pub fn reply_prob(&self) -> f64 {
        self.p / self.f as f64
    }

    /// Average number of active tags per slot for population `t`.
    pub fn load(&self, t: f64) -> f64 {
        t * self.reply_prob()
    }
}

/// One observed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    /// `true` for a non-empty slot.
    pub bits: Vec<bool>,
    pub n_zero: usize,
    pub n_nonempty: usize,
    pub z: f64,
}

impl FrameObservation {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let n_nonempty = bits.iter().filter(|&&b| b).count();
        let n_zero = bits.len() - n_nonempty;
        let z = statistic(n_nonempty, n_zero);
        Self {
            bits,
            n_zero,
            n_nonempty,
            z,
        }
    }

    pub fn frame_size(&self) -> usize {
        self.bits.len()
    }
}

// (N_n - N_0) / f with an exact integer numerator.
fn statistic(n_nonempty: usize, n_zero: usize) -> f64 {
    let f = n_nonempty + n_zero;
    (n_nonempty as f64 - n_zero as f64) / f as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub z_bar: f64,
    /// Raw estimate; `None` when the rounds saturated.
    pub t_hat: Option<f64>,
    pub rounds_used: usize,
    pub saturated: bool,
}

impl EstimateResult {
    pub fn t_hat_rounded(&self) -> Option<u64> {
        self.t_hat.map(|t| t.round() as u64)
    }
}

/// Probabilities `(p0, pn)` that a slot is empty or non-empty.
pub fn slot_probs(t: f64, ch: ChannelParams) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    let p0 = if t == 0.0 {
        1.0
    } else {
        (t * (-ch.reply_prob()).ln_1p()).exp()
    };
    (p0, 1.0 - p0)
}

/// Expected value of the statistic, `1 - 2(1 - p/f)^t`.
pub fn g(t: f64, ch: ChannelParams) -> f64 {
    let (p0, _) = slot_probs(t, ch);
    1.0 - 2.0 * p0
}

/// Closed-form inverse of [`g`].
pub fn g_inverse(z_bar: f64, ch: ChannelParams) -> Result<f64> {
    if z_bar.is_nan() || z_bar > 1.0 {
        return Err(Error::domain(format!(
            "statistic must lie in [-1, 1], got {z_bar}"
        )));
    }
    if z_bar == 1.0 {
        return Err(Error::Saturated);
    }
    if z_bar <= -1.0 {
        return Ok(0.0);
    }
    let log_keep = (-ch.reply_prob()).ln_1p();
    if log_keep == f64::NEG_INFINITY {
        return Err(Error::domain(
            "p/f = 1: every population above zero fills the frame, statistic is not invertible",
        ));
    }
    let t = ((1.0 - z_bar) / 2.0).ln() / log_keep;
    Ok(t.max(0.0))
}

/// Variance of the single-frame statistic, `(1/f) [1 - (pn - p0)^2]`.
pub fn variance_z(t: f64, ch: ChannelParams) -> f64 {
    let (p0, pn) = slot_probs(t, ch);
    let mu = pn - p0;
    ((1.0 - mu * mu) / ch.f() as f64).max(0.0)
}

pub fn z_statistic(obs: &FrameObservation) -> Result<f64> {
    let f = obs.bits.len();
    if f == 0 {
        return Err(Error::InconsistentObservation("empty frame".into()));
    }
    let ones = obs.bits.iter().filter(|&&b| b).count();
    if ones != obs.n_nonempty || f - ones != obs.n_zero {
        return Err(Error::InconsistentObservation(format!(
            "counts N0={} Nn={} disagree with bit sequence ({} zeros, {} ones)",
            obs.n_zero,
            obs.n_nonempty,
            f - ones,
            ones
        )));
    }
    Ok(statistic(obs.n_nonempty, obs.n_zero))
}

/// Averages the per-round statistic and inverts it.
///
/// A mean of exactly 1 is reported through `saturated` rather than as an
/// error so callers can still record the rounds.
pub fn estimate(observations: &[FrameObservation], ch: ChannelParams) -> Result<EstimateResult> {
    let first = observations.first().ok_or(Error::EmptyInput)?;
    let f = first.frame_size();
    let mut sum = 0.0;
    for obs in observations {
        if obs.frame_size() != f {
            return Err(Error::MixedFrameSizes {
                first: f,
                other: obs.frame_size(),
            });
        }
        sum += z_statistic(obs)?;
    }
    if f != ch.f() {
        return Err(Error::MixedFrameSizes {
            first: ch.f(),
            other: f,
        });
    }
    let rounds_used = observations.len();
    let z_bar = (sum / rounds_used as f64).clamp(-1.0, 1.0);
    match g_inverse(z_bar, ch) {
        Ok(t) => Ok(EstimateResult {
            z_bar,
            t_hat: Some(t),
            rounds_used,
            saturated: false,
        }),
        Err(Error::Saturated) => Ok(EstimateResult {
            z_bar,
            t_hat: None,
            rounds_used,
            saturated: true,
        }),
        Err(e) => Err(e),
    }
}
