//! Tag population estimation for framed slotted Aloha readers.
//!
//! The reader observes a {0,1} sequence per frame (0 = empty slot, 1 = any
//! reply) and averages the statistic `Z = (N_n - N_0) / f` over `n` rounds.
//! Because `E[Z] = 1 - 2(1 - p/f)^t` is strictly increasing in `t`, the
//! averaged statistic is inverted in closed form to recover the estimate.
//!
//! The crate is split into:
//!
//! - [`estimator`]: slot probabilities, the expected-value curve, its inverse
//!   and variance, and estimation from observed frames.
//! - [`planner`]: Gaussian-approximation error bounds, frame size limits,
//!   round counts and the slot-cost minimizing search that yields a
//!   [`FramePlan`].
//! - [`sim`]: a seeded, protocol-faithful framed slotted Aloha simulator and
//!   a Flajolet-Martin style probe for the population upper bound.
//! - [`harness`]: Monte Carlo trials and CSV output.

pub mod error;
pub mod estimator;
pub mod fmt;
pub mod harness;
pub mod normal;
pub mod planner;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{
    estimate, g, g_inverse, slot_probs, variance_z, z_statistic, AccuracySpec, ChannelParams,
    EstimateResult, FrameObservation,
};
pub use harness::{
    emit_records_csv, emit_summary_csv, records_csv, run_experiment, run_trial, summary_csv,
    ExperimentOutput, ExperimentRecord, ExperimentSpec, SummaryRow, TrialConfig,
};
pub use normal::inverse_q;
pub use planner::{
    epsilon_for, epsilon_max, f_bounds, k, k1, k2, min_planning_population, persistence_for, plan,
    plan_with_mode, r_max, rounds_required, FramePlan, PlanMode, PlannerConfig, RoundsBreakdown,
};
pub use rng::{SimSeed, SplitMix64};
pub use sim::{fm_probe, run_rounds, simulate_frame, ProbeConfig};
