//! Monte Carlo trials of the full probe, plan, simulate and invert pipeline.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{estimate, AccuracySpec};
use crate::fmt::sig10;
use crate::planner::{min_planning_population, plan_with_mode, FramePlan, PlanMode, PlannerConfig};
use crate::rng::SimSeed;
use crate::sim::{fm_probe, run_rounds, ProbeConfig};

/// Everything a single trial needs besides `t` and the trial index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub spec: AccuracySpec,
    pub mode: PlanMode,
    pub seed: SimSeed,
    /// Skips the probe and plans for this bound instead.
    pub tm_override: Option<u64>,
    pub probe: ProbeConfig,
    pub planner: PlannerConfig,
}

impl TrialConfig {
    pub fn new(spec: AccuracySpec, mode: PlanMode, seed: SimSeed) -> Self {
        Self {
            spec,
            mode,
            seed,
            tm_override: None,
            probe: ProbeConfig::default(),
            planner: PlannerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.validate()?;
        self.planner.validate()?;
        if self.tm_override == Some(0) {
            return Err(Error::domain("t_m override must be at least 1"));
        }
        Ok(())
    }

    /// Probe result (or override) raised to the smallest bound the planner
    /// accepts, and the probe's slot cost.
    fn population_bound(&self, t: u64, trial: u64) -> (u64, u64) {
        let (raw, cost) = match self.tm_override {
            Some(tm) => (tm, 0),
            None => (
                fm_probe(t, &self.probe, self.seed, trial),
                self.probe.probe_slots as u64,
            ),
        };
        (raw.max(min_planning_population(&self.spec)), cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub t_values: Vec<u64>,
    pub trials: u64,
    pub trial: TrialConfig,
}

impl ExperimentSpec {
    pub fn new(t_values: Vec<u64>, trials: u64, trial: TrialConfig) -> Self {
        Self {
            t_values,
            trials,
            trial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_values.is_empty() {
            return Err(Error::domain("at least one population size is required"));
        }
        if self.trials == 0 {
            return Err(Error::domain(
                "at least one trial per population is required",
            ));
        }
        self.trial.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub t: u64,
    pub trial: u64,
    pub t_m: u64,
    pub r: f64,
    pub f: u64,
    pub p: f64,
    pub n: u64,
    pub epsilon: f64,
    /// `None` when every round saturated.
    pub t_hat: Option<f64>,
    pub z_bar: f64,
    pub probe_slots: u64,
    /// `probe_slots + (f + l) n`.
    pub slots: f64,
    pub within_beta: bool,
}

impl ExperimentRecord {
    pub const CSV_HEADER: &'static str = "t,trial,tm,r,f,p,n,epsilon,t_hat,z_bar,slots,within_beta";

    pub fn saturated(&self) -> bool {
        self.t_hat.is_none()
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.trial,
            self.t_m,
            sig10(self.r),
            self.f,
            sig10(self.p),
            self.n,
            sig10(self.epsilon),
            self.t_hat.map(sig10).unwrap_or_default(),
            sig10(self.z_bar),
            sig10(self.slots),
            self.within_beta,
        )
    }
}

/// Per-population aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: u64,
    /// Fraction of trials with `|t_hat - t| <= beta t`.
    pub reliability: f64,
    pub slots_mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for one trial.
    pub slots_std: f64,
    pub trials: u64,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "t,reliability,slots_mean,slots_std,trials";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.t,
            sig10(self.reliability),
            sig10(self.slots_mean),
            sig10(self.slots_std),
            self.trials
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Sorted by `(t, trial)`.
    pub records: Vec<ExperimentRecord>,
    /// One row per distinct `t`, ascending.
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn saturated_trials(&self) -> usize {
        self.records.iter().filter(|r| r.saturated()).count()
    }
}

/// One run of the pipeline: probe (or override), plan, `n` frames, invert.
///
/// A saturated estimate is recorded as a failure; planning errors propagate.
pub fn run_trial(t: u64, cfg: &TrialConfig, trial: u64) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let (t_m, probe_slots) = cfg.population_bound(t, trial);
    let plan = plan_with_mode(t_m, &cfg.spec, &cfg.planner, cfg.mode)?;
    complete_trial(t, trial, probe_slots, &plan, cfg)
}

fn complete_trial(
    t: u64,
    trial: u64,
    probe_slots: u64,
    plan: &FramePlan,
    cfg: &TrialConfig,
) -> Result<ExperimentRecord> {
    let frames = run_rounds(t, plan, cfg.seed, trial);
    let est = estimate(&frames, plan.channel())?;
    let within_beta = est
        .t_hat
        .is_some_and(|t_hat| (t_hat - t as f64).abs() <= cfg.spec.beta() * t as f64);
    Ok(ExperimentRecord {
        t,
        trial,
        t_m: plan.t_m,
        r: plan.r,
        f: plan.f,
        p: plan.p,
        n: plan.n,
        epsilon: plan.epsilon,
        t_hat: est.t_hat,
        z_bar: est.z_bar,
        probe_slots,
        slots: probe_slots as f64 + plan.cost,
        within_beta,
    })
}

/// Runs `trials` trials for every `t`, in parallel, and summarizes them.
///
/// Plans depend only on `t_m`, so each distinct bound is planned once.
/// Output order and content depend only on the spec and seed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cfg = &spec.trial;
    let mut t_values = spec.t_values.clone();
    t_values.sort_unstable();
    t_values.dedup();

    let jobs: Vec<(u64, u64)> = t_values
        .iter()
        .flat_map(|&t| (0..spec.trials).map(move |trial| (t, trial)))
        .collect();
    let bounds: Vec<(u64, u64)> = jobs
        .par_iter()
        .map(|&(t, trial)| cfg.population_bound(t, trial))
        .collect();

    let mut distinct: Vec<u64> = bounds.iter().map(|&(t_m, _)| t_m).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let plans: BTreeMap<u64, FramePlan> = distinct
        .par_iter()
        .map(|&t_m| plan_with_mode(t_m, &cfg.spec, &cfg.planner, cfg.mode).map(|p| (t_m, p)))
        .collect::<Result<_>>()?;

    let records: Vec<ExperimentRecord> = jobs
        .par_iter()
        .zip(bounds.par_iter())
        .map(|(&(t, trial), &(t_m, probe_slots))| {
            complete_trial(t, trial, probe_slots, &plans[&t_m], cfg)
        })
        .collect::<Result<_>>()?;

    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary })
}

/// Groups records by `t` (records must be sorted by `t`).
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    records
        .chunk_by(|a, b| a.t == b.t)
        .map(|group| {
            let count = group.len() as f64;
            let successes = group.iter().filter(|r| r.within_beta).count() as f64;
            let mean = group.iter().map(|r| r.slots).sum::<f64>() / count;
            let std = if group.len() > 1 {
                let ss: f64 = group.iter().map(|r| (r.slots - mean).powi(2)).sum();
                (ss / (count - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                t: group[0].t,
                reliability: successes / count,
                slots_mean: mean,
                slots_std: std,
                trials: group.len() as u64,
            }
        })
        .collect()
}

pub fn records_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(ExperimentRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SummaryRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn emit_records_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    write_file(path, &records_csv(records))
}

pub fn emit_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_file(path, &summary_csv(rows))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: PlanMode, seed: u64) -> TrialConfig {
        TrialConfig::new(
            AccuracySpec::new(0.95, 0.05).unwrap(),
            mode,
            SimSeed::new(seed),
        )
    }

    #[test]
    fn empty_population_trial() {
        let rec = run_trial(0, &cfg(PlanMode::Gert, 1), 0).unwrap();
        assert_eq!(rec.t_hat, Some(0.0));
        assert!(rec.within_beta);
        assert_eq!(rec.z_bar, -1.0);
    }

    #[test]
    fn trial_is_reproducible() {
        let c = cfg(PlanMode::Gert, 99);
        let a = run_trial(1200, &c, 3).unwrap();
        let b = run_trial(1200, &c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv_row(), b.to_csv_row());
    }

    #[test]
    fn slot_accounting() {
        let c = cfg(PlanMode::Gert, 5);
        let rec = run_trial(800, &c, 0).unwrap();
        let l = c.planner.inter_frame_gap_slots;
        assert_eq!(rec.probe_slots, 32);
        assert_eq!(rec.slots, 32.0 + (rec.f as f64 + l) * rec.n as f64);

        let mut over = c;
        over.tm_override = Some(1200);
        let rec = run_trial(800, &over, 0).unwrap();
        assert_eq!(rec.probe_slots, 0);
        assert_eq!(rec.t_m, 1200);
        assert_eq!(rec.slots, (rec.f as f64 + l) * rec.n as f64);
    }

    #[test]
    fn small_bound_is_raised_to_planning_minimum() {
        let mut c = cfg(PlanMode::Gert, 5);
        c.tm_override = Some(10);
        let rec = run_trial(5, &c, 0).unwrap();
        assert_eq!(rec.t_m, 400);
    }

    #[test]
    fn saturation_counts_as_failure() {
        // A huge population against a plan for a tiny bound fills every slot.
        let mut c = cfg(PlanMode::Waec, 5);
        c.tm_override = Some(400);
        let rec = run_trial(200_000, &c, 0).unwrap();
        assert!(rec.saturated());
        assert!(!rec.within_beta);
        assert_eq!(rec.z_bar, 1.0);
        assert!(rec.to_csv_row().contains(",,1,"));
    }

    #[test]
    fn single_trial_summary() {
        let spec = ExperimentSpec::new(vec![1200], 1, cfg(PlanMode::Gert, 4));
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.records.len(), 1);
        let rec = &out.records[0];
        let row = &out.summary[0];
        assert_eq!(row.trials, 1);
        assert_eq!(row.slots_mean, rec.slots);
        assert_eq!(row.slots_std, 0.0);
        assert_eq!(row.reliability, if rec.within_beta { 1.0 } else { 0.0 });
        assert_eq!(*rec, run_trial(1200, &spec.trial, 0).unwrap());
    }

    #[test]
    fn experiment_matches_individual_trials() {
        let spec = ExperimentSpec::new(vec![2400, 400], 6, cfg(PlanMode::Gert, 8));
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.records.len(), 12);
        assert_eq!(out.records[0].t, 400);
        for rec in &out.records {
            assert_eq!(*rec, run_trial(rec.t, &spec.trial, rec.trial).unwrap());
        }
    }

    #[test]
    fn invalid_specs() {
        let c = cfg(PlanMode::Gert, 1);
        assert!(run_experiment(&ExperimentSpec::new(vec![], 3, c)).is_err());
        assert!(run_experiment(&ExperimentSpec::new(vec![10], 0, c)).is_err());
        let mut bad = c;
        bad.tm_override = Some(0);
        assert!(run_trial(10, &bad, 0).is_err());
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(
            records_csv(&[]),
            format!("{}\n", ExperimentRecord::CSV_HEADER)
        );
        let spec = ExperimentSpec::new(vec![600], 2, cfg(PlanMode::Gert, 2));
        let out = run_experiment(&spec).unwrap();
        let text = records_csv(&out.records);
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 12);
        }
        let summary = summary_csv(&out.summary);
        assert_eq!(summary.lines().next().unwrap(), SummaryRow::CSV_HEADER);
        assert_eq!(summary.lines().count(), 2);
    }

    #[test]
    fn io_error_names_path() {
        let err = emit_records_csv(&[], Path::new("/nonexistent-dir/x/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/out.csv"));
    }
}
