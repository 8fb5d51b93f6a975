//! Frame size, persistence probability and round count selection.
//!
//! For a load factor `r = t_m p / f`, the single-frame statistic is treated
//! as Gaussian once `eps^2 f >= k(r)`, where `eps` is the approximation error
//! charged against the reliability budget (`alpha + eps <= 1`). The planner
//! scans `r` over `(0, r_max]` and, for each `r`, every admissible frame size,
//! and keeps the plan with the smallest slot cost `(f + l) n`.

use crate::error::{Error, Result};
use crate::estimator::{g, variance_z, AccuracySpec, ChannelParams};
use crate::normal::inverse_q;

/// `e^{-r} / (1 - e^{-r})`, the bound from the upper deviation `1 - mu`.
pub fn k1(r: f64) -> Result<f64> {
    check_load(r)?;
    Ok(1.0 / r.exp_m1())
}

/// `(1 - e^{-r}) / e^{-r} = e^r - 1`, the bound from the lower deviation.
pub fn k2(r: f64) -> Result<f64> {
    check_load(r)?;
    Ok(r.exp_m1())
}

/// `max(k1, k2)`; at least 1, with equality at `r = ln 2`.
pub fn k(r: f64) -> Result<f64> {
    Ok(k1(r)?.max(k2(r)?))
}

fn check_load(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "load factor must be positive and finite, got {r}"
        )))
    }
}

/// Largest approximation error the reliability budget can absorb.
pub fn epsilon_max(spec: &AccuracySpec) -> f64 {
    1.0 - spec.alpha()
}

/// Smallest `eps` with `eps^2 f >= k(r)`.
pub fn epsilon_for(f: u64, r: f64) -> Result<f64> {
    if f == 0 {
        return Err(Error::domain("frame size must be at least 1"));
    }
    Ok((k(r)? / f as f64).sqrt())
}

/// `(f_min, f_max)` for load `r`: `f_max = floor(t_m / r)` keeps `p <= 1`,
/// `f_min = ceil(k(r) / eps_max^2)` keeps `eps <= eps_max`.
pub fn f_bounds(r: f64, t_m: u64, spec: &AccuracySpec) -> Result<(u64, u64)> {
    frame_range(r, t_m, spec, PlanMode::Gert)
}

fn frame_range(r: f64, t_m: u64, spec: &AccuracySpec, mode: PlanMode) -> Result<(u64, u64)> {
    if t_m == 0 {
        return Err(Error::domain("population bound must be at least 1"));
    }
    let kr = k(r)?;
    let f_max = (t_m as f64 / r).floor();
    let f_min = match mode {
        PlanMode::Gert => {
            let eps = epsilon_max(spec);
            (kr / (eps * eps)).ceil().max(1.0)
        }
        PlanMode::Waec => 1.0,
    };
    if f_max < 1.0 || f_min > f_max {
        return Err(Error::infeasible(format!(
            "r = {r}: f_min = {f_min} exceeds f_max = {f_max}"
        )));
    }
    Ok((f_min as u64, f_max as u64))
}

/// `p = r f / t_m`.
pub fn persistence_for(f: u64, r: f64, t_m: u64) -> Result<f64> {
    check_load(r)?;
    if f == 0 || t_m == 0 {
        return Err(Error::domain(
            "frame size and population bound must be positive",
        ));
    }
    let p = r * f as f64 / t_m as f64;
    // f <= floor(t_m / r) can still round to one ulp above 1
    if p > 1.0 + 1e-12 {
        return Err(Error::domain(format!(
            "persistence probability {p} exceeds 1 (f = {f} above t_m / r)"
        )));
    }
    Ok(p.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundsBreakdown {
    pub n: u64,
    pub z_star: f64,
    pub n_left: f64,
    pub n_right: f64,
}

/// Rounds needed so that the averaged statistic lands between
/// `g((1 - beta) t_m)` and `g((1 + beta) t_m)` with probability
/// `alpha + epsilon` under the Gaussian model.
pub fn rounds_required(
    f: u64,
    p: f64,
    t_m: u64,
    spec: &AccuracySpec,
    epsilon: f64,
) -> Result<RoundsBreakdown> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::domain(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    let target = spec.alpha() + epsilon;
    if target >= 1.0 {
        return Err(Error::infeasible(format!(
            "alpha + epsilon = {target} leaves no room for the Gaussian approximation"
        )));
    }
    let ch = ChannelParams::new(f as usize, p)?;
    let tail = (1.0 - target) / 2.0;
    let z_star = if tail >= 0.5 { 0.0 } else { inverse_q(tail)? };

    let t_m = t_m as f64;
    let beta = spec.beta();
    let mu = g(t_m, ch);
    let var = variance_z(t_m, ch);
    let below = g((1.0 - beta) * t_m, ch) - mu;
    let above = g((1.0 + beta) * t_m, ch) - mu;
    if !(below < 0.0 && above > 0.0) {
        return Err(Error::domain(
            "accuracy interval collapses: g((1 - beta) t_m) < g(t_m) < g((1 + beta) t_m) fails",
        ));
    }
    let scale = z_star * z_star * var;
    let n_left = scale / (below * below);
    let n_right = scale / (above * above);
    let n_real = n_left.max(n_right).ceil().max(1.0);
    if !n_real.is_finite() || n_real > u32::MAX as f64 {
        return Err(Error::infeasible(format!(
            "round count {n_real} out of range"
        )));
    }
    Ok(RoundsBreakdown {
        n: n_real as u64,
        z_star,
        n_left,
        n_right,
    })
}

/// Largest load factor for which `eps_max^2 (t_m / r) >= k(r)`, to 1e-9.
///
/// `r k(r)` falls from 1 (as `r -> 0`) to `ln 2` and then grows without
/// bound, so the feasible set is an interval ending at the root above
/// `ln 2`. When `eps_max^2 t_m < ln 2` the set is empty.
pub fn r_max(t_m: u64, spec: &AccuracySpec) -> Result<f64> {
    if t_m == 0 {
        return Err(Error::domain("population bound must be at least 1"));
    }
    let eps = epsilon_max(spec);
    let c = eps * eps * t_m as f64;
    let slack = |r: f64| c / r - r.exp_m1().max(1.0 / r.exp_m1());
    let mut lo = std::f64::consts::LN_2;
    if slack(lo) < 0.0 {
        return Err(Error::infeasible(format!(
            "eps_max^2 t_m = {c} is below ln 2; no load factor satisfies f_min <= f_max"
        )));
    }
    let mut hi = 2.0 * lo;
    while slack(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if slack(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest population bound for which every `r` in `(0, r_max]` is
/// feasible: `ceil(1 / eps_max^2)`.
pub fn min_planning_population(spec: &AccuracySpec) -> u64 {
    let eps = epsilon_max(spec);
    (1.0 / (eps * eps)).ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanMode {
    /// Charges the Gaussian approximation error against the budget.
    Gert,
    /// Ablation: `eps = 0` in the cutoff and no lower frame size bound.
    Waec,
}

impl PlanMode {
    pub fn label(&self) -> &'static str {
        match self {
            PlanMode::Gert => "GERT",
            PlanMode::Waec => "GERT-WAEC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub r_grid_step: f64,
    /// Inter-frame gap `l`, in slots.
    pub inter_frame_gap_slots: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            r_grid_step: 0.01,
            inter_frame_gap_slots: 3.33,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_grid_step > 0.0 && self.r_grid_step.is_finite()) {
            return Err(Error::domain("r grid step must be positive"));
        }
        if !(self.inter_frame_gap_slots >= 0.0 && self.inter_frame_gap_slots.is_finite()) {
            return Err(Error::domain("inter-frame gap must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePlan {
    pub r: f64,
    pub f: u64,
    pub p: f64,
    pub n: u64,
    pub epsilon: f64,
    pub z_star: f64,
    pub t_m: u64,
    pub gap_slots: f64,
    /// `(f + l) n`.
    pub cost: f64,
    pub mode: PlanMode,
}

impl FramePlan {
    pub fn channel(&self) -> ChannelParams {
        ChannelParams::new_unchecked(self.f as usize, self.p)
    }

    pub fn to_key_values(&self) -> String {
        use crate::fmt::sig10;
        format!(
            "mode={}\nr={}\nf={}\np={}\nn={}\nepsilon={}\nz_star={}\nt_m={}\nl={}\ncost={}\n",
            self.mode.label(),
            sig10(self.r),
            self.f,
            sig10(self.p),
            self.n,
            sig10(self.epsilon),
            sig10(self.z_star),
            self.t_m,
            sig10(self.gap_slots),
            sig10(self.cost),
        )
    }

    pub const CSV_HEADER: &'static str = "r,f,p,n,epsilon,z_star,t_m,cost";

    pub fn to_csv_row(&self) -> String {
        use crate::fmt::sig10;
        format!(
            "{},{},{},{},{},{},{},{}",
            sig10(self.r),
            self.f,
            sig10(self.p),
            self.n,
            sig10(self.epsilon),
            sig10(self.z_star),
            self.t_m,
            sig10(self.cost),
        )
    }
}

pub fn plan(t_m: u64, spec: &AccuracySpec, cfg: &PlannerConfig) -> Result<FramePlan> {
    plan_with_mode(t_m, spec, cfg, PlanMode::Gert)
}

/// Minimizes `(f + l) n` over the `r` grid and all integer frame sizes.
///
/// Both modes scan the same `r` grid `(0, r_max]`. Ties go to the smaller
/// `f`, then the smaller `r`.
pub fn plan_with_mode(
    t_m: u64,
    spec: &AccuracySpec,
    cfg: &PlannerConfig,
    mode: PlanMode,
) -> Result<FramePlan> {
    cfg.validate()?;
    let r_top = r_max(t_m, spec)?;
    let mut best: Option<FramePlan> = None;
    let mut i = 1u64;
    loop {
        let r = i as f64 * cfg.r_grid_step;
        if r > r_top * (1.0 + 1e-12) {
            break;
        }
        i += 1;
        let Ok((f_lo, f_hi)) = frame_range(r, t_m, spec, mode) else {
            continue;
        };
        search_frames(r, f_lo, f_hi, t_m, spec, cfg, mode, &mut best);
    }
    best.ok_or_else(|| Error::infeasible(format!("no feasible (r, f) pair for t_m = {t_m}")))
}

fn better(a: &FramePlan, b: &FramePlan) -> bool {
    (a.cost, a.f, a.r) < (b.cost, b.f, b.r)
}

fn evaluate(
    r: f64,
    f: u64,
    t_m: u64,
    spec: &AccuracySpec,
    cfg: &PlannerConfig,
    mode: PlanMode,
) -> Option<FramePlan> {
    let p = persistence_for(f, r, t_m).ok()?;
    let epsilon = match mode {
        PlanMode::Gert => epsilon_for(f, r).ok()?,
        PlanMode::Waec => 0.0,
    };
    let rounds = rounds_required(f, p, t_m, spec, epsilon).ok()?;
    let l = cfg.inter_frame_gap_slots;
    Some(FramePlan {
        r,
        f,
        p,
        n: rounds.n,
        epsilon,
        z_star: rounds.z_star,
        t_m,
        gap_slots: l,
        cost: (f as f64 + l) * rounds.n as f64,
        mode,
    })
}

// Along a fixed r the reply probability p/f = r/t_m is constant, so g and
// f * var do not depend on f while eps (and with it z*) shrinks as f grows:
// n(f) is non-increasing. Cost grows with f inside a run of equal n, so only
// the left edge of each run can be optimal. Runs are visited from f_hi
// leftwards and the walk stops once f * n_real + l * n, a lower bound on the
// cost of every frame further left, exceeds the best cost found.
#[allow(clippy::too_many_arguments)]
fn search_frames(
    r: f64,
    f_lo: u64,
    f_hi: u64,
    t_m: u64,
    spec: &AccuracySpec,
    cfg: &PlannerConfig,
    mode: PlanMode,
    best: &mut Option<FramePlan>,
) {
    let eval = |f: u64| evaluate(r, f, t_m, spec, cfg, mode);
    let Some(mut right) = eval(f_hi) else {
        return;
    };
    let l = cfg.inter_frame_gap_slots;
    loop {
        let n = right.n;
        let floor = lower_bound(&right, spec, l);
        if let Some(b) = best {
            if floor > b.cost {
                return;
            }
        }
        let (mut lo, mut hi) = (f_lo, right.f);
        let mut edge = right;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match eval(mid) {
                Some(c) if c.n <= n => {
                    hi = mid;
                    edge = c;
                }
                _ => lo = mid + 1,
            }
        }
        if best.as_ref().is_none_or(|b| better(&edge, b)) {
            *best = Some(edge);
        }
        if edge.f <= f_lo {
            return;
        }
        match eval(edge.f - 1) {
            Some(next) => right = next,
            None => return,
        }
    }
}

// f * max(n_left, n_right) is non-increasing in f, so for any f' <= plan.f
// with n(f') >= plan.n, (f' + l) n(f') >= f * n_real(f) + l * plan.n.
fn lower_bound(plan: &FramePlan, spec: &AccuracySpec, l: f64) -> f64 {
    match rounds_required(plan.f, plan.p, plan.t_m, spec, plan.epsilon) {
        Ok(rb) => plan.f as f64 * rb.n_left.max(rb.n_right) + l * plan.n as f64,
        Err(_) => plan.cost,
    }
}
