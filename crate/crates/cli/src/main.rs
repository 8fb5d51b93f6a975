use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gert_core::fmt::sig10;
use gert_core::{
    estimate, fm_probe, min_planning_population, plan_with_mode, records_csv, run_experiment,
    run_rounds, simulate_frame, summary_csv, AccuracySpec, ChannelParams, Error, ExperimentSpec,
    FramePlan, PlanMode, PlannerConfig, ProbeConfig, SimSeed, TrialConfig,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SATURATED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gert",
    version,
    about = "RFID tag population estimation over framed slotted Aloha"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the slot-cost minimizing frame plan for a population bound.
    Plan(PlanArgs),
    /// Simulate frames and print per-round counts as CSV.
    Simulate(SimulateArgs),
    /// Run the population probe and print the upper bound t_m.
    Probe(ProbeArgs),
    /// Monte Carlo reliability and cost experiment.
    Experiment(ExperimentArgs),
    /// One live estimation: probe, plan, simulate, invert.
    Estimate(EstimateArgs),
}

#[derive(Args, Clone)]
struct AccuracyArgs {
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
    /// Plan without charging the Gaussian approximation error.
    #[arg(long)]
    waec: bool,
    #[arg(long, default_value_t = 0.01)]
    r_step: f64,
    /// Inter-frame gap in slots.
    #[arg(long, default_value_t = 3.33)]
    gap: f64,
}

impl AccuracyArgs {
    fn spec(&self) -> Result<AccuracySpec, Error> {
        AccuracySpec::new(self.alpha, self.beta)
    }

    fn mode(&self) -> PlanMode {
        if self.waec {
            PlanMode::Waec
        } else {
            PlanMode::Gert
        }
    }

    fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            r_grid_step: self.r_step,
            inter_frame_gap_slots: self.gap,
        }
    }
}

#[derive(Args, Clone)]
struct ProbeKnobs {
    #[arg(long, default_value_t = 32)]
    probe_slots: usize,
    #[arg(long, default_value_t = 2.0)]
    safety: f64,
}

impl ProbeKnobs {
    fn config(&self) -> ProbeConfig {
        ProbeConfig {
            probe_slots: self.probe_slots,
            safety_multiplier: self.safety,
            ..ProbeConfig::default()
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Population upper bound to plan for.
    #[arg(long)]
    tm: u64,
    #[command(flatten)]
    accuracy: AccuracyArgs,
    /// Also write the plan as a one-row CSV file.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    t: u64,
    #[arg(long)]
    f: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    rounds: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    t: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[command(flatten)]
    probe: ProbeKnobs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    accuracy: AccuracyArgs,
    /// Comma-separated true population sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    t_list: Vec<u64>,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-trial records CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-population summary CSV.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Skip the probe and plan every trial for this bound.
    #[arg(long)]
    tm: Option<u64>,
    #[command(flatten)]
    probe: ProbeKnobs,
}

#[derive(Args)]
struct EstimateArgs {
    /// True population of the simulated tag field.
    #[arg(long)]
    t: u64,
    #[command(flatten)]
    accuracy: AccuracyArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    tm: Option<u64>,
    #[command(flatten)]
    probe: ProbeKnobs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Estimate(args) => cmd_estimate(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible(_) | Error::Domain(_) => EXIT_INFEASIBLE,
        Error::Saturated => EXIT_SATURATED,
        _ => EXIT_FAILURE,
    }
}

fn stdout_write(text: &str) -> Result<(), Error> {
    io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

fn cmd_plan(args: PlanArgs) -> Result<ExitCode, Error> {
    let spec = args.accuracy.spec()?;
    let plan = plan_with_mode(
        args.tm,
        &spec,
        &args.accuracy.planner(),
        args.accuracy.mode(),
    )?;
    stdout_write(&plan.to_key_values())?;
    if let Some(path) = args.csv_out {
        write_file(
            &path,
            &format!("{}\n{}\n", FramePlan::CSV_HEADER, plan.to_csv_row()),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let ch = ChannelParams::new(args.f, args.p)?;
    let seed = SimSeed::new(args.seed);
    let mut out = String::from("round,N0,Nn,z\n");
    for round in 0..args.rounds {
        let obs = simulate_frame(args.t, ch, seed, args.trial, round);
        out.push_str(&format!(
            "{round},{},{},{}\n",
            obs.n_zero,
            obs.n_nonempty,
            sig10(obs.z)
        ));
    }
    stdout_write(&out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_probe(args: ProbeArgs) -> Result<ExitCode, Error> {
    let cfg = args.probe.config();
    cfg.validate()?;
    let t_m = fm_probe(args.t, &cfg, SimSeed::new(args.seed), args.trial);
    stdout_write(&format!("{t_m}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, Error> {
    let mut trial = TrialConfig::new(
        args.accuracy.spec()?,
        args.accuracy.mode(),
        SimSeed::new(args.seed),
    );
    trial.tm_override = args.tm;
    trial.probe = args.probe.config();
    trial.planner = args.accuracy.planner();
    let spec = ExperimentSpec::new(args.t_list, args.trials, trial);
    let output = run_experiment(&spec)?;

    write_file(&args.out, &records_csv(&output.records))?;
    if let Some(path) = &args.summary_out {
        write_file(path, &summary_csv(&output.summary))?;
    }
    for row in &output.summary {
        eprintln!(
            "{} t={} reliability={} slots={}±{} trials={}",
            trial.mode.label(),
            row.t,
            sig10(row.reliability),
            sig10(row.slots_mean),
            sig10(row.slots_std),
            row.trials
        );
    }
    if output.saturated_trials() == output.records.len() {
        eprintln!("error: every trial saturated");
        return Ok(ExitCode::from(EXIT_SATURATED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(args: EstimateArgs) -> Result<ExitCode, Error> {
    let spec = args.accuracy.spec()?;
    let probe = args.probe.config();
    probe.validate()?;
    let seed = SimSeed::new(args.seed);
    let (probed, probe_slots) = match args.tm {
        Some(tm) => (tm, 0),
        None => (
            fm_probe(args.t, &probe, seed, args.trial),
            probe.probe_slots,
        ),
    };
    let t_m = probed.max(min_planning_population(&spec));
    let plan = plan_with_mode(t_m, &spec, &args.accuracy.planner(), args.accuracy.mode())?;
    let frames = run_rounds(args.t, &plan, seed, args.trial);
    let result = estimate(&frames, plan.channel())?;

    let mut out = plan.to_key_values();
    out.push_str(&format!("probe_tm={probed}\nprobe_slots={probe_slots}\n"));
    out.push_str(&format!(
        "slots={}\nz_bar={}\nrounds_used={}\nsaturated={}\n",
        sig10(probe_slots as f64 + plan.cost),
        sig10(result.z_bar),
        result.rounds_used,
        result.saturated
    ));
    match (result.t_hat, result.t_hat_rounded()) {
        (Some(raw), Some(rounded)) => {
            out.push_str(&format!("t_hat={}\nt_hat_rounded={rounded}\n", sig10(raw)));
        }
        _ => out.push_str("t_hat=\n"),
    }
    stdout_write(&out)?;
    if result.saturated {
        return Ok(ExitCode::from(EXIT_SATURATED));
    }
    Ok(ExitCode::SUCCESS)
}
