use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use uav_aircomp::baselines::{run_baseline, BaselineKind};
use uav_aircomp::env::write_trace;
use uav_aircomp::harness::{evaluate, sweep, train, write_sweep, write_traces, Checkpoint, RunConfig};
use uav_aircomp::scenario::Scenario;
use uav_aircomp::solver::SlotInstance;

#[derive(Parser)]
#[command(name = "uav-aircomp", version, about = "UAV trajectory and AirComp power control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    TableOne,
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes config, scenario, metrics and checkpoint into DIR.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy rollouts of a checkpoint; prints the report as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Directory for per-episode JSONL traces.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// One episode of a non-learning scheme; prints its summary as JSON.
    Baseline {
        #[arg(long)]
        kind: BaselineKind,
        #[arg(long)]
        config: PathBuf,
        /// JSONL trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sum-rate per MSE threshold and method, as CSV.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
        /// Also train and evaluate an agent per threshold, with runs under DIR.
        #[arg(long, value_name = "DIR")]
        with_sac: Option<PathBuf>,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one single-user slot read from JSON; prints the solution.
    SolveSlot {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Print a built-in configuration.
    Config {
        #[arg(long, value_enum, default_value = "desk")]
        profile: Profile,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = train(&cfg, &out)?;
            let last = report.metrics.last().map(|r| r.episode_return).unwrap_or(0.0);
            eprintln!(
                "trained {} episodes, last return {last:.4}, run in {}",
                report.metrics.len(),
                out.display()
            );
        }
        Command::Eval {
            checkpoint,
            scenario,
            episodes,
            traces,
        } => {
            let ck = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let sc = Scenario::from_json(&fs::read_to_string(&scenario)?)
                .with_context(|| format!("loading {}", scenario.display()))?;
            let (report, tr) = evaluate(&ck, sc, episodes)?;
            if let Some(dir) = traces {
                write_traces(&dir, "eval", &tr)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Baseline { kind, config, trace } => {
            let cfg = RunConfig::load(&config)?;
            let (summary, tr) = run_baseline(kind, &cfg.env()?)?;
            if let Some(path) = trace {
                write_trace(BufWriter::new(File::create(path)?), &tr)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Sweep {
            gamma,
            config,
            with_sac,
            out,
        } => {
            if gamma.len() < 2 {
                bail!("--gamma needs at least two values");
            }
            let cfg = RunConfig::load(&config)?;
            let rows = sweep(&cfg, &gamma, with_sac.as_deref())?;
            match out {
                Some(p) => write_sweep(File::create(p)?, &rows)?,
                None => write_sweep(io::stdout().lock(), &rows)?,
            }
        }
        Command::SolveSlot { instance } => {
            let inst: SlotInstance = serde_json::from_str(&fs::read_to_string(&instance)?)
                .with_context(|| format!("parsing {}", instance.display()))?;
            println!("{}", serde_json::to_string_pretty(&inst.solve()?)?);
        }
        Command::Config { profile } => {
            let cfg = match profile {
                Profile::TableOne => RunConfig::table_one(),
                Profile::Desk => RunConfig::desk(),
            };
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}
