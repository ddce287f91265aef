use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use c2mab::config::{ExperimentConfig, PRESETS};
use c2mab::policy::PolicyKind;
use c2mab::runner::{replay_to_csv, run_experiment};
use c2mab::Error;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_SIZE_GUARD: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "c2mab",
    version,
    about = "Budget-constrained combinatorial bandit simulator for multi-LLM selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run(RunArgs),
    /// Inspect the built-in instance presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List preset names.
    List,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Policy to run; repeatable. Replaces the config's policies.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Base seed; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the local/cloud message log of every run.
    #[arg(long)]
    log_messages: bool,
    /// Rebuild a run's CSV from its message log instead of simulating.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Replication index the replayed log belongs to.
    #[arg(long, default_value_t = 0, requires = "replay")]
    replication: u64,
    /// Override the horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// Override the number of replications.
    #[arg(long)]
    replications: Option<u64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SizeGuard { .. }) => EXIT_SIZE_GUARD,
        Some(Error::Io(_)) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if !args.policies.is_empty() {
        cfg.policies = args
            .policies
            .iter()
            .map(|p| p.parse::<PolicyKind>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    cfg.log_messages |= args.log_messages;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = load(&args)?;
    if let Some(log) = &args.replay {
        let kind = &cfg.policies[0];
        let csv = replay_to_csv(&cfg, kind, args.replication, log)?;
        std::fs::create_dir_all(&cfg.output_dir)
            .map_err(Error::Io)
            .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
        let path = cfg
            .output_dir
            .join(format!("{}_rep{}.replay.csv", kind.file_stem(), args.replication));
        std::fs::write(&path, csv)
            .map_err(Error::Io)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("replayed {} -> {}", log.display(), path.display());
        return Ok(());
    }

    let report = run_experiment(&cfg)?;
    println!("instance: {}", cfg.instance.descriptor());
    println!(
        "{:<16} {:>12} {:>14} {:>12} {:>12} {:>10}",
        "policy", "mean_reward", "regret_budget", "violation", "ratio", "secs"
    );
    for kind in &cfg.policies {
        let name = kind.name();
        let runs: Vec<_> = report.summaries.iter().filter(|s| s.policy == name).collect();
        let n = runs.len() as f64;
        let mean = |f: &dyn Fn(&c2mab::metrics::RunSummary) -> f64| runs.iter().map(|s| f(s)).sum::<f64>() / n;
        let mut ratios: Vec<f64> = runs.iter().map(|s| s.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        println!(
            "{:<16} {:>12.4} {:>14.2} {:>12.5} {:>12.3} {:>10.3}",
            name,
            mean(&|s| s.mean_reward),
            mean(&|s| s.regret_budgeted),
            mean(&|s| s.violation_worst),
            ratios[ratios.len() / 2],
            runs.iter().map(|s| s.wall_clock_secs).sum::<f64>(),
        );
    }
    println!("wrote {} files to {}", report.files.len(), cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Presets {
            action: PresetsAction::List,
        } => {
            for (name, description) in PRESETS {
                println!("{name:<18} {description}");
            }
            Ok(())
        }
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
