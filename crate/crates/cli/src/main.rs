use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use credit_cli::config::{ExperimentConfig, Overrides};
use credit_cli::report::RunReport;
use credit_cli::{benchmark, explain, fairness, prep, reject, CliError};

#[derive(Debug, Parser)]
#[command(name = "credit", version, about = "Credit scoring benchmarks, fairness and explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset, split it and cache the preprocessing plans.
    Prep(Common),
    /// Tune and evaluate every model family across folds.
    Benchmark(Common),
    /// Compare unaware and aware baselines with the fairness mitigations.
    Fairness(Common),
    /// Simulate rejection and evaluate reject-inference strategies.
    Reject(Common),
    /// Global and local explanations of one model.
    Explain(Common),
    /// Importance and curve tables for plotting.
    PlotData(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config.
    config: Option<PathBuf>,
    /// Dataset profile name, used with defaults when no config is given.
    #[arg(long, conflicts_with = "config")]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Include the sensitive attribute as a feature.
    #[arg(long)]
    aware: bool,
    /// Tuning trials per model.
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => ExperimentConfig::for_dataset(name),
            (None, None) => return Err(CliError::Config("give a config file or --dataset".into())),
        };
        cfg.apply(&Overrides {
            data_dir: self.data_dir.clone(),
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            aware: self.aware,
            trials: self.trials,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summarize(r: &RunReport) {
    println!("{} on {} ({:.1}s)", r.command, r.dataset, r.wall_clock_secs);
    for a in &r.aggregates {
        println!("  {:<28} {:<8} {:<14} {:.4} ± {:.4}", a.model, a.variant, a.metric, a.mean, a.std);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prep(c) => {
            let cfg = c.load()?;
            let p = prep::prepare(&cfg)?;
            let state = if p.cache_hit { "cache hit" } else { "cache written" };
            println!(
                "{}: {} rows, {} folds; {state}: {}",
                p.profile.name,
                p.table.n_rows(),
                p.folds.len(),
                p.cache_path.display()
            );
        }
        Command::Benchmark(c) => summarize(&benchmark::run(&c.load()?)?),
        Command::Fairness(c) => summarize(&fairness::run(&c.load()?)?),
        Command::Reject(c) => summarize(&reject::run(&c.load()?)?),
        Command::Explain(c) => summarize(&explain::run(&c.load()?)?),
        Command::PlotData(c) => summarize(&explain::plot_data(&c.load()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
