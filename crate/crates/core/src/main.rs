use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use safebandit::commands::{cmd_gen, cmd_replay, cmd_run, cmd_tune, ReplayOptions};
use safebandit::config::{ExperimentConfig, Overrides, Preset, SEED_ENV};
use safebandit::Error;

/// Safe contextual-bandit experiments.
#[derive(Parser)]
#[command(name = "safebandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy × α cell and write aggregate CSVs and a summary.
    Run(Common),
    /// Search reward shapes on the upload simulator.
    Tune(Common),
    /// Generate one problem and check its invariants.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Realization whose problem is generated.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Re-derive metrics from the traces of an earlier run.
    Replay {
        /// Directory of the earlier run.
        run_dir: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        last_k: Option<usize>,
        #[arg(long)]
        tail_fraction: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; every field is optional.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Parallel realizations; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep per-step traces for `replay`.
    #[arg(long)]
    save_traces: bool,
}

impl Common {
    fn load(&self) -> safebandit::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        config.apply(
            env_seed.as_deref(),
            &Overrides {
                seed: self.seed,
                preset: self.preset,
                horizon: self.horizon,
                realizations: self.realizations,
                output_dir: self.output.clone(),
                workers: self.workers,
                save_traces: self.save_traces,
            },
        )?;
        config.resolve()
    }
}

fn execute(command: Command) -> safebandit::Result<()> {
    match command {
        Command::Run(common) => {
            let out = cmd_run(&common.load()?)?;
            println!("wrote {} cells to {} (config {})", out.report.cells.len(), out.dir.display(), out.fingerprint);
        }
        Command::Tune(common) => {
            let out = cmd_tune(&common.load()?)?;
            let s = &out.outcome.selected().evaluation;
            let status = match out.outcome.result {
                safebandit::tuning::SearchResult::Best(_) => "best",
                safebandit::tuning::SearchResult::AllInfeasible(_) => "all-infeasible",
            };
            println!(
                "{status}: alpha={} offsets={:?} quality={:.4} reliability={:.4} ({} shapes, {})",
                s.shape.alpha,
                &s.shape.offsets[1..],
                s.quality_preserved_1080p.mean,
                s.reliability.mean,
                out.outcome.frontier.len(),
                out.dir.display()
            );
        }
        Command::Gen { common, index } => {
            let out = cmd_gen(&common.load()?, index)?;
            for line in out.report_lines() {
                println!("{line}");
            }
            println!("wrote {}", out.path.display());
            if out.report.iter().any(|(_, ok)| !ok) {
                return Err(Error::Internal("generated problem fails an invariant".into()));
            }
        }
        Command::Replay {
            run_dir,
            window,
            last_k,
            tail_fraction,
            output,
        } => {
            let out = cmd_replay(
                &run_dir,
                &ReplayOptions {
                    window,
                    last_k,
                    tail_fraction,
                    output_dir: output,
                },
            )?;
            println!("replayed {} cells into {}", out.report.cells.len(), out.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
