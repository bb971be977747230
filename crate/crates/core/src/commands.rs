//! The work behind each CLI subcommand, usable without the binary.
//!
//! Every file written embeds the fingerprint of the resolved configuration.
//! Output directories are created as needed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{EnvironmentKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    replay_traces, write_json_sidecar, write_series_csv, write_table_csv, CellSummary, SuiteReport, SuiteSettings,
    SyntheticSuite, TranscodeSuite,
};
use crate::policies::PolicyKind;
use crate::problems::{generate_synthetic, ProblemDocument, TranscodeDocument, TranscodeProblem};
use crate::rng::mix_seed;
use crate::tuning::{constrained_search, write_frontier_csv, ConfigEvaluation, SearchOutcome, SearchResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SERIES_FILE: &str = "series.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACES_DIR: &str = "traces";
pub const FRONTIER_FILE: &str = "frontier.csv";
pub const BEST_FILE: &str = "best.json";
pub const PROBLEM_FILE: &str = "problem.json";

/// The resolved configuration a directory was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fingerprint: String,
    pub command: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_manifest(dir: &Path, command: &str, config: &ExperimentConfig, fingerprint: &str) -> Result<()> {
    let manifest = Manifest {
        fingerprint: fingerprint.to_string(),
        command: command.to_string(),
        config: config.clone(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    settings: &'a SuiteSettings,
    cells: Vec<CellSummary>,
}

fn write_report(dir: &Path, report: &SuiteReport) -> Result<()> {
    let fp = &report.fingerprint;
    write_series_csv(&dir.join(SERIES_FILE), &report.series(), fp)?;
    write_table_csv(&dir.join(TABLE_FILE), &report.summaries(), fp)?;
    write_json_sidecar(
        &dir.join(SUMMARY_FILE),
        fp,
        &Summary {
            settings: &report.settings,
            cells: report.summaries(),
        },
    )
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub fingerprint: String,
    pub report: SuiteReport,
}

/// Runs every (policy × spec `α`) cell and writes `series.csv`,
/// `table.csv`, `summary.json` and `manifest.json` under the output
/// directory, plus `traces/` when requested.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutput> {
    let config = config.clone().resolve()?;
    let fp = config.fingerprint()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let trace_dir = config.save_traces.then(|| dir.join(TRACES_DIR));
    let settings = config.suite_settings();
    let report = match config.environment {
        EnvironmentKind::Synthetic => SyntheticSuite {
            settings,
            problem: config.synthetic.clone(),
            models: config.models.clone(),
            cells: config.cells(),
        }
        .run(&fp, trace_dir.as_deref())?,
        EnvironmentKind::Transcode => TranscodeSuite {
            settings,
            problem: config.transcode.clone(),
            shape: config.shape(0.0)?,
            lambda: config.models.lambda,
            refit: config.refit,
            cells: config.cells(),
        }
        .run(&fp, trace_dir.as_deref())?,
    };
    write_report(&dir, &report)?;
    write_manifest(&dir, "run", &config, &fp)?;
    Ok(RunOutput {
        dir,
        fingerprint: fp,
        report,
    })
}

/// Metric settings that may differ from the original run on replay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayOptions {
    pub window: Option<usize>,
    pub last_k: Option<usize>,
    pub tail_fraction: Option<f64>,
    /// Defaults to `<run dir>/replay`.
    pub output_dir: Option<PathBuf>,
}

/// Re-derives every metric from the traces of a finished run. With no
/// metric overrides the outputs equal the original run's byte for byte.
pub fn cmd_replay(run_dir: &Path, options: &ReplayOptions) -> Result<RunOutput> {
    let manifest = Manifest::load(run_dir)?;
    let mut config = manifest.config;
    config.window = options.window.unwrap_or(config.window);
    config.last_k = options.last_k.unwrap_or(config.last_k);
    config.tail_fraction = options.tail_fraction.unwrap_or(config.tail_fraction);
    let dir = options.output_dir.clone().unwrap_or_else(|| run_dir.join("replay"));
    config.output_dir = dir.clone();
    let config = config.resolve()?;
    let fp = config.fingerprint()?;
    let traces = run_dir.join(TRACES_DIR);
    if !traces.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} holds no traces; rerun with traces saved",
            run_dir.display()
        )));
    }
    let report = replay_traces(
        &traces,
        Some(config.window),
        Some(config.last_k),
        Some(config.tail_fraction),
        &fp,
    )?;
    fs::create_dir_all(&dir)?;
    write_report(&dir, &report)?;
    write_manifest(&dir, "replay", &config, &fp)?;
    Ok(RunOutput {
        dir,
        fingerprint: fp,
        report,
    })
}

/// Contents of `best.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    /// `"best"`, or `"all-infeasible"` when no shape met the reliability
    /// constraint (the entry closest to feasibility is reported then).
    pub status: String,
    pub selected: ConfigEvaluation,
    pub baseline: ConfigEvaluation,
    pub evaluated: usize,
}

#[derive(Debug, Clone)]
pub struct TuneOutput {
    pub dir: PathBuf,
    pub fingerprint: String,
    pub outcome: SearchOutcome,
}

/// Searches reward shapes on the simulator and writes `frontier.csv` and
/// `best.json`.
pub fn cmd_tune(config: &ExperimentConfig) -> Result<TuneOutput> {
    let config = config.clone().resolve()?;
    let tune = &config.tune;
    if !matches!(tune.policy, PolicyKind::TsAsc | PolicyKind::VanillaTs) {
        return Err(Error::Config(format!(
            "tune.policy: {} cannot be tuned on the simulator",
            tune.policy.label()
        )));
    }
    let fp = config.fingerprint()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let problem = TranscodeProblem::generate(tune.problem_seed, config.transcode.clone())?;
    let mut plan = tune.plan.clone();
    plan.workers = config.workers;
    let budget = tune.budget.unwrap_or_else(|| tune.space.size());
    let outcome = constrained_search(&problem, &tune.space, budget, tune.policy, &plan)?;
    write_frontier_csv(&dir.join(FRONTIER_FILE), &outcome.frontier, &fp)?;
    let best = BestConfig {
        status: match outcome.result {
            SearchResult::Best(_) => "best",
            SearchResult::AllInfeasible(_) => "all-infeasible",
        }
        .to_string(),
        selected: outcome.selected().evaluation.clone(),
        baseline: outcome.baseline.clone(),
        evaluated: outcome.frontier.len(),
    };
    write_json_sidecar(&dir.join(BEST_FILE), &fp, &best)?;
    write_manifest(&dir, "tune", &config, &fp)?;
    Ok(TuneOutput {
        dir,
        fingerprint: fp,
        outcome,
    })
}

/// Contents of `problem.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "environment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemFile {
    Synthetic { fingerprint: String, problem: ProblemDocument },
    Transcode { fingerprint: String, problem: TranscodeDocument },
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub path: PathBuf,
    pub fingerprint: String,
    pub file: ProblemFile,
    /// Named invariant checks and whether each held.
    pub report: Vec<(&'static str, bool)>,
}

impl GenOutput {
    pub fn report_lines(&self) -> Vec<String> {
        self.report
            .iter()
            .map(|(name, ok)| format!("{} {name}", if *ok { "PASS" } else { "FAIL" }))
            .collect()
    }
}

/// Draws the problem of realization `index` (the one `run` would use) and
/// writes it to `problem.json`. Synthetic problems are drawn at the largest
/// spec `α` of the sweep, as in `run`.
pub fn cmd_gen(config: &ExperimentConfig, index: u64) -> Result<GenOutput> {
    let config = config.clone().resolve()?;
    let fp = config.fingerprint()?;
    let key = mix_seed(config.seed, index);
    let (file, report) = match config.environment {
        EnvironmentKind::Synthetic => {
            let alpha = config.spec_alphas.iter().copied().fold(0.0, f64::max);
            let problem = generate_synthetic(key, alpha, &config.synthetic)?;
            let report = problem.invariant_report();
            let file = ProblemFile::Synthetic {
                fingerprint: fp.clone(),
                problem: ProblemDocument::from(&problem),
            };
            (file, report)
        }
        EnvironmentKind::Transcode => {
            let problem = TranscodeProblem::generate(key, config.transcode.clone())?;
            let report = problem.invariant_report(10_000);
            let file = ProblemFile::Transcode {
                fingerprint: fp.clone(),
                problem: TranscodeDocument::from(&problem),
            };
            (file, report)
        }
    };
    fs::create_dir_all(&config.output_dir)?;
    let path = config.output_dir.join(PROBLEM_FILE);
    fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(GenOutput {
        path,
        fingerprint: fp,
        file,
        report,
    })
}
