//! Keep per-step traces of a small run, then re-derive its metrics with a
//! different moving-average window without rerunning any policy.

use safebandit::commands::{cmd_replay, cmd_run, ReplayOptions};
use safebandit::config::ExperimentConfig;

fn main() -> safebandit::Result<()> {
    let dir = tempfile_dir();
    let config = ExperimentConfig {
        horizon: Some(500),
        realizations: Some(10),
        output_dir: dir.clone(),
        save_traces: true,
        ..ExperimentConfig::default()
    };
    let run = cmd_run(&config)?;
    println!("run {} -> {}", run.fingerprint, run.dir.display());

    let same = cmd_replay(&dir, &ReplayOptions::default())?;
    let identical = std::fs::read(run.dir.join("series.csv"))? == std::fs::read(same.dir.join("series.csv"))?;
    println!("replay with the original settings reproduces series.csv: {identical}");

    let wide = cmd_replay(
        &dir,
        &ReplayOptions {
            window: Some(250),
            output_dir: Some(dir.join("window250")),
            ..ReplayOptions::default()
        },
    )?;
    for (a, b) in run.report.summaries().iter().zip(wide.report.summaries()) {
        println!(
            "{:<14} α={:<7} violation (window 100) {:.3}  (window 250) {:.3}",
            a.policy, a.spec_alpha, a.violation_tail.mean, b.violation_tail.mean
        );
    }
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("safebandit-replay-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
