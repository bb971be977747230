//! The normalized-constraint table through the CLI layer: TS-ASC only, desk
//! preset by default, outputs written to a run directory.
//!
//! cargo run --release --example constraint_table -- [desk|paper] [out_dir]

use safebandit::commands::cmd_run;
use safebandit::config::{ExperimentConfig, PolicyConfig, Preset};
use safebandit::evaluation::read_table_csv;
use safebandit::policies::PolicyKind;

fn main() -> safebandit::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = match args.next().as_deref() {
        Some("paper") => Preset::Paper,
        _ => Preset::Desk,
    };
    let out = args.next().unwrap_or_else(|| "runs/constraint_table".into());

    let config = ExperimentConfig {
        preset,
        policies: vec![PolicyConfig::of(PolicyKind::TsAsc)],
        output_dir: out.into(),
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..ExperimentConfig::default()
    };
    let run = cmd_run(&config)?;
    let (fingerprint, rows) = read_table_csv(&run.dir.join("table.csv"))?;
    println!("config {fingerprint}");
    println!("{:>8}  {:>22}", "alpha", "c(a)/c(b), last 100");
    for r in rows {
        println!(
            "{:>8}  {:>12.4} ± {:.4}",
            r.spec_alpha,
            r.normalized_constraint_mean,
            r.normalized_constraint_sem.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
