//! Every synthetic policy across the α sweep, averaged over realizations
//! that share problems and noise.
//!
//! cargo run --release --example compare_policies -- [realizations] [horizon] [workers]

use safebandit::evaluation::{SuiteSettings, SyntheticSuite};
use safebandit::policies::PolicyKind;

fn main() -> safebandit::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().expect("integer")).collect();
    let realizations = args.first().copied().unwrap_or(20);
    let horizon = args.get(1).copied().unwrap_or(1000);
    let workers = args.get(2).copied().unwrap_or(1);

    let settings = SuiteSettings {
        horizon,
        realizations,
        master_seed: 1,
        window: 100.min(horizon),
        last_k: 100.min(horizon),
        tail_fraction: 0.1,
        workers,
    };
    let kinds = [
        PolicyKind::TsAsc,
        PolicyKind::Clucb2AscC,
        PolicyKind::Clucb2AscI,
        PolicyKind::Baseline,
    ];
    let suite = SyntheticSuite::grid(settings, &kinds, &[1e-1, 1e-2, 1e-3, 1e-4]);
    let report = suite.run("example", None)?;

    println!("{:<14}{:>8}{:>12}{:>12}{:>12}", "policy", "alpha", "c(a)/c(b)", "violation", "regret");
    for s in report.summaries() {
        println!(
            "{:<14}{:>8}{:>12.3}{:>12.3}{:>12.3}",
            s.policy, s.spec_alpha, s.normalized_constraint.mean, s.violation_tail.mean, s.regret_tail.mean
        );
    }
    Ok(())
}
