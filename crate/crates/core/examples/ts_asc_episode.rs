//! One TS-ASC episode on a synthetic problem, next to the fixed baseline.
//!
//! cargo run --release --example ts_asc_episode -- [alpha] [horizon]

use safebandit::evaluation::{run_episode, violation_moving_average, SyntheticEnv};
use safebandit::policies::{build_linear_policy, LinearModelSettings, PolicyKind};
use safebandit::problems::{generate_synthetic, SyntheticConfig};

fn main() -> safebandit::Result<()> {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().map_or(Ok(0.1), |s| s.parse()).expect("alpha");
    let horizon: usize = args.next().map_or(Ok(2000), |s| s.parse()).expect("horizon");

    let problem = generate_synthetic(7, alpha, &SyntheticConfig::default())?;
    let env = SyntheticEnv::new(&problem);
    let settings = LinearModelSettings::default();

    for kind in [PolicyKind::TsAsc, PolicyKind::Baseline] {
        let mut policy = build_linear_policy(kind, alpha, problem.dim(), &settings)?;
        let trace = run_episode(&env, policy.as_mut(), horizon, 42)?;
        let window = 100.min(horizon);
        let ma = violation_moving_average(&trace.violations(), window)?;
        println!("{}", kind.label());
        for q in [1, 2, 4, 10] {
            let end = horizon * q / 10;
            let slice = &trace.records[..end];
            let regret: f64 = slice.iter().map(|r| r.regret).sum();
            let last = slice.last().unwrap();
            let vio = if end >= window { ma[end - window] } else { f64::NAN };
            println!(
                "  t={end:>5}  cumulative regret {regret:>8.2}  violation MA {vio:.3}  c(a)/c(b) {:.3}",
                last.normalized_constraint()
            );
        }
    }
    Ok(())
}
