//! Draw a synthetic problem, check its invariants and inspect the baseline.
//!
//! cargo run --release --example gen_problem -- [seed] [alpha]

use safebandit::problems::{generate_synthetic, LinearConstraintProblem, SyntheticConfig};

fn main() -> safebandit::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse()).expect("seed");
    let alpha: f64 = args.next().map_or(Ok(0.1), |s| s.parse()).expect("alpha");

    let problem = generate_synthetic(seed, alpha, &SyntheticConfig::default())?;
    for (check, ok) in problem.invariant_report() {
        println!("{} {check}", if ok { "PASS" } else { "FAIL" });
    }

    let b = problem.baseline();
    let feasible = problem.oracle_feasible_set(alpha);
    println!(
        "{} arms in R^{}; baseline arm {b} has reward {:.3}, constraint {:.3}",
        problem.arms(),
        problem.dim(),
        problem.reward_means()[b],
        problem.constraint_means()[b]
    );
    println!(
        "{} feasible arms; best feasible reward {:.3} vs best overall {:.3}",
        feasible.len(),
        problem.oracle_optimal_feasible_reward(alpha),
        problem.oracle_optimal_reward()
    );

    // The JSON form reproduces every float exactly.
    let json = problem.to_json()?;
    let back = LinearConstraintProblem::from_json(&json)?;
    assert_eq!(back.reward_means(), problem.reward_means());
    println!("JSON: {} bytes, round trip exact", json.len());
    Ok(())
}
