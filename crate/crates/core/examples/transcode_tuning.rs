//! Reward shaping on the upload simulator: search (α, Ω) for the shape that
//! keeps the most 1080p uploads without losing reliability.
//!
//! cargo run --release --example transcode_tuning -- [budget]

use safebandit::policies::PolicyKind;
use safebandit::problems::{TranscodeConfig, TranscodeProblem};
use safebandit::tuning::{constrained_search, SearchResult, SearchSpace, TuningPlan};

fn main() -> safebandit::Result<()> {
    let budget: usize = std::env::args().nth(1).map_or(Ok(8), |s| s.parse()).expect("budget");
    let problem = TranscodeProblem::generate(1, TranscodeConfig::default())?;
    let plan = TuningPlan {
        replications: 4,
        ..TuningPlan::default()
    };
    let out = constrained_search(&problem, &SearchSpace::default(), budget, PolicyKind::TsAsc, &plan)?;

    let b = &out.baseline;
    println!(
        "baseline: quality {:.3}, reliability {:.4}",
        b.quality_preserved_1080p.mean, b.reliability.mean
    );
    for e in &out.frontier {
        let ev = &e.evaluation;
        println!(
            "α={:.3} Ω=({:.3}, {:.3}, {:.3})  quality {:.3}  reliability {:.4}{}",
            ev.shape.alpha,
            ev.shape.offsets[1],
            ev.shape.offsets[2],
            ev.shape.offsets[3],
            ev.quality_preserved_1080p.mean,
            ev.reliability.mean,
            if e.feasible { "" } else { "  infeasible" }
        );
    }
    let pick = &out.selected().evaluation.shape;
    match out.result {
        SearchResult::Best(_) => println!("selected α={} Ω={:?}", pick.alpha, &pick.offsets[1..]),
        SearchResult::AllInfeasible(_) => println!("all-infeasible; closest α={} Ω={:?}", pick.alpha, &pick.offsets[1..]),
    }
    Ok(())
}
