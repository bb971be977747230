//! Outer-loop search over reward shapes on the transcoding simulator.
//!
//! A shape `(α, Ω)` is scored by training a fresh policy per replication and
//! measuring, over the final steps of each run, how many 1080p sources stay
//! at 1080p and how reliable uploads are. The search keeps shapes whose
//! reliability is no worse than the baseline's up to one pooled standard
//! error and returns the one preserving the most quality.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{run_episode, MeanSem, TranscodeEnv};
use crate::policies::{build_success_policy, PolicyKind, RefitSchedule};
use crate::problems::{Quality, RewardShape, TranscodeProblem, ALPHA_BOUND, OFFSET_BOUNDS};
use crate::rng::mix_seed;

/// How a single shape is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningPlan {
    pub horizon: usize,
    /// Final steps of each run the measurements are taken over.
    pub eval_window: usize,
    pub replications: usize,
    pub seed: u64,
    pub lambda: f64,
    pub refit: RefitSchedule,
    pub workers: usize,
}

impl Default for TuningPlan {
    fn default() -> Self {
        Self {
            horizon: 2000,
            eval_window: 1000,
            replications: 16,
            seed: 7,
            lambda: 1.0,
            refit: RefitSchedule::default(),
            workers: 1,
        }
    }
}

impl TuningPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config("tuning needs at least 2 replications".into()));
        }
        if self.eval_window == 0 || self.eval_window > self.horizon {
            return Err(Error::Config(format!(
                "evaluation window {} must lie in 1..={}",
                self.eval_window, self.horizon
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// Keys shared by every evaluation, so shapes and the baseline are
    /// compared on identical context sequences.
    pub fn replication_keys(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|r| mix_seed(self.seed, r)).collect()
    }
}

/// Measured outcome of one policy under one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEvaluation {
    pub shape: RewardShape,
    pub policy: PolicyKind,
    /// Fraction of 1080p sources uploaded at 1080p.
    pub quality_preserved_1080p: MeanSem,
    /// Expected success rate of the chosen uploads.
    pub reliability: MeanSem,
    pub replications: usize,
    pub seeds: Vec<u64>,
}

impl ConfigEvaluation {
    /// `√(sem_a² + sem_b²)`.
    pub fn pooled_reliability_sem(&self, other: &ConfigEvaluation) -> f64 {
        let a = self.reliability.sem.unwrap_or(0.0);
        let b = other.reliability.sem.unwrap_or(0.0);
        (a * a + b * b).sqrt()
    }
}

/// Runs `kind` under `shape` for every replication of `plan`.
pub fn evaluate_policy(
    problem: &TranscodeProblem,
    kind: PolicyKind,
    shape: &RewardShape,
    plan: &TuningPlan,
) -> Result<ConfigEvaluation> {
    plan.validate()?;
    shape.validate()?;
    let env = TranscodeEnv::new(problem, *shape);
    let seeds = plan.replication_keys();
    let mut quality = Vec::with_capacity(seeds.len());
    let mut reliability = Vec::with_capacity(seeds.len());
    for &key in &seeds {
        let mut policy = build_success_policy(
            kind,
            shape.alpha,
            problem.feature_dim(),
            plan.lambda,
            shape.payoffs(),
            plan.refit,
        )?;
        let trace = run_episode(&env, policy.as_mut(), plan.horizon, key)?;
        let window = &trace.records[plan.horizon - plan.eval_window..];
        let top: Vec<bool> = window
            .iter()
            .filter(|r| r.source == Some(Quality::P1080))
            .map(|r| r.action == Quality::P1080.index())
            .collect();
        if top.is_empty() {
            return Err(Error::Config(
                "evaluation window saw no 1080p source; lengthen it".into(),
            ));
        }
        quality.push(top.iter().filter(|&&k| k).count() as f64 / top.len() as f64);
        reliability.push(window.iter().map(|r| r.expected_constraint).sum::<f64>() / window.len() as f64);
    }
    Ok(ConfigEvaluation {
        shape: *shape,
        policy: kind,
        quality_preserved_1080p: MeanSem::from_samples(&quality),
        reliability: MeanSem::from_samples(&reliability),
        replications: seeds.len(),
        seeds,
    })
}

/// TS-ASC under `shape`.
pub fn evaluate_config(problem: &TranscodeProblem, shape: &RewardShape, plan: &TuningPlan) -> Result<ConfigEvaluation> {
    evaluate_policy(problem, PolicyKind::TsAsc, shape, plan)
}

/// The frozen baseline, which ignores the shape.
pub fn evaluate_baseline(problem: &TranscodeProblem, plan: &TuningPlan) -> Result<ConfigEvaluation> {
    evaluate_policy(problem, PolicyKind::Baseline, &RewardShape::default(), plan)
}

/// Candidate shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchSpace {
    /// Cartesian product, enumerated with `α` slowest and `ω_1080p` fastest.
    Grid {
        alpha: Vec<f64>,
        omega_480: Vec<f64>,
        omega_720: Vec<f64>,
        omega_1080: Vec<f64>,
    },
    /// Independent uniform draws within the shape bounds.
    Random { samples: usize, seed: u64 },
}

impl Default for SearchSpace {
    /// A 4 × 3 × 3 × 3 grid spanning the shape bounds.
    fn default() -> Self {
        let thirds = |hi: f64| vec![hi / 3.0, 2.0 * hi / 3.0, hi];
        SearchSpace::Grid {
            alpha: vec![0.0, ALPHA_BOUND / 3.0, 2.0 * ALPHA_BOUND / 3.0, ALPHA_BOUND],
            omega_480: thirds(OFFSET_BOUNDS[0]),
            omega_720: thirds(OFFSET_BOUNDS[1]),
            omega_1080: thirds(OFFSET_BOUNDS[2]),
        }
    }
}

impl SearchSpace {
    pub fn size(&self) -> usize {
        match self {
            SearchSpace::Grid {
                alpha,
                omega_480,
                omega_720,
                omega_1080,
            } => alpha.len() * omega_480.len() * omega_720.len() * omega_1080.len(),
            SearchSpace::Random { samples, .. } => *samples,
        }
    }

    /// Every shape of the space, validated against the bounds.
    pub fn shapes(&self) -> Result<Vec<RewardShape>> {
        match self {
            SearchSpace::Grid {
                alpha,
                omega_480,
                omega_720,
                omega_1080,
            } => {
                let mut out = Vec::with_capacity(self.size());
                for &a in alpha {
                    for &w1 in omega_480 {
                        for &w2 in omega_720 {
                            for &w3 in omega_1080 {
                                out.push(RewardShape::new(a, w1, w2, w3)?);
                            }
                        }
                    }
                }
                Ok(out)
            }
            SearchSpace::Random { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                // Offsets are drawn from (0, hi] by reflecting [0, hi).
                let mut offset = |hi: f64| hi - rng.random_range(0.0..hi);
                (0..*samples)
                    .map(|_| {
                        let w1 = offset(OFFSET_BOUNDS[0]);
                        let w2 = offset(OFFSET_BOUNDS[1]);
                        let w3 = offset(OFFSET_BOUNDS[2]);
                        let a = ALPHA_BOUND - offset(ALPHA_BOUND);
                        RewardShape::new(a, w1, w2, w3)
                    })
                    .collect()
            }
        }
    }

    /// `budget` shapes spread evenly over the enumeration order.
    pub fn select(&self, budget: usize) -> Result<Vec<RewardShape>> {
        if budget == 0 {
            return Err(Error::Config("search budget must be at least 1".into()));
        }
        let all = self.shapes()?;
        if all.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        if budget >= all.len() {
            return Ok(all);
        }
        Ok((0..budget).map(|i| all[i * all.len() / budget]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub evaluation: ConfigEvaluation,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "index")]
pub enum SearchResult {
    /// Index into the frontier of the selected shape.
    Best(usize),
    /// No shape was feasible; index of the one closest to feasibility.
    AllInfeasible(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub baseline: ConfigEvaluation,
    pub frontier: Vec<FrontierEntry>,
    pub result: SearchResult,
}

impl SearchOutcome {
    pub fn selected(&self) -> &FrontierEntry {
        match self.result {
            SearchResult::Best(i) | SearchResult::AllInfeasible(i) => &self.frontier[i],
        }
    }
}

/// Margin by which `eval` clears the reliability constraint: its reliability
/// minus the baseline's, plus one pooled standard error.
pub fn reliability_slack(eval: &ConfigEvaluation, baseline: &ConfigEvaluation) -> f64 {
    eval.reliability.mean - baseline.reliability.mean + eval.pooled_reliability_sem(baseline)
}

/// Marks feasibility and picks the feasible evaluation with the highest
/// quality; ties go to higher reliability, then to the earlier entry.
pub fn select_best(baseline: &ConfigEvaluation, evaluations: Vec<ConfigEvaluation>) -> Result<(Vec<FrontierEntry>, SearchResult)> {
    if evaluations.is_empty() {
        return Err(Error::Config("nothing to select from".into()));
    }
    let frontier: Vec<FrontierEntry> = evaluations
        .into_iter()
        .map(|evaluation| FrontierEntry {
            feasible: reliability_slack(&evaluation, baseline) >= 0.0,
            evaluation,
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, e) in frontier.iter().enumerate().filter(|(_, e)| e.feasible) {
        let better = match best {
            None => true,
            Some(j) => {
                let (a, b) = (&e.evaluation, &frontier[j].evaluation);
                let (qa, qb) = (a.quality_preserved_1080p.mean, b.quality_preserved_1080p.mean);
                qa > qb || (qa == qb && a.reliability.mean > b.reliability.mean)
            }
        };
        if better {
            best = Some(i);
        }
    }
    let result = match best {
        Some(i) => SearchResult::Best(i),
        None => {
            let mut least = 0;
            for i in 1..frontier.len() {
                if reliability_slack(&frontier[i].evaluation, baseline)
                    > reliability_slack(&frontier[least].evaluation, baseline)
                {
                    least = i;
                }
            }
            SearchResult::AllInfeasible(least)
        }
    };
    Ok((frontier, result))
}

/// Evaluates up to `budget` shapes of `space` under `kind` (normally
/// TS-ASC) and selects the best feasible one.
pub fn constrained_search(
    problem: &TranscodeProblem,
    space: &SearchSpace,
    budget: usize,
    kind: PolicyKind,
    plan: &TuningPlan,
) -> Result<SearchOutcome> {
    plan.validate()?;
    let shapes = space.select(budget)?;
    let baseline = evaluate_baseline(problem, plan)?;
    let evaluations = evaluate_many(problem, &shapes, kind, plan)?;
    let (frontier, result) = select_best(&baseline, evaluations)?;
    Ok(SearchOutcome {
        baseline,
        frontier,
        result,
    })
}

/// Evaluates `shapes` on `plan.workers` threads; results keep input order.
pub fn evaluate_many(
    problem: &TranscodeProblem,
    shapes: &[RewardShape],
    kind: PolicyKind,
    plan: &TuningPlan,
) -> Result<Vec<ConfigEvaluation>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        shapes
            .par_iter()
            .map(|s| evaluate_policy(problem, kind, s, plan))
            .collect()
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FrontierRow {
    alpha: f64,
    #[serde(rename = "ω_480p")]
    omega_480: f64,
    #[serde(rename = "ω_720p")]
    omega_720: f64,
    #[serde(rename = "ω_1080p")]
    omega_1080: f64,
    quality_mean: f64,
    quality_sem: Option<f64>,
    reliability_mean: f64,
    reliability_sem: Option<f64>,
    feasible: bool,
}

/// Writes one row per evaluated shape, preceded by a fingerprint line.
pub fn write_frontier_csv(path: &Path, frontier: &[FrontierEntry], fingerprint: &str) -> Result<()> {
    let mut buf = format!("# config-sha256={fingerprint}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for e in frontier {
            let ev = &e.evaluation;
            w.serialize(FrontierRow {
                alpha: ev.shape.alpha,
                omega_480: ev.shape.offsets[1],
                omega_720: ev.shape.offsets[2],
                omega_1080: ev.shape.offsets[3],
                quality_mean: ev.quality_preserved_1080p.mean,
                quality_sem: ev.quality_preserved_1080p.sem,
                reliability_mean: ev.reliability.mean,
                reliability_sem: ev.reliability.sem,
                feasible: e.feasible,
            })?;
        }
        if frontier.is_empty() {
            w.write_record([
                "alpha",
                "ω_480p",
                "ω_720p",
                "ω_1080p",
                "quality_mean",
                "quality_sem",
                "reliability_mean",
                "reliability_sem",
                "feasible",
            ])?;
        }
        w.flush()?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Number of data rows in a frontier CSV.
pub fn count_frontier_rows(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path)?;
    let body = text.split_once('\n').map(|(_, b)| b).unwrap_or("");
    Ok(csv::Reader::from_reader(body.as_bytes()).records().count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{select_feasible_argmax, ConstraintFilter};
    use crate::problems::TranscodeConfig;
    use crate::rng::{stream_rng, Stream};

    fn eval(q: f64, r: f64, sem: f64) -> ConfigEvaluation {
        ConfigEvaluation {
            shape: RewardShape::default(),
            policy: PolicyKind::TsAsc,
            quality_preserved_1080p: MeanSem {
                mean: q,
                sem: Some(sem),
                count: 4,
            },
            reliability: MeanSem {
                mean: r,
                sem: Some(sem),
                count: 4,
            },
            replications: 4,
            seeds: vec![],
        }
    }

    #[test]
    fn default_grid_has_108_shapes_within_bounds() {
        let space = SearchSpace::default();
        assert_eq!(space.size(), 108);
        assert_eq!(space.shapes().unwrap().len(), 108);
        assert_eq!(space.select(5).unwrap().len(), 5);
        let random = SearchSpace::Random { samples: 50, seed: 1 };
        assert!(random.shapes().unwrap().iter().all(|s| s.validate().is_ok()));
        assert!(space.select(0).is_err());
    }

    #[test]
    fn dominating_configuration_is_selected() {
        let base = eval(0.2, 0.9, 0.01);
        let evals = vec![eval(0.3, 0.9, 0.01), eval(0.5, 0.9, 0.01), eval(0.4, 0.95, 0.01), eval(0.9, 0.5, 0.01)];
        let (frontier, result) = select_best(&base, evals.clone()).unwrap();
        assert_eq!(frontier.len(), 4);
        let oracle = (0..4)
            .filter(|&i| evals[i].reliability.mean >= 0.9 - (2.0f64 * 0.01 * 0.01).sqrt())
            .max_by(|&i, &j| {
                evals[i]
                    .quality_preserved_1080p
                    .mean
                    .total_cmp(&evals[j].quality_preserved_1080p.mean)
            })
            .unwrap();
        assert_eq!(result, SearchResult::Best(oracle));
        assert_eq!(oracle, 1);
        assert!(!frontier[3].feasible);
    }

    #[test]
    fn one_pooled_sem_of_slack() {
        let base = eval(0.2, 0.90, 0.03);
        let pooled = (2.0f64 * 0.03 * 0.03).sqrt();
        let (f, _) = select_best(&base, vec![eval(0.5, 0.90 - 0.99 * pooled, 0.03)]).unwrap();
        assert!(f[0].feasible);
        let (f, r) = select_best(&base, vec![eval(0.5, 0.90 - 1.01 * pooled, 0.03), eval(0.1, 0.5, 0.03)]).unwrap();
        assert!(!f[0].feasible);
        assert_eq!(r, SearchResult::AllInfeasible(0));
    }

    #[test]
    fn selected_is_never_dominated_by_a_feasible_entry() {
        let mut rng = stream_rng(3, 0, Stream::Policy);
        for _ in 0..200 {
            let base = eval(0.3, 0.9, 0.01);
            let evals: Vec<_> = (0..8)
                .map(|_| eval(rng.random(), rng.random_range(0.85..0.95), 0.01))
                .collect();
            let (frontier, result) = select_best(&base, evals).unwrap();
            if let SearchResult::Best(i) = result {
                let s = &frontier[i].evaluation;
                assert!(frontier.iter().filter(|e| e.feasible).all(|e| {
                    !(e.evaluation.quality_preserved_1080p.mean > s.quality_preserved_1080p.mean
                        && e.evaluation.reliability.mean > s.reliability.mean)
                }));
            }
        }
    }

    #[test]
    fn hard_constraint_with_exact_models_never_loses_reliability() {
        let problem = TranscodeProblem::generate(5, TranscodeConfig::default()).unwrap();
        let shape = RewardShape::new(0.0, 0.05, 0.04, 0.03).unwrap();
        let mut rng = stream_rng(5, 0, Stream::Context);
        for _ in 0..2000 {
            let ctx = problem.transcode_step(&mut rng);
            let b = problem.baseline_action(&ctx);
            let p: Vec<f64> = Quality::ALL.iter().map(|&q| problem.success_probability(&ctx.x, q)).collect();
            let reward: Vec<f64> = p.iter().zip(shape.payoffs()).map(|(p, v)| p * v).collect();
            let (a, _) = select_feasible_argmax(&ctx.available, &reward, &p, b, ConstraintFilter::Relative { alpha: 0.0 });
            assert!(p[a] >= p[b]);
        }
    }

    #[test]
    fn evaluations_are_deterministic_and_paired() {
        let problem = TranscodeProblem::generate(2, TranscodeConfig::default()).unwrap();
        let plan = TuningPlan {
            horizon: 300,
            eval_window: 200,
            replications: 2,
            ..TuningPlan::default()
        };
        let shape = RewardShape::default();
        let a = evaluate_config(&problem, &shape, &plan).unwrap();
        assert_eq!(a, evaluate_config(&problem, &shape, &plan).unwrap());
        assert_eq!(a.seeds, evaluate_baseline(&problem, &plan).unwrap().seeds);
        assert!((0.0..=1.0).contains(&a.reliability.mean));
        assert!((0.0..=1.0).contains(&a.quality_preserved_1080p.mean));
    }

    #[test]
    fn plan_validation() {
        let plan = TuningPlan {
            replications: 1,
            ..TuningPlan::default()
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn frontier_rows_match_budget() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frontier.csv");
        let base = eval(0.2, 0.9, 0.01);
        let (frontier, _) = select_best(&base, vec![eval(0.3, 0.9, 0.01), eval(0.1, 0.8, 0.01)]).unwrap();
        write_frontier_csv(&path, &frontier, "fp").unwrap();
        assert_eq!(count_frontier_rows(&path).unwrap(), 2);
        write_frontier_csv(&path, &[], "fp").unwrap();
        assert_eq!(count_frontier_rows(&path).unwrap(), 0);
    }
}
