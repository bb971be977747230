//! Independent oracles shared by the property and acceptance targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use safebandit::bayes::{GaussianLinearPosterior, LaplaceLogisticPosterior};
use safebandit::policies::{Decision, MetricModel, Policy, PolicyKind, StepContext, ThompsonSampling};
use safebandit::problems::LinearConstraintProblem;

pub type Check = Result<(), String>;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Ridge solution `(XᵀX + λI)⁻¹ Xᵀy` in one shot.
pub fn batch_ridge(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let d = xs[0].len();
    let x = DMatrix::from_fn(xs.len(), d, |i, j| xs[i][j]);
    let y = DVector::from_column_slice(ys);
    let v = x.transpose() * &x + DMatrix::identity(d, d) * lambda;
    let theta = v.clone().lu().solve(&(x.transpose() * y)).expect("λ > 0 keeps V invertible");
    (v, theta)
}

/// Shuffled sequential updates against the batch solve, to `1e-8`.
pub fn ridge_case(rng: &mut ChaCha8Rng) -> Check {
    let (n, d) = (rng.random_range(1..60), rng.random_range(1..6));
    let lambda = rng.random_range(0.1..5.0);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| 3.0 * normal(rng)).collect()).collect();
    let ys: Vec<f64> = (0..n).map(|_| 2.0 * normal(rng)).collect();
    let (v, theta) = batch_ridge(&xs, &ys, lambda);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut post = GaussianLinearPosterior::new(d, lambda, 0.1).map_err(|e| e.to_string())?;
    for &i in &order {
        post.update(&xs[i], ys[i]).map_err(|e| e.to_string())?;
    }
    let err = (post.mean() - &theta).amax().max((post.precision() - &v).amax());
    if err < 1e-8 {
        Ok(())
    } else {
        Err(format!("ridge mismatch {err:e} (n={n}, d={d})"))
    }
}

/// `xᵀθ̂ ± β‖x‖_{V⁻¹}` against the range of `xᵀθ` over 10,000 points drawn
/// uniformly from the ellipsoid by bounding-box rejection; both ends within
/// 1% of the interval width.
pub fn ellipsoid_case(rng: &mut ChaCha8Rng) -> Check {
    let mut post = GaussianLinearPosterior::new(2, 1.0, 0.1).map_err(|e| e.to_string())?;
    for _ in 0..rng.random_range(0..8) {
        let x = [normal(rng), normal(rng)];
        post.update(&x, normal(rng)).map_err(|e| e.to_string())?;
    }
    let probe = [normal(rng), normal(rng)];
    let beta = rng.random_range(0.2..3.0);
    let (lcb, ucb) = post.ellipsoid_extrema(&probe, beta).map_err(|e| e.to_string())?;
    let v = post.precision().clone();
    let cov = v.clone().try_inverse().ok_or("singular precision")?;
    let center = post.mean().clone();
    let half = [beta * cov[(0, 0)].sqrt(), beta * cov[(1, 1)].sqrt()];
    let (mut lo, mut hi, mut accepted) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    while accepted < 10_000 {
        let theta = DVector::from_fn(2, |i, _| center[i] + rng.random_range(-half[i]..=half[i]));
        let diff = &theta - &center;
        if (diff.transpose() * &v * &diff)[(0, 0)] > beta * beta {
            continue;
        }
        accepted += 1;
        let value = probe[0] * theta[0] + probe[1] * theta[1];
        if value < lcb - 1e-9 || value > ucb + 1e-9 {
            return Err(format!("point {value} escapes [{lcb}, {ucb}]"));
        }
        lo = lo.min(value);
        hi = hi.max(value);
    }
    let tol = 0.01 * (ucb - lcb);
    if hi >= ucb - tol && lo <= lcb + tol {
        Ok(())
    } else {
        Err(format!("sampled range [{lo}, {hi}] vs [{lcb}, {ucb}]"))
    }
}

/// Analytic gradient of the log posterior against central differences, to
/// `1e-6` per coordinate.
pub fn laplace_gradient_case(rng: &mut ChaCha8Rng) -> Check {
    let d = rng.random_range(1..6);
    let mut post = LaplaceLogisticPosterior::new(d, rng.random_range(0.5..3.0)).map_err(|e| e.to_string())?;
    for _ in 0..rng.random_range(0..40) {
        let x: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        post.push(&x, rng.random_bool(0.5)).map_err(|e| e.to_string())?;
    }
    let theta = DVector::from_fn(d, |_, _| normal(rng));
    let grad = post.gradient(&theta);
    let h = 1e-5;
    for i in 0..d {
        let (mut up, mut down) = (theta.clone(), theta.clone());
        up[i] += h;
        down[i] -= h;
        let fd = (post.objective(&up) - post.objective(&down)) / (2.0 * h);
        if (fd - grad[i]).abs() > 1e-6 {
            return Err(format!("coordinate {i}: finite difference {fd} vs gradient {}", grad[i]));
        }
    }
    Ok(())
}

/// Rank-counting oracle for the baseline rule, written without sorting:
/// among the 30 best arms by reward, the one ranked 20th by constraint
/// value, ties to the lowest index.
pub fn baseline_oracle(reward: &[f64], constraint: &[f64]) -> usize {
    let k = reward.len();
    let before = |v: &[f64], a: usize, b: usize| v[b] > v[a] || (v[b] == v[a] && b < a);
    let pool: Vec<usize> = (0..k)
        .filter(|&a| (0..k).filter(|&b| before(reward, a, b)).count() < 30)
        .collect();
    let ranked = pool
        .iter()
        .copied()
        .find(|&a| pool.iter().filter(|&&b| before(constraint, a, b)).count() == 19)
        .expect("pool holds 30 arms");
    pool.iter()
        .copied()
        .filter(|&a| constraint[a] == constraint[ranked])
        .min()
        .expect("ranked arm is in the pool")
}

/// Random baseline-selection instance; every fourth one draws from a coarse
/// grid so ties occur.
pub fn baseline_instance(rng: &mut ChaCha8Rng, coarse: bool) -> (Vec<f64>, Vec<f64>) {
    let k = rng.random_range(31..=120);
    let mut draw = || if coarse { rng.random_range(0..6) as f64 } else { normal(rng) };
    let reward: Vec<f64> = (0..k).map(|_| draw()).collect();
    let constraint: Vec<f64> = (0..k).map(|_| draw()).collect();
    (reward, constraint)
}

/// TS-ASC with both posteriors collapsed onto the true parameters must
/// report the oracle feasible set and play its best arm. Returns `None`
/// when an arm sits within float noise of the threshold.
pub fn exact_model_case(rng: &mut ChaCha8Rng, alpha: f64) -> Option<Check> {
    let (k, d) = (10, 4);
    let features = DMatrix::from_fn(k, d, |_, _| normal(rng));
    let theta_r: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let theta_c: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let baseline = rng.random_range(0..k);
    let problem = LinearConstraintProblem::from_parts(
        features.clone(),
        DVector::from_column_slice(&theta_r),
        DVector::from_column_slice(&theta_c),
        0.1,
        alpha,
        Some(baseline),
    )
    .ok()?;
    let c = problem.constraint_means();
    let threshold = (1.0 - alpha) * c[baseline];
    if c.iter().enumerate().any(|(a, &v)| a != baseline && (v - threshold).abs() < 1e-6) {
        return None;
    }
    let oracle: Vec<usize> = (0..k).filter(|&a| a == baseline || c[a] >= threshold).collect();
    let r = problem.reward_means();
    let best = *oracle.iter().max_by(|&&a, &&b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))?;
    let model = MetricModel::Linear {
        reward: GaussianLinearPosterior::with_prior_mean(&theta_r, 1.0, 1e-12).ok()?,
        constraint: GaussianLinearPosterior::with_prior_mean(&theta_c, 1.0, 1e-12).ok()?,
    };
    let mut policy = ThompsonSampling::ts_asc(model, alpha).ok()?;
    let available: Vec<usize> = (0..k).collect();
    let ctx = StepContext {
        features: &features,
        available: &available,
        baseline,
    };
    Some(match policy.select(&ctx, rng) {
        Err(e) => Err(e.to_string()),
        Ok(_) if problem.oracle_feasible_set(alpha) != oracle => Err("problem oracle disagrees".into()),
        Ok(dec) if dec.feasible != oracle => Err(format!("feasible {:?} vs oracle {oracle:?}", dec.feasible)),
        Ok(dec) if dec.action != best => Err(format!("played {} instead of {best}", dec.action)),
        Ok(_) => Ok(()),
    })
}

/// The played action and the baseline lie in the logged feasible set, and
/// for per-step rules the logged scores pass the constraint check.
pub fn audit_decision(kind: PolicyKind, alpha: f64, d: &Decision) -> Check {
    if !d.feasible.windows(2).all(|w| w[0] < w[1]) {
        return Err(format!("step {}: feasible set not ascending", d.t));
    }
    if !d.feasible.contains(&d.action) || !d.feasible.contains(&d.baseline) {
        return Err(format!("step {}: action {} or baseline {} outside {:?}", d.t, d.action, d.baseline, d.feasible));
    }
    if d.action == d.baseline {
        return Ok(());
    }
    match kind {
        PolicyKind::TsAsc | PolicyKind::Clucb2AscI => {
            let s = d.scores.ok_or_else(|| format!("step {}: no scores logged", d.t))?;
            if s.constraint < (1.0 - alpha) * s.baseline_constraint {
                return Err(format!(
                    "step {}: {} < (1 - {alpha}) * {}",
                    d.t, s.constraint, s.baseline_constraint
                ));
            }
        }
        PolicyKind::Baseline => return Err(format!("step {}: baseline policy left the baseline", d.t)),
        PolicyKind::Clucb2AscC | PolicyKind::VanillaTs => {}
    }
    Ok(())
}
