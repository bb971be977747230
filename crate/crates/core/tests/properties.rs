//! Property suites checked against independent oracles.

mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use safebandit::bayes::{GaussianLinearPosterior, LaplaceLogisticPosterior};
use safebandit::evaluation::{run_episode_with, SyntheticEnv};
use safebandit::policies::{select_feasible_argmax, ConstraintFilter};
use safebandit::problems::select_baseline;

fn rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sequential_ridge_equals_batch_solve(
        xs in rows(50, 4),
        ys in prop::collection::vec(-5.0..5.0f64, 50),
        lambda in 0.1..5.0f64,
        shift in 0usize..50,
    ) {
        let (v, theta) = common::batch_ridge(&xs, &ys, lambda);
        // Any rotation of the observation order gives the same posterior.
        let mut post = GaussianLinearPosterior::new(4, lambda, 0.1).unwrap();
        for i in 0..50 {
            let j = (i + shift) % 50;
            post.update(&xs[j], ys[j]).unwrap();
        }
        prop_assert!((post.mean() - &theta).amax() < 1e-8);
        prop_assert!((post.precision() - &v).amax() < 1e-8);
    }

    #[test]
    fn ellipsoid_extrema_match_rejection_sampling(
        xs in rows(6, 2),
        ys in prop::collection::vec(-2.0..2.0f64, 6),
        probe in prop::collection::vec(-2.0..2.0f64, 2),
        beta in 0.2..3.0f64,
        seed in any::<u64>(),
    ) {
        prop_assume!(probe.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let mut post = GaussianLinearPosterior::new(2, 1.0, 0.1).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            post.update(x, y).unwrap();
        }
        let (lcb, ucb) = post.ellipsoid_extrema(&probe, beta).unwrap();
        let v = post.precision().clone();
        let cov = v.clone().try_inverse().unwrap();
        let center = post.mean().clone();
        let half: Vec<f64> = (0..2).map(|i| beta * cov[(i, i)].sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut lo, mut hi, mut accepted) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        while accepted < 10_000 {
            let theta = DVector::from_fn(2, |i, _| center[i] + rng.random_range(-half[i]..=half[i]));
            let diff = &theta - &center;
            if (diff.transpose() * &v * &diff)[(0, 0)] > beta * beta {
                continue;
            }
            accepted += 1;
            let value = probe[0] * theta[0] + probe[1] * theta[1];
            prop_assert!(value >= lcb - 1e-9 && value <= ucb + 1e-9);
            lo = lo.min(value);
            hi = hi.max(value);
        }
        let width = ucb - lcb;
        prop_assert!(hi >= ucb - 0.01 * width, "max {hi} vs ucb {ucb}");
        prop_assert!(lo <= lcb + 0.01 * width, "min {lo} vs lcb {lcb}");
    }

    #[test]
    fn laplace_gradient_matches_finite_differences(
        xs in rows(30, 4),
        labels in prop::collection::vec(any::<bool>(), 30),
        point in prop::collection::vec(-1.0..1.0f64, 4),
        lambda in 0.5..3.0f64,
    ) {
        let mut post = LaplaceLogisticPosterior::new(4, lambda).unwrap();
        for (x, &y) in xs.iter().zip(&labels) {
            post.push(x, y).unwrap();
        }
        let theta = DVector::from_vec(point);
        let grad = post.gradient(&theta);
        let h = 1e-5;
        for i in 0..4 {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (post.objective(&up) - post.objective(&down)) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6, "coordinate {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn laplace_mode_is_a_local_maximum(
        xs in rows(40, 3),
        labels in prop::collection::vec(any::<bool>(), 40),
        seed in any::<u64>(),
    ) {
        let mut post = LaplaceLogisticPosterior::new(3, 1.0).unwrap();
        for (x, &y) in xs.iter().zip(&labels) {
            post.push(x, y).unwrap();
        }
        post.fit().unwrap();
        let mode = post.map().clone();
        let top = post.objective(&mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let u = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng)).normalize();
            prop_assert!(post.objective(&(&mode + u * 1e-3)) <= top);
        }
    }
}

#[test]
fn baseline_selection_matches_oracle_on_1000_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1000 {
        let (reward, constraint) = common::baseline_instance(&mut rng, case % 4 == 0);
        assert_eq!(
            select_baseline(&reward, &constraint).unwrap(),
            common::baseline_oracle(&reward, &constraint),
            "instance {case}"
        );
    }
}

#[test]
fn exact_model_ts_asc_feasible_set_equals_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 100 {
        let alpha = [0.1, 0.01, 0.001, 0.0001][checked % 4];
        if let Some(result) = common::exact_model_case(&mut rng, alpha) {
            result.unwrap_or_else(|e| panic!("instance {checked}: {e}"));
            checked += 1;
        }
    }
}

#[test]
fn selection_matches_enumeration_with_partial_availability() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let n = rng.random_range(2..12);
        let reward: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let constraint: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let available: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
        if available.is_empty() {
            continue;
        }
        let b = available[rng.random_range(0..available.len())];
        let alpha = rng.random_range(0.0..0.3);
        let (a, feasible) =
            select_feasible_argmax(&available, &reward, &constraint, b, ConstraintFilter::Relative { alpha });
        let oracle: Vec<usize> = available
            .iter()
            .copied()
            .filter(|&i| i == b || constraint[i] >= (1.0 - alpha) * constraint[b])
            .collect();
        assert_eq!(feasible, oracle);
        let top = oracle.iter().map(|&i| reward[i]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a, *oracle.iter().find(|&&i| reward[i] == top).unwrap());
    }
}

#[test]
fn regret_is_nonnegative_whenever_the_action_is_feasible() {
    let problem = safebandit::problems::generate_synthetic(4, 0.1, &Default::default()).unwrap();
    let env = SyntheticEnv::new(&problem);
    let settings = safebandit::policies::LinearModelSettings::default();
    for kind in [
        safebandit::policies::PolicyKind::TsAsc,
        safebandit::policies::PolicyKind::Clucb2AscC,
        safebandit::policies::PolicyKind::VanillaTs,
    ] {
        let mut policy = safebandit::policies::build_linear_policy(kind, 0.1, problem.dim(), &settings).unwrap();
        run_episode_with(&env, policy.as_mut(), 400, 3, |_, rec| {
            assert!(rec.regret_unconstrained >= -1e-12);
            if !rec.violation {
                assert!(rec.regret >= -1e-12, "{rec:?}");
            }
            Ok(())
        })
        .unwrap();
    }
}
