//! The two posterior models: conjugate Bayesian ridge with its confidence
//! ellipsoid, and the Laplace-approximated logistic model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use safebandit::bayes::{logistic, ConfidenceRadius, GaussianLinearPosterior, LaplaceLogisticPosterior};

fn main() -> safebandit::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = [0.8, -0.4, 0.3];
    let noise = Normal::new(0.0, 0.1).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();

    // Ridge: one observation at a time, O(d²) per update.
    let mut ridge = GaussianLinearPosterior::new(3, 1.0, 0.1)?;
    let mut radius = ConfidenceRadius::new(0.001, ConfidenceRadius::default_param_bound(3), f64::MIN_POSITIVE)?;
    let probe = [1.0, 0.5, -0.5];
    let truth: f64 = probe.iter().zip(&theta).map(|(a, b)| a * b).sum();
    for t in 1..=500u64 {
        let x: Vec<f64> = (0..3).map(|_| unit.sample(&mut rng)).collect();
        let y = x.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + noise.sample(&mut rng);
        radius.register_feature_norm(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        ridge.update(&x, y)?;
        if t.is_power_of_two() && t >= 8 {
            let beta = radius.beta(t, 3, 0.1, 1.0);
            let (lo, hi) = ridge.ellipsoid_extrema(&probe, beta)?;
            println!("t={t:>3}  x'θ in [{lo:.3}, {hi:.3}]  (truth {truth:.3}, β={beta:.2})");
        }
    }
    let draw = ridge.sample(&mut rng);
    println!("posterior mean {:.3?}, one draw {:.3?}", ridge.mean().as_slice(), draw.as_slice());

    // Logistic: batch Newton refit, then Gaussian draws around the mode.
    let w = [1.5, -2.0];
    let mut logit = LaplaceLogisticPosterior::new(2, 1.0)?;
    for _ in 0..2000 {
        let x = [1.0, unit.sample(&mut rng)];
        let p = logistic(w[0] * x[0] + w[1] * x[1]);
        logit.push(&x, Bernoulli::new(p).unwrap().sample(&mut rng))?;
    }
    let fit = logit.fit()?;
    println!("logistic fit: {fit:?}");
    println!("mode {:.3?} (truth {w:?})", logit.map().as_slice());
    let x = [1.0, 0.5];
    println!(
        "p(x) at the mode {:.3}, sampled {:.3}, truth {:.3}",
        logit.map_probability(&x),
        logit.sample_probability(&x, &mut rng)?,
        logistic(w[0] + w[1] * 0.5)
    );
    Ok(())
}
