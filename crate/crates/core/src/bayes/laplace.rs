use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, Error, Result};

const PROB_FLOOR: f64 = 1e-12;

/// Logistic function clamped to the open unit interval.
pub fn logistic(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `ln(1 + eᶻ)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Summary of one MAP fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Gaussian (Laplace) approximation to the posterior of a Bayesian logistic
/// model with prior `θ ~ N(0, λ⁻¹ I)`.
///
/// Observations are buffered; [`fit`](Self::fit) moves the MAP estimate
/// `θ*` with damped Newton steps (warm-started from the previous fit) and
/// stores the negative Hessian
///
/// ```text
///   H = λI + Σ p̂ᵢ(1 − p̂ᵢ) xᵢxᵢᵀ   at θ*
/// ```
///
/// so that the approximate posterior is `N(θ*, H⁻¹)`. Before the first fit
/// the state is the prior.
#[derive(Debug, Clone)]
pub struct LaplaceLogisticPosterior {
    dim: usize,
    lambda: f64,
    map: DVector<f64>,
    hessian: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    features: Vec<f64>,
    labels: Vec<f64>,
    fitted: usize,
    max_iterations: usize,
    tolerance: f64,
}

impl LaplaceLogisticPosterior {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("regularizer must be positive, got {lambda}")));
        }
        let hessian = DMatrix::identity(dim, dim) * lambda;
        let factor = Cholesky::new(hessian.clone()).ok_or(Error::NotPositiveDefinite("prior precision"))?;
        Ok(Self {
            dim,
            lambda,
            map: DVector::zeros(dim),
            hessian,
            factor,
            features: Vec::new(),
            labels: Vec::new(),
            fitted: 0,
            max_iterations: 100,
            tolerance: 1e-6,
        })
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn map(&self) -> &DVector<f64> {
        &self.map
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    /// Number of buffered observations.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Observations included in the last fit.
    pub fn fitted_len(&self) -> usize {
        self.fitted
    }

    pub fn push(&mut self, x: &[f64], success: bool) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        ensure_finite(x, "feature")?;
        self.features.extend_from_slice(x);
        self.labels.push(if success { 1.0 } else { 0.0 });
        Ok(())
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    fn dot(a: &[f64], b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    /// Log posterior up to a constant:
    /// `Σ [yᵢ ln pᵢ + (1−yᵢ) ln(1−pᵢ)] − (λ/2)‖θ‖²`.
    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        let mut total = -0.5 * self.lambda * theta.norm_squared();
        for (x, y) in self.rows() {
            let z = Self::dot(x, theta);
            // y ln σ(z) + (1−y) ln σ(−z) = y z − ln(1 + eᶻ)
            total += y * z - softplus(z);
        }
        total
    }

    /// Gradient of [`objective`](Self::objective).
    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut g = -theta * self.lambda;
        for (x, y) in self.rows() {
            let r = y - logistic(Self::dot(x, theta));
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += r * xi;
            }
        }
        g
    }

    fn negative_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::identity(d, d) * self.lambda;
        for (x, _) in self.rows() {
            let p = logistic(Self::dot(x, theta));
            let w = p * (1.0 - p);
            for i in 0..d {
                let wi = w * x[i];
                for j in 0..=i {
                    h[(i, j)] += wi * x[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    /// Refits the MAP estimate and curvature on every buffered observation.
    pub fn fit(&mut self) -> Result<FitReport> {
        if self.is_empty() {
            return Err(Error::InvalidInput("cannot fit without observations".into()));
        }
        let mut theta = self.map.clone();
        let mut value = self.objective(&theta);
        let mut grad = self.gradient(&theta);
        let mut iterations = 0;
        while grad.norm() > self.tolerance {
            if iterations == self.max_iterations {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: grad.norm(),
                });
            }
            iterations += 1;
            let h = self.negative_hessian(&theta);
            let chol = Cholesky::new(h).ok_or(Error::NotPositiveDefinite("logistic curvature"))?;
            let step = chol.solve(&grad);
            let slope = grad.dot(&step);
            if slope <= 1e-13 * value.abs().max(1.0) {
                // The predicted increase is below the resolution of the
                // objective: take pure Newton steps judged by the gradient.
                let candidate = &theta + &step;
                let cand_grad = self.gradient(&candidate);
                if cand_grad.norm() >= grad.norm() {
                    break;
                }
                value = self.objective(&candidate);
                theta = candidate;
                grad = cand_grad;
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let candidate = &theta + &step * t;
                let cand_value = self.objective(&candidate);
                if cand_value >= value + 1e-4 * t * slope {
                    theta = candidate;
                    value = cand_value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            grad = self.gradient(&theta);
        }
        let residual = grad.norm();
        if residual > self.tolerance {
            return Err(Error::NoConvergence { iterations, residual });
        }
        self.hessian = self.negative_hessian(&theta);
        self.factor = Cholesky::new(self.hessian.clone()).ok_or(Error::NotPositiveDefinite("logistic curvature"))?;
        self.map = theta;
        self.fitted = self.len();
        Ok(FitReport {
            iterations,
            gradient_norm: residual,
        })
    }

    /// Draws `θ̃ ~ N(θ*, H⁻¹)`.
    pub fn sample_weights(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut *rng));
        let shift = self.factor.l_dirty().tr_solve_lower_triangular(&z).expect("triangular factor");
        &self.map + shift
    }

    /// Success probability under one posterior draw.
    pub fn sample_probability(&self, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let w = self.sample_weights(rng);
        Ok(logistic(Self::dot(x, &w)))
    }

    /// Success probability at the MAP weights.
    pub fn map_probability(&self, x: &[f64]) -> f64 {
        logistic(Self::dot(x, &self.map))
    }

    /// Scales the stored curvature by `factor`; used to build near-degenerate
    /// posteriors in checks.
    pub fn scale_curvature(&mut self, factor: f64) -> Result<()> {
        self.hessian *= factor;
        self.factor = Cholesky::new(self.hessian.clone()).ok_or(Error::NotPositiveDefinite("scaled curvature"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn random_posterior(seed: u64, n: usize, d: usize) -> LaplaceLogisticPosterior {
        let mut rng = stream_rng(seed, 0, Stream::Environment);
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut post = LaplaceLogisticPosterior::new(d, 1.0).unwrap();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
            let y = rng.random::<f64>() < logistic(z);
            post.push(&x, y).unwrap();
        }
        post
    }

    #[test]
    fn zero_feature_keeps_prior_mode() {
        let mut post = LaplaceLogisticPosterior::new(3, 1.0).unwrap();
        post.push(&[0.0; 3], true).unwrap();
        post.fit().unwrap();
        assert!(post.map().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_requires_data() {
        let mut post = LaplaceLogisticPosterior::new(2, 1.0).unwrap();
        assert!(post.fit().is_err());
    }

    #[test]
    fn separable_set_stays_finite_and_matches_grid_search() {
        let mut post = LaplaceLogisticPosterior::new(1, 1.0).unwrap();
        for _ in 0..20 {
            post.push(&[1.0], true).unwrap();
            post.push(&[-1.0], false).unwrap();
        }
        post.fit().unwrap();
        let theta = post.map()[0];
        assert!(theta > 0.0 && theta.is_finite());
        // Grid oracle over the one-dimensional objective.
        let objective = |t: f64| -> f64 { 40.0 * (-softplus(-t)) - 0.5 * t * t };
        let best = (0..=200_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| objective(*a).partial_cmp(&objective(*b)).unwrap())
            .unwrap();
        assert!((theta - best).abs() < 2e-4, "newton {theta} grid {best}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let post = random_posterior(9, 200, 4);
        let mut rng = stream_rng(10, 0, Stream::Policy);
        for _ in 0..5 {
            let theta = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let g = post.gradient(&theta);
            let h = 1e-5;
            for i in 0..4 {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (post.objective(&up) - post.objective(&down)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6, "coord {i}: fd {fd} analytic {}", g[i]);
            }
        }
    }

    #[test]
    fn map_is_a_local_maximum_and_hessian_is_consistent() {
        let mut post = random_posterior(4, 300, 4);
        let report = post.fit().unwrap();
        assert!(report.gradient_norm <= 1e-6);
        let best = post.objective(post.map());
        let mut rng = stream_rng(12, 0, Stream::Policy);
        for _ in 0..100 {
            let u: DVector<f64> = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
            let u = &u / u.norm();
            assert!(best >= post.objective(&(post.map() + u * 1e-3)));
        }
        let expected = post.negative_hessian(&post.map().clone());
        assert!((post.hessian() - expected).abs().max() < 1e-12);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let mut post = random_posterior(5, 50, 3).with_max_iterations(0);
        match post.fit() {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 0);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_feature_probability_is_one_half() {
        let post = random_posterior(6, 30, 2);
        let mut rng = stream_rng(1, 1, Stream::Policy);
        for _ in 0..10 {
            assert_eq!(post.sample_probability(&[0.0, 0.0], &mut rng).unwrap(), 0.5);
        }
    }

    #[test]
    fn concentrated_posterior_samples_near_map() {
        let mut post = random_posterior(7, 100, 3);
        post.fit().unwrap();
        post.scale_curvature(1e6).unwrap();
        let x = [0.4, -1.0, 0.7];
        let center = post.map_probability(&x);
        let mut rng = stream_rng(2, 1, Stream::Policy);
        for _ in 0..100 {
            let p = post.sample_probability(&x, &mut rng).unwrap();
            assert!((p - center).abs() < 1e-3);
        }
    }

    #[test]
    fn probabilities_stay_inside_the_open_interval() {
        assert!(logistic(1e4) < 1.0);
        assert!(logistic(-1e4) > 0.0);
        assert_eq!(logistic(0.0), 0.5);
    }
}
