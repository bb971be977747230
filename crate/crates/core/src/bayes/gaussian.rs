use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, Error, Result};

/// Conjugate posterior of a linear model `y = xᵀθ + ε`, `ε ~ N(0, σ²)`,
/// under the ridge prior `θ ~ N(0, σ²/λ · I)`.
///
/// ```text
///   V_t = λI + Σ x xᵀ      b_t = Σ x y      θ̂ = V_t⁻¹ b_t
///   θ | D_t ~ N(θ̂, σ² V_t⁻¹)
/// ```
///
/// The Cholesky factor of `V_t` is refreshed after every update and shared by
/// posterior sampling and the confidence-ellipsoid bounds.
#[derive(Debug, Clone)]
pub struct GaussianLinearPosterior {
    lambda: f64,
    noise_std: f64,
    precision: DMatrix<f64>,
    moment: DVector<f64>,
    mean: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
    count: u64,
}

impl GaussianLinearPosterior {
    pub fn new(dim: usize, lambda: f64, noise_std: f64) -> Result<Self> {
        Self::with_prior_mean(&vec![0.0; dim], lambda, noise_std)
    }

    /// Posterior whose zero-data mean is `prior_mean` (moment `b_0 = λ·m`).
    ///
    /// With a large `lambda` and tiny `noise_std` this pins the model at a
    /// known parameter, which is how exact-model checks are built.
    pub fn with_prior_mean(prior_mean: &[f64], lambda: f64, noise_std: f64) -> Result<Self> {
        let dim = prior_mean.len();
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("regularizer must be positive, got {lambda}")));
        }
        if !(noise_std.is_finite() && noise_std > 0.0) {
            return Err(Error::InvalidInput(format!("noise std must be positive, got {noise_std}")));
        }
        ensure_finite(prior_mean, "prior mean")?;
        let precision = DMatrix::identity(dim, dim) * lambda;
        let moment = DVector::from_column_slice(prior_mean) * lambda;
        let factor = Cholesky::new(precision.clone())
            .ok_or(Error::NotPositiveDefinite("initial precision"))?;
        let mean = factor.solve(&moment);
        Ok(Self {
            lambda,
            noise_std,
            precision,
            moment,
            mean,
            factor,
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Adds one observation `(x, y)` and refreshes `θ̂`.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check_dim(x.len())?;
        ensure_finite(x, "feature")?;
        ensure_finite(&[y], "observation")?;
        let d = self.dim();
        for i in 0..d {
            self.moment[i] += x[i] * y;
            for j in 0..d {
                self.precision[(i, j)] += x[i] * x[j];
            }
        }
        self.factor = Cholesky::new(self.precision.clone())
            .ok_or(Error::NotPositiveDefinite("posterior precision"))?;
        self.mean = self.factor.solve(&self.moment);
        self.count += 1;
        Ok(())
    }

    /// Draws `θ̃ ~ N(θ̂, σ² V⁻¹)`.
    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(&mut *rng));
        // V = L Lᵀ, so L⁻ᵀ z has covariance V⁻¹.
        let shift = self.factor.l_dirty().tr_solve_lower_triangular(&z).expect("triangular factor");
        &self.mean + shift * self.noise_std
    }

    /// `xᵀ θ̂`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.mean.iter()).map(|(a, b)| a * b).sum()
    }

    /// `‖x‖²_{V⁻¹} = xᵀ V⁻¹ x`.
    pub fn inverse_quadratic(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        let w = self.factor.l_dirty().solve_lower_triangular(&v).expect("triangular factor");
        w.norm_squared()
    }

    /// `L⁻¹ M` for the columns of `M`; column norms of the result are the
    /// `V⁻¹`-norms of the columns of `M`.
    pub fn whiten(&self, columns: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor
            .l_dirty()
            .solve_lower_triangular(columns)
            .expect("triangular factor")
    }

    /// Minimum and maximum of `xᵀθ` over `{θ : ‖θ − θ̂‖_V ≤ β}`.
    pub fn ellipsoid_extrema(&self, x: &[f64], beta: f64) -> Result<(f64, f64)> {
        self.check_dim(x.len())?;
        ensure_finite(x, "feature")?;
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidInput(format!("radius must be nonnegative, got {beta}")));
        }
        let center = self.predict(x);
        let half = beta * self.inverse_quadratic(x).sqrt();
        Ok((center - half, center + half))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn single_update_closed_form() {
        let mut post = GaussianLinearPosterior::new(1, 1.0, 0.1).unwrap();
        post.update(&[1.0], 1.0).unwrap();
        assert_abs_diff_eq!(post.precision()[(0, 0)], 2.0);
        assert_abs_diff_eq!(post.mean()[0], 0.5, epsilon = 1e-15);
        assert_eq!(post.count(), 1);
    }

    #[test]
    fn zero_feature_carries_no_information() {
        let mut rng = stream_rng(1, 0, Stream::Policy);
        let mut post = GaussianLinearPosterior::new(3, 1.0, 0.1).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            post.update(&x, rng.random()).unwrap();
        }
        let before = post.clone();
        post.update(&[0.0; 3], 5.0).unwrap();
        assert_eq!(before.mean(), post.mean());
        assert_eq!(before.precision(), post.precision());
    }

    #[test]
    fn rejects_bad_input() {
        let mut post = GaussianLinearPosterior::new(2, 1.0, 0.1).unwrap();
        assert!(matches!(post.update(&[f64::NAN, 0.0], 1.0), Err(Error::InvalidInput(_))));
        assert!(matches!(post.update(&[0.0, 0.0], f64::INFINITY), Err(Error::InvalidInput(_))));
        assert!(matches!(post.update(&[0.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(post.ellipsoid_extrema(&[1.0, 0.0], -1.0).is_err());
        assert!(GaussianLinearPosterior::new(2, 0.0, 0.1).is_err());
        assert!(GaussianLinearPosterior::new(2, 1.0, -0.1).is_err());
    }

    #[test]
    fn prior_state() {
        let post = GaussianLinearPosterior::new(4, 2.0, 0.1).unwrap();
        assert_eq!(post.precision(), &(DMatrix::identity(4, 4) * 2.0));
        assert!(post.mean().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn degenerate_noise_sample_is_the_mean() {
        let mut rng = stream_rng(3, 0, Stream::Policy);
        let mut post = GaussianLinearPosterior::new(3, 1.0, 1e-12).unwrap();
        post.update(&[1.0, 2.0, -1.0], 0.7).unwrap();
        post.update(&[0.5, 0.0, 1.0], -0.2).unwrap();
        let s = post.sample(&mut rng);
        for i in 0..3 {
            assert_abs_diff_eq!(s[i], post.mean()[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let post = GaussianLinearPosterior::new(4, 1.0, 0.1).unwrap();
        let a = post.sample(&mut stream_rng(11, 2, Stream::Policy));
        let b = post.sample(&mut stream_rng(11, 2, Stream::Policy));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_moments_match_prior() {
        let post = GaussianLinearPosterior::new(1, 1.0, 0.1).unwrap();
        let mut rng = stream_rng(5, 0, Stream::Policy);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| post.sample(&mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * 0.1 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 0.01).abs() <= 0.05 * 0.01, "var {var}");
    }

    #[test]
    fn unit_ellipsoid_bounds() {
        let post = GaussianLinearPosterior::new(1, 1.0, 0.1).unwrap();
        assert_eq!(post.ellipsoid_extrema(&[1.0], 1.0).unwrap(), (-1.0, 1.0));
        let (lo, hi) = post.ellipsoid_extrema(&[1.0], 0.0).unwrap();
        assert_eq!(lo, hi);
    }

    #[test]
    fn width_shrinks_when_the_same_feature_repeats() {
        let mut post = GaussianLinearPosterior::new(2, 1.0, 0.1).unwrap();
        let x = [0.3, -1.2];
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let (lo, hi) = post.ellipsoid_extrema(&x, 1.5).unwrap();
            assert!(hi - lo <= last + 1e-15);
            last = hi - lo;
            post.update(&x, i as f64 * 0.01).unwrap();
        }
    }

    #[test]
    fn whiten_matches_inverse_quadratic() {
        let mut post = GaussianLinearPosterior::new(2, 1.0, 0.1).unwrap();
        post.update(&[1.0, 0.5], 0.3).unwrap();
        post.update(&[-0.2, 0.8], 0.1).unwrap();
        let cols = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, -0.5, 0.25]);
        let w = post.whiten(&cols);
        assert_abs_diff_eq!(w.column(0).norm_squared(), post.inverse_quadratic(&[1.0, 2.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(w.column(1).norm_squared(), post.inverse_quadratic(&[-0.5, 0.25]), epsilon = 1e-12);
    }
}
