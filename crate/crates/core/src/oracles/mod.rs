//! Exact and baseline reference filters.

mod bootstrap;
mod enkf;
mod kalman;

pub use bootstrap::bootstrap_filter;
pub use enkf::{enkf_filter, EnkfOutput};
pub use kalman::{gaussian_conditional, kalman_filter, kalman_guided_oracle, KalmanOutput};

use nalgebra::{DMatrix, DVector};

/// Linear-Gaussian state space model with identity observation matrix:
/// X_t = X_s + drift (t - s) + N(0, (t - s) q_rate), Y = X + N(0, obs_cov).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSpec {
    pub drift: DVector<f64>,
    pub q_rate: DMatrix<f64>,
    pub obs_cov: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

impl LinearGaussianSpec {
    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    /// Independent coordinates with scalar rates, useful for tests.
    pub fn isotropic(d: usize, q: f64, r: f64) -> Self {
        LinearGaussianSpec {
            drift: DVector::zeros(d),
            q_rate: DMatrix::identity(d, d) * q,
            obs_cov: DMatrix::identity(d, d) * r,
            init_mean: DVector::zeros(d),
            init_cov: DMatrix::zeros(d, d),
        }
    }
}
