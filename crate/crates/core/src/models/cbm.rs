//! Correlated Brownian motion observed with independent Gaussian noise.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guide::{gaussian_forecast_logdensity, Covariance};
use crate::model::{Model, ObsSeries};
use crate::oracles::LinearGaussianSpec;
use crate::params::{ParamEntry, ParamKind, ParamVector, Transform};
use crate::rng::SimRng;

const ALPHA: usize = 0;
const OBS_SD: usize = 1;
const X0: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatedBmConfig {
    pub d: usize,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "unit")]
    pub obs_sd: f64,
    /// Drift per unit time, zero when omitted.
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    /// Common initial value of every coordinate.
    #[serde(default)]
    pub x0: f64,
}

fn unit() -> f64 {
    1.0
}

impl CorrelatedBmConfig {
    /// Zero drift and start, unit measurement sd.
    pub fn new(d: usize, alpha: f64) -> Self {
        CorrelatedBmConfig {
            d,
            alpha,
            obs_sd: 1.0,
            drift: None,
            x0: 0.0,
        }
    }
}

/// X_{t+delta} = X_t + drift delta + N(0, delta A) with A = (1 - alpha) I +
/// alpha 1 1', and Y_n = X_{t_n} + N(0, obs_sd^2 I).
#[derive(Debug, Clone)]
pub struct CorrelatedBm {
    d: usize,
    drift: Vec<f64>,
    params: ParamVector,
    base_alpha: f64,
    chol: Option<DMatrix<f64>>,
}

/// Equicorrelation matrix with unit diagonal.
pub fn cbm_correlation(d: usize, alpha: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { alpha })
}

fn cholesky_of(d: usize, alpha: f64) -> Result<Option<DMatrix<f64>>> {
    if alpha == 0.0 {
        return Ok(None);
    }
    nalgebra::Cholesky::new(cbm_correlation(d, alpha))
        .map(|c| Some(c.unpack()))
        .ok_or_else(|| Error::CholeskyFailure(format!("correlation alpha = {alpha} is not positive definite")))
}

impl CorrelatedBm {
    pub fn new(config: &CorrelatedBmConfig) -> Result<Self> {
        if config.d < 1 {
            return Err(Error::DimensionTooSmall(config.d));
        }
        let drift = config.drift.clone().unwrap_or_else(|| vec![0.0; config.d]);
        if drift.len() != config.d {
            return Err(Error::InvalidParams(format!(
                "drift has length {}, expected {}",
                drift.len(),
                config.d
            )));
        }
        let params = ParamVector::new(vec![
            ParamEntry::new("alpha", config.alpha, Transform::Identity, ParamKind::Fixed),
            ParamEntry::new("obs_sd", config.obs_sd, Transform::Log, ParamKind::Regular),
            ParamEntry::new("x0", config.x0, Transform::Identity, ParamKind::Ivp),
        ])?;
        let chol = cholesky_of(config.d, config.alpha)?;
        Ok(CorrelatedBm {
            d: config.d,
            drift,
            params,
            base_alpha: config.alpha,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Exact forecast guide with full covariance tau A + obs_sd^2 I over the
    /// given observation indices (1-based) from `x` at `t_now`.
    pub fn guide_exact(
        &self,
        theta: &[f64],
        x: &[f64],
        t_now: f64,
        horizons: &[(usize, f64)],
        data: &ObsSeries,
    ) -> Result<f64> {
        self.guide_with(theta, x, t_now, horizons, data, Covariance::Exact)
    }

    /// As [`CorrelatedBm::guide_exact`] with the off-diagonal covariance dropped.
    pub fn guide_diag(
        &self,
        theta: &[f64],
        x: &[f64],
        t_now: f64,
        horizons: &[(usize, f64)],
        data: &ObsSeries,
    ) -> Result<f64> {
        self.guide_with(theta, x, t_now, horizons, data, Covariance::Diagonal)
    }

    fn guide_with(
        &self,
        theta: &[f64],
        x: &[f64],
        t_now: f64,
        horizons: &[(usize, f64)],
        data: &ObsSeries,
        covariance: Covariance,
    ) -> Result<f64> {
        let spec = self.lg_spec(theta)?;
        horizons.iter().try_fold(0.0, |acc, &(k, t)| {
            Ok(acc + gaussian_forecast_logdensity(&spec, x, &data[k - 1], t - t_now, covariance)?)
        })
    }

    fn lg_spec(&self, theta: &[f64]) -> Result<LinearGaussianSpec> {
        let alpha = theta[ALPHA];
        if !(alpha > -1.0 / (self.d.max(2) - 1) as f64 && alpha < 1.0) {
            return Err(Error::CholeskyFailure(format!(
                "alpha = {alpha} outside the positive definite range"
            )));
        }
        let r = theta[OBS_SD] * theta[OBS_SD];
        Ok(LinearGaussianSpec {
            drift: DVector::from_column_slice(&self.drift),
            q_rate: cbm_correlation(self.d, alpha),
            obs_cov: DMatrix::identity(self.d, self.d) * r,
            init_mean: DVector::from_element(self.d, theta[X0]),
            init_cov: DMatrix::zeros(self.d, self.d),
        })
    }
}

impl Model for CorrelatedBm {
    fn name(&self) -> &str {
        "correlated_bm"
    }

    fn dim_latent(&self) -> usize {
        self.d
    }

    fn dim_obs(&self) -> usize {
        self.d
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn init_sample(&self, theta: &[f64], x: &mut [f64], _rng: &mut SimRng) -> Result<()> {
        x.fill(theta[X0]);
        Ok(())
    }

    fn transition(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64], rng: &mut SimRng) -> Result<()> {
        let dt = t_to - t_from;
        if dt == 0.0 {
            return Ok(());
        }
        let sd = dt.sqrt();
        let z: Vec<f64> = (0..self.d).map(|_| StandardNormal.sample(rng)).collect();
        let local;
        let chol = if theta[ALPHA] == self.base_alpha {
            &self.chol
        } else {
            local = cholesky_of(self.d, theta[ALPHA])?;
            &local
        };
        match chol {
            None => {
                for i in 0..self.d {
                    x[i] += self.drift[i] * dt + sd * z[i];
                }
            }
            Some(l) => {
                for i in 0..self.d {
                    let mut acc = 0.0;
                    for (k, zk) in z.iter().enumerate().take(i + 1) {
                        acc += l[(i, k)] * zk;
                    }
                    x[i] += self.drift[i] * dt + sd * acc;
                }
            }
        }
        Ok(())
    }

    fn skeleton(&self, _theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64]) -> Result<()> {
        let dt = t_to - t_from;
        for (xi, b) in x.iter_mut().zip(&self.drift) {
            *xi += b * dt;
        }
        Ok(())
    }

    fn measurement_logdensity(&self, theta: &[f64], _k: usize, y: &[f64], x: &[f64]) -> Result<f64> {
        let sd = theta[OBS_SD];
        let var = sd * sd;
        let mut sum = 0.0;
        for i in 0..self.d {
            if !y[i].is_nan() {
                let r = y[i] - x[i];
                sum += r * r;
            }
        }
        let m = y.iter().filter(|v| !v.is_nan()).count() as f64;
        Ok(-0.5 * (m * (crate::stats::LN_2PI + var.ln()) + sum / var))
    }

    fn measurement_sample(&self, theta: &[f64], _k: usize, x: &[f64], y: &mut [f64], rng: &mut SimRng) -> Result<()> {
        for i in 0..self.d {
            let z: f64 = StandardNormal.sample(rng);
            y[i] = x[i] + theta[OBS_SD] * z;
        }
        Ok(())
    }

    fn measurement_moments(&self, theta: &[f64], _k: usize, x: &[f64], mean: &mut [f64], var: &mut [f64]) {
        mean.copy_from_slice(x);
        var.fill(theta[OBS_SD] * theta[OBS_SD]);
    }

    fn linear_gaussian(&self, theta: &[f64]) -> Option<LinearGaussianSpec> {
        self.lg_spec(theta).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn model(d: usize, alpha: f64) -> CorrelatedBm {
        CorrelatedBm::new(&CorrelatedBmConfig {
            d,
            alpha,
            obs_sd: 1.0,
            drift: None,
            x0: 0.0,
        })
        .unwrap()
    }

    fn increments(m: &CorrelatedBm, count: usize) -> Vec<Vec<f64>> {
        let theta = m.params().values();
        let s = RngStream::new(5);
        (0..count)
            .map(|r| {
                let mut x = vec![0.0; m.dim()];
                m.transition(&theta, 0.0, 1.0, &mut x, &mut s.child(r as u64).rng())
                    .unwrap();
                x
            })
            .collect()
    }

    #[test]
    fn zero_interval_is_identity() {
        let m = model(3, 0.5);
        let mut x = vec![1.0, 2.0, 3.0];
        m.transition(&m.params().values(), 2.0, 2.0, &mut x, &mut RngStream::new(1).rng())
            .unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn independent_increments_have_unit_covariance() {
        let inc = increments(&model(2, 0.0), 10_000);
        let n = inc.len() as f64;
        let c = |a: usize, b: usize| inc.iter().map(|x| x[a] * x[b]).sum::<f64>() / n;
        assert!((c(0, 0) - 1.0).abs() < 0.05);
        assert!((c(1, 1) - 1.0).abs() < 0.05);
        assert!(c(0, 1).abs() < 0.05);
    }

    #[test]
    fn correlated_increments() {
        let inc = increments(&model(2, 0.5), 10_000);
        let n = inc.len() as f64;
        let m0 = inc.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = inc.iter().map(|x| x[1]).sum::<f64>() / n;
        let c = |a: usize, ma: f64, b: usize, mb: f64| inc.iter().map(|x| (x[a] - ma) * (x[b] - mb)).sum::<f64>() / n;
        let rho = c(0, m0, 1, m1) / (c(0, m0, 0, m0) * c(1, m1, 1, m1)).sqrt();
        assert!((rho - 0.5).abs() < 0.03, "{rho}");
    }

    #[test]
    fn guide_examples() {
        let m = model(1, 0.0);
        let theta = m.params().values();
        let data = vec![vec![0.0]];
        let v = m.guide_exact(&theta, &[0.0], 0.0, &[(1, 1.0)], &data).unwrap();
        assert_abs_diff_eq!(v, -0.5 * (4.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
        assert_eq!(v, m.guide_diag(&theta, &[0.0], 0.0, &[(1, 1.0)], &data).unwrap());

        let m = model(2, 0.5);
        let theta = m.params().values();
        let data = vec![vec![1.0, 1.0]];
        let exact = m.guide_exact(&theta, &[0.0, 0.0], 0.0, &[(1, 1.0)], &data).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * 3.75f64.ln() - 1.5 / 3.75;
        assert_abs_diff_eq!(exact, expected, epsilon = 1e-13);
        assert!((m.guide_diag(&theta, &[0.0, 0.0], 0.0, &[(1, 1.0)], &data).unwrap() - exact).abs() > 1e-3);

        let m = model(10, 0.5);
        let theta = m.params().values();
        let data = vec![vec![1.0; 10]];
        let diag = m.guide_diag(&theta, &[0.0; 10], 0.0, &[(1, 1.0)], &data).unwrap();
        assert_abs_diff_eq!(diag, 10.0 * crate::stats::normal_logpdf(1.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_positive_definite_alpha() {
        assert!(matches!(
            CorrelatedBm::new(&CorrelatedBmConfig {
                d: 3,
                alpha: 1.0,
                obs_sd: 1.0,
                drift: None,
                x0: 0.0
            }),
            Err(Error::CholeskyFailure(_))
        ));
    }
}
