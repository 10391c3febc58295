use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{schedule_power, Guide, PowerSchedule};
use crate::error::{Error, Result};
use crate::grid::{GridStep, TimeGrid};
use crate::model::{Model, ObsSeries};
use crate::oracles::LinearGaussianSpec;
use crate::stats::LN_2PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// Full forecast covariance tau A + R.
    #[default]
    Exact,
    /// Off-diagonal elements of the forecast covariance ignored.
    Diagonal,
}

#[derive(Debug, Clone)]
enum Factor {
    /// Per-coordinate variances.
    Diagonal { var: Vec<f64>, log_norm: f64 },
    /// Lower Cholesky factor and -0.5 (d ln 2pi + ln det).
    Full {
        chol: Cholesky<f64, nalgebra::Dyn>,
        log_norm: f64,
    },
}

impl Factor {
    fn new(spec: &LinearGaussianSpec, tau: f64, covariance: Covariance) -> Result<Factor> {
        let d = spec.dim();
        let is_diag = |m: &DMatrix<f64>| (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == 0.0));
        if covariance == Covariance::Diagonal || (is_diag(&spec.q_rate) && is_diag(&spec.obs_cov)) {
            let var: Vec<f64> = (0..d)
                .map(|i| tau * spec.q_rate[(i, i)] + spec.obs_cov[(i, i)])
                .collect();
            if var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::CholeskyFailure("non-positive forecast variance".into()));
            }
            let log_norm = -0.5 * (d as f64 * LN_2PI + var.iter().map(|v| v.ln()).sum::<f64>());
            return Ok(Factor::Diagonal { var, log_norm });
        }
        let cov = &spec.q_rate * tau + &spec.obs_cov;
        let chol = Cholesky::new(cov).ok_or_else(|| {
            Error::CholeskyFailure(format!("forecast covariance at horizon {tau} is not positive definite"))
        })?;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Factor::Full {
            chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + logdet),
        })
    }

    fn logdensity(&self, resid: &mut DVector<f64>) -> f64 {
        match self {
            Factor::Diagonal { var, log_norm } => {
                log_norm - 0.5 * resid.iter().zip(var).map(|(r, v)| r * r / v).sum::<f64>()
            }
            Factor::Full { chol, log_norm } => {
                chol.l_dirty().solve_lower_triangular_mut(resid);
                log_norm - 0.5 * resid.norm_squared()
            }
        }
    }
}

/// Log density of y under the Gaussian forecast of a linear-Gaussian model
/// started at `x` with horizon `tau`: N(x + drift tau, tau A + R).
pub fn gaussian_forecast_logdensity(
    spec: &LinearGaussianSpec,
    x: &[f64],
    y: &[f64],
    tau: f64,
    covariance: Covariance,
) -> Result<f64> {
    let factor = Factor::new(spec, tau, covariance)?;
    let mut resid = DVector::from_iterator(x.len(), (0..x.len()).map(|i| y[i] - x[i] - spec.drift[i] * tau));
    Ok(factor.logdensity(&mut resid))
}

/// Guide built from the analytic forecast likelihood of a linear-Gaussian
/// model. Covariance factors are precomputed for every horizon that occurs on
/// the grid at the construction parameters.
pub struct GaussianForecastGuide<'a, M: ?Sized> {
    model: &'a M,
    grid: &'a TimeGrid,
    data: &'a ObsSeries,
    lookahead: usize,
    covariance: Covariance,
    schedule: PowerSchedule,
    base_theta: Vec<f64>,
    base_spec: LinearGaussianSpec,
    factors: HashMap<u64, Factor>,
}

impl<'a, M: Model + ?Sized> GaussianForecastGuide<'a, M> {
    pub fn new(
        model: &'a M,
        theta: &[f64],
        grid: &'a TimeGrid,
        data: &'a ObsSeries,
        lookahead: usize,
        covariance: Covariance,
        schedule: PowerSchedule,
    ) -> Result<Self> {
        let base_spec = model
            .linear_gaussian(theta)
            .ok_or_else(|| Error::Config(format!("model `{}` has no exact Gaussian forecast", model.name())))?;
        let mut factors = HashMap::new();
        for step in grid.steps_iter() {
            for b in 1..=lookahead.min(grid.num_obs() - step.n) {
                if b == 1 && step.s == grid.steps() {
                    continue;
                }
                let tau = grid.obs_time(step.n + b) - step.t_now;
                if let std::collections::hash_map::Entry::Vacant(e) = factors.entry(tau.to_bits()) {
                    e.insert(Factor::new(&base_spec, tau, covariance)?);
                }
            }
        }
        Ok(GaussianForecastGuide {
            model,
            grid,
            data,
            lookahead,
            covariance,
            schedule,
            base_theta: theta.to_vec(),
            base_spec,
            factors,
        })
    }
}

impl<M: Model + ?Sized> Guide for GaussianForecastGuide<'_, M> {
    fn log_value(&self, theta: &[f64], step: &GridStep, x: &[f64], _cache: &[f64]) -> Result<f64> {
        let n = step.n;
        let at_obs = step.s == self.grid.steps();
        let local_spec;
        let spec = if theta == self.base_theta.as_slice() {
            &self.base_spec
        } else {
            local_spec = self
                .model
                .linear_gaussian(theta)
                .ok_or_else(|| Error::Config("linear-Gaussian description unavailable".into()))?;
            &local_spec
        };
        let use_cache = std::ptr::eq(spec, &self.base_spec);
        let d = x.len();
        let mut resid = DVector::zeros(d);
        let mut total = 0.0;
        for b in 1..=self.lookahead.min(self.grid.num_obs() - n) {
            if b == 1 && at_obs {
                total += self.model.measurement_logdensity(theta, n, &self.data[n], x)?;
                continue;
            }
            let target = n + b;
            let eta = schedule_power(self.schedule, self.grid, step.t_now, target, self.lookahead);
            if eta == 0.0 {
                continue;
            }
            let tau = self.grid.obs_time(target) - step.t_now;
            let y = &self.data[target - 1];
            for i in 0..d {
                resid[i] = y[i] - x[i] - spec.drift[i] * tau;
            }
            let value = match (use_cache, self.factors.get(&tau.to_bits())) {
                (true, Some(f)) => f.logdensity(&mut resid),
                _ => Factor::new(spec, tau, self.covariance)?.logdensity(&mut resid),
            };
            total += eta * value;
        }
        if total.is_nan() {
            return Err(Error::NonFiniteGuide { grid_index: step.index });
        }
        Ok(total)
    }
}
