//! Stochastic Lorenz-96 system with additive Gaussian noise, discretized by
//! Euler-Maruyama.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::{ParamEntry, ParamKind, ParamVector, Transform};
use crate::rng::SimRng;

const F: usize = 0;
const SIGMA_P: usize = 1;
const SIGMA_M: usize = 2;

/// Magnitude beyond which a trajectory is treated as diverged.
pub const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkeletonMethod {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lorenz96Config {
    pub d: usize,
    #[serde(rename = "F", default = "forcing")]
    pub forcing: f64,
    #[serde(default = "unit")]
    pub sigma_p: f64,
    #[serde(default = "unit")]
    pub sigma_m: f64,
    /// Nominal Euler step; each transition uses the largest step not
    /// exceeding it that divides the interval evenly.
    #[serde(default = "euler_dt")]
    pub euler_dt: f64,
    #[serde(default)]
    pub skeleton: SkeletonMethod,
}

impl Lorenz96Config {
    /// Dimension `d` with F = 8, unit noise and Euler step 0.01.
    pub fn new(d: usize) -> Self {
        Lorenz96Config {
            d,
            forcing: forcing(),
            sigma_p: unit(),
            sigma_m: unit(),
            euler_dt: euler_dt(),
            skeleton: SkeletonMethod::default(),
        }
    }
}

fn forcing() -> f64 {
    8.0
}

fn unit() -> f64 {
    1.0
}

fn euler_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone)]
pub struct Lorenz96 {
    d: usize,
    euler_dt: f64,
    skeleton: SkeletonMethod,
    params: ParamVector,
}

/// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices.
pub fn lorenz_drift(x: &[f64], forcing: f64, out: &mut [f64]) -> Result<()> {
    let d = x.len();
    if d < 4 {
        return Err(Error::DimensionTooSmall(d));
    }
    for i in 0..d {
        let ip1 = x[(i + 1) % d];
        let im1 = x[(i + d - 1) % d];
        let im2 = x[(i + d - 2) % d];
        out[i] = (ip1 - im2) * im1 - x[i] + forcing;
    }
    Ok(())
}

impl Lorenz96 {
    pub fn new(config: &Lorenz96Config) -> Result<Self> {
        if config.d < 4 {
            return Err(Error::DimensionTooSmall(config.d));
        }
        if !(config.euler_dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "euler_dt must be positive, got {}",
                config.euler_dt
            )));
        }
        let params = ParamVector::new(vec![
            ParamEntry::new("F", config.forcing, Transform::Identity, ParamKind::Regular),
            ParamEntry::new("sigma_p", config.sigma_p, Transform::Log, ParamKind::Regular),
            ParamEntry::new("sigma_m", config.sigma_m, Transform::Log, ParamKind::Regular),
        ])?;
        Ok(Lorenz96 {
            d: config.d,
            euler_dt: config.euler_dt,
            skeleton: config.skeleton,
            params,
        })
    }

    /// Number of equal Euler steps used to cover an interval of length `len`.
    pub fn euler_steps(&self, len: f64) -> usize {
        ((len / self.euler_dt) - 1e-9).ceil().max(1.0) as usize
    }

    fn check(x: &[f64]) -> Result<()> {
        if x.iter().all(|v| v.abs() <= BLOW_UP) {
            Ok(())
        } else {
            Err(Error::NonFiniteState)
        }
    }

    fn rk4(&self, forcing: f64, h: f64, x: &mut [f64]) {
        let d = self.d;
        let mut k1 = vec![0.0; d];
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let _ = lorenz_drift(x, forcing, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        let _ = lorenz_drift(&tmp, forcing, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        let _ = lorenz_drift(&tmp, forcing, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        let _ = lorenz_drift(&tmp, forcing, &mut k4);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

impl Model for Lorenz96 {
    fn name(&self) -> &str {
        "lorenz96"
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

    fn init_sample(&self, _theta: &[f64], x: &mut [f64], _rng: &mut SimRng) -> Result<()> {
        x.fill(0.0);
        x[self.d - 1] = 0.01;
        Ok(())
    }

    fn transition(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64], rng: &mut SimRng) -> Result<()> {
        let len = t_to - t_from;
        if len == 0.0 {
            return Ok(());
        }
        let steps = self.euler_steps(len);
        let h = len / steps as f64;
        let noise = theta[SIGMA_P] * h.sqrt();
        let mut f = vec![0.0; self.d];
        for _ in 0..steps {
            lorenz_drift(x, theta[F], &mut f)?;
            for i in 0..self.d {
                let z: f64 = StandardNormal.sample(rng);
                x[i] += f[i] * h + noise * z;
            }
        }
        Self::check(x)
    }

    fn skeleton(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64]) -> Result<()> {
        let len = t_to - t_from;
        if len == 0.0 {
            return Ok(());
        }
        let steps = self.euler_steps(len);
        let h = len / steps as f64;
        let mut f = vec![0.0; self.d];
        for _ in 0..steps {
            match self.skeleton {
                SkeletonMethod::Euler => {
                    lorenz_drift(x, theta[F], &mut f)?;
                    for i in 0..self.d {
                        x[i] += f[i] * h;
                    }
                }
                SkeletonMethod::Rk4 => self.rk4(theta[F], h, x),
            }
        }
        Self::check(x)
    }

    fn measurement_logdensity(&self, theta: &[f64], _k: usize, y: &[f64], x: &[f64]) -> Result<f64> {
        let var = theta[SIGMA_M] * theta[SIGMA_M];
        let mut sum = 0.0;
        let mut m = 0.0;
        for i in 0..self.d {
            if !y[i].is_nan() {
                let r = y[i] - x[i];
                sum += r * r;
                m += 1.0;
            }
        }
        Ok(-0.5 * (m * (crate::stats::LN_2PI + var.ln()) + sum / var))
    }

    fn measurement_sample(&self, theta: &[f64], _k: usize, x: &[f64], y: &mut [f64], rng: &mut SimRng) -> Result<()> {
        for i in 0..self.d {
            let z: f64 = StandardNormal.sample(rng);
            y[i] = x[i] + theta[SIGMA_M] * z;
        }
        Ok(())
    }

    fn measurement_moments(&self, theta: &[f64], _k: usize, x: &[f64], mean: &mut [f64], var: &mut [f64]) {
        mean.copy_from_slice(x);
        var.fill(theta[SIGMA_M] * theta[SIGMA_M]);
    }
}
