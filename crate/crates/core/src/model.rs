//! The plug-and-play model contract shared by every filter.
//!
//! Models only need to simulate latent transitions; the transition density
//! is never evaluated. Parameters reach every callback as a slice of
//! natural-scale values ordered like the model's [`ParamVector`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::oracles::LinearGaussianSpec;
use crate::params::ParamVector;
use crate::rng::{purpose, RngStream, SimRng};
use crate::stats;

/// Observations y_1..y_N, one vector of length `dim_obs` per time.
pub type ObsSeries = Vec<Vec<f64>>;

/// Per-coordinate measurement family used to build approximate guides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementFamily {
    /// Gaussian with the given mean and variance; variability is estimated
    /// by the sample variance of random forecasts.
    Gaussian,
    /// Normal cdf discretized on the integers; variability is estimated from
    /// the inter-quartile distance of random forecasts.
    DiscreteNormal,
}

impl MeasurementFamily {
    /// log of the family density at `y` given centre `mean` and variability `var`.
    /// Missing observations (NaN) contribute zero.
    pub fn logdensity(self, y: f64, mean: f64, var: f64) -> f64 {
        if y.is_nan() {
            return 0.0;
        }
        match self {
            MeasurementFamily::Gaussian => stats::normal_logpdf(y, mean, var),
            MeasurementFamily::DiscreteNormal => stats::discrete_normal_logpmf(y, mean, var),
        }
    }
}

pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn dim_latent(&self) -> usize;

    fn dim_obs(&self) -> usize;

    /// Default parameters; also fixes the order of the `theta` slices.
    fn params(&self) -> &ParamVector;

    fn init_sample(&self, theta: &[f64], x: &mut [f64], rng: &mut SimRng) -> Result<()>;

    /// Advances `x` from `t_from` to `t_to` by simulation.
    fn transition(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64], rng: &mut SimRng) -> Result<()>;

    /// Deterministic forecast of the latent state from `t_from` to `t_to`.
    fn skeleton(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64]) -> Result<()>;

    /// log g(y_k | x) for the `k`-th observation (0-based).
    fn measurement_logdensity(&self, theta: &[f64], k: usize, y: &[f64], x: &[f64]) -> Result<f64>;

    fn measurement_sample(&self, theta: &[f64], k: usize, x: &[f64], y: &mut [f64], rng: &mut SimRng) -> Result<()>;

    /// Mean and variance of each observed coordinate given the latent state.
    fn measurement_moments(&self, theta: &[f64], k: usize, x: &[f64], mean: &mut [f64], var: &mut [f64]);

    fn measurement_family(&self) -> MeasurementFamily {
        MeasurementFamily::Gaussian
    }

    /// Called once a trajectory moves past an observation time, for models
    /// whose state accumulates quantities over an observation interval.
    fn reset_after_observation(&self, _x: &mut [f64]) {}

    /// Exact linear-Gaussian description, for models that have one.
    fn linear_gaussian(&self, _theta: &[f64]) -> Option<LinearGaussianSpec> {
        None
    }
}

/// Latent path at every grid time together with simulated observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observations: ObsSeries,
}

impl Simulation {
    /// Latent states at the observation times t_1..t_N.
    pub fn states_at_observations(&self, grid: &TimeGrid) -> Vec<Vec<f64>> {
        (1..=grid.num_obs())
            .map(|n| self.states[n * grid.steps()].clone())
            .collect()
    }
}

/// Simulates the latent process over the grid and draws y_n at each t_n.
pub fn simulate_pomp<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    grid: &TimeGrid,
    rng: RngStream,
) -> Result<Simulation> {
    if !params.same_structure(model.params()) {
        return Err(Error::InvalidParams(format!(
            "parameters do not match the schema of model `{}`",
            model.name()
        )));
    }
    let theta = params.values();
    let d = model.dim_latent();
    let mut x = vec![0.0; d];
    model.init_sample(&theta, &mut x, &mut rng.child(purpose::INIT).rng())?;
    let mut states = Vec::with_capacity(grid.len());
    let mut observations = Vec::with_capacity(grid.num_obs());
    states.push(x.clone());
    let sim = rng.child(purpose::SIMULATE);
    for step in grid.steps_iter() {
        if step.leaves_observation() {
            model.reset_after_observation(&mut x);
        }
        model.transition(
            &theta,
            step.t_prev,
            step.t_now,
            &mut x,
            &mut sim.child(step.index as u64).rng(),
        )?;
        if let Some(n) = grid.observation_index(step.index) {
            let mut y = vec![0.0; model.dim_obs()];
            let mut r = rng.child(purpose::MEASURE).child(n as u64).rng();
            model.measurement_sample(&theta, n - 1, &x, &mut y, &mut r)?;
            observations.push(y);
        }
        states.push(x.clone());
    }
    Ok(Simulation {
        times: grid.times().to_vec(),
        states,
        observations,
    })
}

pub(crate) fn check_data<M: Model + ?Sized>(model: &M, grid: &TimeGrid, data: &ObsSeries) -> Result<()> {
    if data.len() != grid.num_obs() {
        return Err(Error::DataMismatch(format!(
            "{} observations for a grid with {} observation times",
            data.len(),
            grid.num_obs()
        )));
    }
    if let Some(bad) = data.iter().position(|y| y.len() != model.dim_obs()) {
        return Err(Error::DataMismatch(format!(
            "observation {} has length {}, model expects {}",
            bad + 1,
            data[bad].len(),
            model.dim_obs()
        )));
    }
    Ok(())
}
