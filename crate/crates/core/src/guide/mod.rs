//! Guide functions u_t approximating the forecast likelihood of upcoming
//! observations.
//!
//! A guide is evaluated at every propagated particle. Guides that need
//! simulation-based variability estimates keep a per-particle cache that is
//! rebuilt at refresh steps and inherited through resampling otherwise.

mod gaussian;
mod lookahead;
mod simple;

pub use gaussian::{gaussian_forecast_logdensity, Covariance, GaussianForecastGuide};
pub use lookahead::{
    forecast_moments, guide_value, rescale_variability, ForecastCache, LookaheadGuide, LookaheadSpec, RefreshPolicy,
    VariabilityEstimator,
};
pub use simple::{ApfGuide, BootstrapGuide};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{GridStep, TimeGrid};
use crate::model::{Model, ObsSeries};
use crate::rng::RngStream;

pub trait Guide: Send + Sync {
    /// Floats of per-particle cache.
    fn cache_len(&self) -> usize {
        0
    }

    /// Whether the cache is rebuilt for particles propagated to `step`.
    fn refreshes_at(&self, _step: &GridStep) -> bool {
        false
    }

    fn fill_cache(
        &self,
        _theta: &[f64],
        _step: &GridStep,
        _x: &[f64],
        _cache: &mut [f64],
        _rng: RngStream,
    ) -> Result<()> {
        Ok(())
    }

    /// log u_{t}(x) at the destination time of `step`.
    fn log_value(&self, theta: &[f64], step: &GridStep, x: &[f64], cache: &[f64]) -> Result<f64>;

    /// Number of intermediate steps the guide requires, if it pins one.
    fn required_steps(&self) -> Option<usize> {
        None
    }
}

/// Fractional power schedule for the lookahead factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerSchedule {
    /// eta grows linearly with elapsed time over the lookahead window.
    #[default]
    LinearFraction,
    /// Every factor enters with power one.
    AllOnes,
}

/// Guide selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuideSpec {
    /// u_{t_n} = g_n; forces S = 1.
    Bootstrap,
    /// u_{t_n} = g_n(y_n | x) g_{n+1}(y_{n+1} | mu(x)); forces S = 1.
    Apf,
    /// Simulation-based guide from skeleton forecasts and forecast variability.
    Lookahead(LookaheadSpec),
    /// Analytic Gaussian forecast likelihood for linear-Gaussian models.
    ExactGaussian {
        #[serde(rename = "B")]
        lookahead: usize,
        #[serde(default)]
        covariance: Covariance,
        #[serde(default = "all_ones")]
        power_schedule: PowerSchedule,
    },
}

fn all_ones() -> PowerSchedule {
    PowerSchedule::AllOnes
}

impl GuideSpec {
    pub fn exact_gaussian(lookahead: usize, covariance: Covariance) -> Self {
        GuideSpec::ExactGaussian {
            lookahead,
            covariance,
            power_schedule: PowerSchedule::AllOnes,
        }
    }

    /// Intermediate steps forced by this guide, if any.
    pub fn required_steps(&self) -> Option<usize> {
        match self {
            GuideSpec::Bootstrap | GuideSpec::Apf => Some(1),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        match self {
            GuideSpec::Lookahead(spec) => spec.validate(),
            GuideSpec::ExactGaussian { lookahead, .. } if *lookahead < 1 => {
                Err(Error::Config("guide lookahead B must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the guide for a model, grid and data set.
    pub fn build<'a, M: Model + ?Sized>(
        &self,
        model: &'a M,
        theta: &[f64],
        grid: &'a TimeGrid,
        data: &'a ObsSeries,
    ) -> Result<Box<dyn Guide + 'a>> {
        self.validate()?;
        Ok(match self {
            GuideSpec::Bootstrap => Box::new(BootstrapGuide::new(model, data)),
            GuideSpec::Apf => Box::new(ApfGuide::new(model, grid, data)),
            GuideSpec::Lookahead(spec) => Box::new(LookaheadGuide::new(model, grid, data, spec.clone())),
            GuideSpec::ExactGaussian {
                lookahead,
                covariance,
                power_schedule,
            } => Box::new(GaussianForecastGuide::new(
                model,
                theta,
                grid,
                data,
                *lookahead,
                *covariance,
                *power_schedule,
            )?),
        })
    }
}

/// Fractional power for the factor targeting observation `target` (1-based)
/// evaluated at `t_now`:
/// eta = 1 - (t_target - t_now) / (t_target - t_{max(target - B, 0)}).
pub fn lookahead_power(grid: &TimeGrid, t_now: f64, target: usize, lookahead: usize) -> f64 {
    let t_target = grid.obs_time(target);
    let t_start = grid.obs_time(target.saturating_sub(lookahead));
    let eta = 1.0 - (t_target - t_now) / (t_target - t_start);
    eta.clamp(0.0, 1.0)
}

pub(crate) fn schedule_power(
    schedule: PowerSchedule,
    grid: &TimeGrid,
    t_now: f64,
    target: usize,
    lookahead: usize,
) -> f64 {
    match schedule {
        PowerSchedule::AllOnes => 1.0,
        PowerSchedule::LinearFraction => lookahead_power(grid, t_now, target, lookahead),
    }
}

/// Anchor time of forecast caches for the interval holding `step`.
pub(crate) fn anchor_time(grid: &TimeGrid, step: &GridStep, policy: RefreshPolicy) -> f64 {
    match policy {
        RefreshPolicy::EveryS1 => grid.time(step.n, 1),
        RefreshPolicy::EveryStep => step.t_now,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_time_grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn power_examples() {
        let g = build_time_grid(0.0, &[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(lookahead_power(&g, 3.0, 3, 2), 1.0);
        assert_eq!(lookahead_power(&g, 1.0, 2, 1), 0.0);
        assert_abs_diff_eq!(lookahead_power(&g, 1.5, 3, 2), 0.25, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn power_non_decreasing_along_grid(steps in 1usize..8, b in 1usize..4, target in 1usize..6) {
            let obs: Vec<f64> = (1..=6).map(|i| i as f64 * 0.7).collect();
            let g = build_time_grid(0.0, &obs, steps).unwrap();
            let lo = target.saturating_sub(b);
            let mut last = -1.0;
            for k in lo * steps..=target * steps {
                let eta = lookahead_power(&g, g.times()[k], target, b);
                prop_assert!(eta >= last);
                prop_assert!((0.0..=1.0).contains(&eta));
                last = eta;
            }
            prop_assert_eq!(last, 1.0);
        }
    }
}
