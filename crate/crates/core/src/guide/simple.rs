use super::Guide;
use crate::error::Result;
use crate::grid::{GridStep, TimeGrid};
use crate::model::{Model, ObsSeries};

/// u_{t_n} = g_n(y_n | x). With one step per interval GIRF reduces to the
/// bootstrap particle filter.
pub struct BootstrapGuide<'a, M: ?Sized> {
    model: &'a M,
    data: &'a ObsSeries,
}

impl<'a, M: Model + ?Sized> BootstrapGuide<'a, M> {
    pub fn new(model: &'a M, data: &'a ObsSeries) -> Self {
        BootstrapGuide { model, data }
    }
}

impl<M: Model + ?Sized> Guide for BootstrapGuide<'_, M> {
    fn log_value(&self, theta: &[f64], step: &GridStep, x: &[f64], _cache: &[f64]) -> Result<f64> {
        self.model.measurement_logdensity(theta, step.n, &self.data[step.n], x)
    }

    fn required_steps(&self) -> Option<usize> {
        Some(1)
    }
}

/// u_{t_n} = g_n(y_n | x) g_{n+1}(y_{n+1} | mu_{t_{n+1}}(x)) with mu the
/// deterministic skeleton; the lookahead factor is dropped at t_N.
pub struct ApfGuide<'a, M: ?Sized> {
    model: &'a M,
    grid: &'a TimeGrid,
    data: &'a ObsSeries,
}

impl<'a, M: Model + ?Sized> ApfGuide<'a, M> {
    pub fn new(model: &'a M, grid: &'a TimeGrid, data: &'a ObsSeries) -> Self {
        ApfGuide { model, grid, data }
    }
}

impl<M: Model + ?Sized> Guide for ApfGuide<'_, M> {
    fn log_value(&self, theta: &[f64], step: &GridStep, x: &[f64], _cache: &[f64]) -> Result<f64> {
        let k = step.n;
        let mut total = self.model.measurement_logdensity(theta, k, &self.data[k], x)?;
        if k + 1 < self.grid.num_obs() {
            let mut z = x.to_vec();
            self.model.reset_after_observation(&mut z);
            self.model
                .skeleton(theta, self.grid.obs_time(k + 1), self.grid.obs_time(k + 2), &mut z)?;
            total += self.model.measurement_logdensity(theta, k + 1, &self.data[k + 1], &z)?;
        }
        Ok(total)
    }

    fn required_steps(&self) -> Option<usize> {
        Some(1)
    }
}
