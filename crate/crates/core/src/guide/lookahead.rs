use serde::{Deserialize, Serialize};

use super::{anchor_time, schedule_power, Guide, PowerSchedule};
use crate::error::{Error, Result};
use crate::grid::{GridStep, TimeGrid};
use crate::model::{MeasurementFamily, Model, ObsSeries};
use crate::rng::RngStream;
use crate::stats::{mean, quantile_sorted, sample_variance};

/// Floor added to every forecast variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshPolicy {
    #[default]
    EveryS1,
    EveryStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariabilityEstimator {
    SampleVariance,
    /// 0.55 times the squared, inflated inter-quartile distance.
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookaheadSpec {
    #[serde(rename = "B")]
    pub lookahead: usize,
    #[serde(default)]
    pub power_schedule: PowerSchedule,
    pub n_variability_sims: usize,
    #[serde(default)]
    pub refresh_policy: RefreshPolicy,
    /// Inter-quartile inflation; defaults to 1 + 2 / sqrt(n_variability_sims).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_inflation: Option<f64>,
    /// Defaults to the sample variance for Gaussian measurements and the
    /// quantile estimator otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variability: Option<VariabilityEstimator>,
}

impl LookaheadSpec {
    pub fn new(lookahead: usize, n_variability_sims: usize) -> Self {
        LookaheadSpec {
            lookahead,
            power_schedule: PowerSchedule::LinearFraction,
            n_variability_sims,
            refresh_policy: RefreshPolicy::EveryS1,
            variance_inflation: None,
            variability: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead < 1 {
            return Err(Error::Config("guide lookahead B must be at least 1".into()));
        }
        if self.n_variability_sims < 2 {
            return Err(Error::Config("n_variability_sims must be at least 2".into()));
        }
        if let Some(f) = self.variance_inflation {
            if !(f >= 1.0) {
                return Err(Error::Config(format!("variance_inflation must be >= 1, got {f}")));
            }
        }
        Ok(())
    }

    pub fn inflation(&self) -> f64 {
        self.variance_inflation
            .unwrap_or(1.0 + 2.0 / (self.n_variability_sims as f64).sqrt())
    }

    fn estimator(&self, family: MeasurementFamily) -> VariabilityEstimator {
        self.variability.unwrap_or(match family {
            MeasurementFamily::Gaussian => VariabilityEstimator::SampleVariance,
            MeasurementFamily::DiscreteNormal => VariabilityEstimator::Quantile,
        })
    }
}

/// Forecasts of the measurement mean for one particle at the upcoming
/// observation times, with forecast variability estimated at `anchor_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastCache {
    pub anchor_time: f64,
    /// Observation indices (1-based) of the horizons.
    pub targets: Vec<usize>,
    pub horizons: Vec<f64>,
    /// Measurement mean at the skeleton forecast, per horizon.
    pub mean: Vec<Vec<f64>>,
    /// Measurement variance at the skeleton forecast, per horizon.
    pub obs_var: Vec<Vec<f64>>,
    /// Per-coordinate forecast variability, per horizon.
    pub xi: Vec<Vec<f64>>,
}

fn horizon_count(grid: &TimeGrid, n: usize, lookahead: usize) -> usize {
    lookahead.min(grid.num_obs() - n)
}

/// Chains skeleton steps from `x` at `t_now` through observations
/// `n+1..=n+count`, applying the post-observation reset between horizons.
fn skeleton_chain<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    grid: &TimeGrid,
    n: usize,
    count: usize,
    t_now: f64,
    x: &[f64],
    mut visit: impl FnMut(usize, &[f64], &[f64]) -> Result<()>,
) -> Result<()> {
    let dobs = model.dim_obs();
    let mut z = x.to_vec();
    let mut mean = vec![0.0; dobs];
    let mut var = vec![0.0; dobs];
    let mut t = t_now;
    for b in 1..=count {
        if b > 1 {
            model.reset_after_observation(&mut z);
        }
        let target = grid.obs_time(n + b);
        model.skeleton(theta, t, target, &mut z)?;
        t = target;
        model.measurement_moments(theta, n + b - 1, &z, &mut mean, &mut var);
        visit(b, &mean, &var)?;
    }
    Ok(())
}

/// Builds the forecast cache for one particle at `t_now`, interval `n`.
pub fn forecast_moments<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &[f64],
    grid: &TimeGrid,
    n: usize,
    t_now: f64,
    spec: &LookaheadSpec,
    rng: RngStream,
) -> Result<ForecastCache> {
    let count = horizon_count(grid, n, spec.lookahead);
    let dobs = model.dim_obs();
    let mut cache = ForecastCache {
        anchor_time: t_now,
        targets: (n + 1..=n + count).collect(),
        horizons: (n + 1..=n + count).map(|k| grid.obs_time(k)).collect(),
        mean: Vec::with_capacity(count),
        obs_var: Vec::with_capacity(count),
        xi: Vec::with_capacity(count),
    };
    skeleton_chain(model, theta, grid, n, count, t_now, x, |_, m, v| {
        cache.mean.push(m.to_vec());
        cache.obs_var.push(v.to_vec());
        Ok(())
    })?;

    let sims = spec.n_variability_sims;
    // samples[b][i][r]
    let mut samples = vec![vec![vec![0.0; sims]; dobs]; count];
    let mut z = vec![0.0; x.len()];
    let mut m = vec![0.0; dobs];
    let mut v = vec![0.0; dobs];
    for r in 0..sims {
        let mut local = rng.child(r as u64).rng();
        z.copy_from_slice(x);
        let mut t = t_now;
        for b in 1..=count {
            if b > 1 {
                model.reset_after_observation(&mut z);
            }
            let target = grid.obs_time(n + b);
            model.transition(theta, t, target, &mut z, &mut local)?;
            t = target;
            model.measurement_moments(theta, n + b - 1, &z, &mut m, &mut v);
            for i in 0..dobs {
                samples[b - 1][i][r] = m[i];
            }
        }
    }
    let estimator = spec.estimator(model.measurement_family());
    let inflation = spec.inflation();
    for per_b in samples.iter_mut() {
        let xi = per_b.iter_mut().map(|s| variability(s, estimator, inflation)).collect();
        cache.xi.push(xi);
    }
    Ok(cache)
}

fn variability(samples: &mut [f64], estimator: VariabilityEstimator, inflation: f64) -> f64 {
    let out = match estimator {
        VariabilityEstimator::SampleVariance => {
            let mu = mean(samples);
            if samples.iter().all(|&s| s == mu) {
                0.0
            } else {
                sample_variance(samples)
            }
        }
        VariabilityEstimator::Quantile => {
            samples.sort_by(|a, b| a.total_cmp(b));
            let iqr = quantile_sorted(samples, 0.75) - quantile_sorted(samples, 0.25);
            0.55 * (iqr * inflation).powi(2)
        }
    };
    if out.is_finite() {
        out.max(0.0)
    } else {
        f64::INFINITY
    }
}

/// Variability at `t_now` under the locally linear approximation.
pub fn rescale_variability(cache: &ForecastCache, t_now: f64) -> Vec<Vec<f64>> {
    cache
        .horizons
        .iter()
        .zip(&cache.xi)
        .map(|(&h, xi)| {
            let f = rescale_factor(h, cache.anchor_time, t_now);
            xi.iter().map(|&v| v * f).collect()
        })
        .collect()
}

fn rescale_factor(horizon: f64, anchor: f64, t_now: f64) -> f64 {
    if horizon <= anchor {
        0.0
    } else {
        ((horizon - t_now) / (horizon - anchor)).clamp(0.0, 1.0)
    }
}

/// Simulation-based lookahead guide.
pub struct LookaheadGuide<'a, M: ?Sized> {
    model: &'a M,
    grid: &'a TimeGrid,
    data: &'a ObsSeries,
    spec: LookaheadSpec,
}

impl<'a, M: Model + ?Sized> LookaheadGuide<'a, M> {
    pub fn new(model: &'a M, grid: &'a TimeGrid, data: &'a ObsSeries, spec: LookaheadSpec) -> Self {
        LookaheadGuide {
            model,
            grid,
            data,
            spec,
        }
    }

    fn block(&self) -> usize {
        self.spec.lookahead * self.model.dim_obs()
    }
}

impl<M: Model + ?Sized> Guide for LookaheadGuide<'_, M> {
    // layout: [mean | obs_var | xi], each B x dim_obs
    fn cache_len(&self) -> usize {
        3 * self.block()
    }

    fn refreshes_at(&self, step: &GridStep) -> bool {
        match self.spec.refresh_policy {
            RefreshPolicy::EveryS1 => step.s == 1,
            RefreshPolicy::EveryStep => true,
        }
    }

    fn fill_cache(&self, theta: &[f64], step: &GridStep, x: &[f64], cache: &mut [f64], rng: RngStream) -> Result<()> {
        let fc = forecast_moments(self.model, theta, x, self.grid, step.n, step.t_now, &self.spec, rng)?;
        let dobs = self.model.dim_obs();
        let block = self.block();
        cache.fill(0.0);
        for b in 0..fc.targets.len() {
            let off = b * dobs;
            cache[off..off + dobs].copy_from_slice(&fc.mean[b]);
            cache[block + off..block + off + dobs].copy_from_slice(&fc.obs_var[b]);
            cache[2 * block + off..2 * block + off + dobs].copy_from_slice(&fc.xi[b]);
        }
        Ok(())
    }

    fn log_value(&self, theta: &[f64], step: &GridStep, x: &[f64], cache: &[f64]) -> Result<f64> {
        guide_value(
            self.model,
            theta,
            x,
            step,
            self.grid,
            self.data,
            cache,
            &self.spec,
            self.refreshes_at(step),
        )
    }
}

/// log u at the destination of `step` for a particle at `x` whose forecast
/// cache (laid out as in [`LookaheadGuide`]) is `cache`. When `cache_is_current`
/// the cached skeleton forecasts are reused instead of recomputed.
#[allow(clippy::too_many_arguments)]
pub fn guide_value<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    x: &[f64],
    step: &GridStep,
    grid: &TimeGrid,
    data: &ObsSeries,
    cache: &[f64],
    spec: &LookaheadSpec,
    cache_is_current: bool,
) -> Result<f64> {
    let t_now = step.t_now;
    let n = step.n;
    if n == grid.num_obs() {
        return Ok(0.0);
    }
    let count = horizon_count(grid, n, spec.lookahead);
    let dobs = model.dim_obs();
    let block = spec.lookahead * dobs;
    let anchor = anchor_time(grid, step, spec.refresh_policy);
    let family = model.measurement_family();
    let at_obs = step.s == grid.steps();
    let mut total = 0.0;

    let mut factor = |b: usize, mean: &[f64], var: &[f64]| -> Result<()> {
        if b == 1 && at_obs {
            return Ok(());
        }
        let target = n + b;
        let eta = schedule_power(spec.power_schedule, grid, t_now, target, spec.lookahead);
        if eta == 0.0 {
            return Ok(());
        }
        let f = rescale_factor(grid.obs_time(target), anchor, t_now);
        let xi = &cache[2 * block + (b - 1) * dobs..2 * block + b * dobs];
        let y = &data[target - 1];
        let mut sum = 0.0;
        for i in 0..dobs {
            let sigma2 = xi[i] * f + var[i] + VARIANCE_FLOOR;
            sum += family.logdensity(y[i], mean[i], sigma2);
        }
        total += eta * sum;
        Ok(())
    };

    if cache_is_current {
        for b in 1..=count {
            let off = (b - 1) * dobs;
            factor(b, &cache[off..off + dobs], &cache[block + off..block + off + dobs])?;
        }
    } else {
        skeleton_chain(model, theta, grid, n, count, t_now, x, &mut factor)?;
    }
    if at_obs {
        total += model.measurement_logdensity(theta, n, &data[n], x)?;
    }
    if total.is_nan() {
        return Err(Error::NonFiniteGuide { grid_index: step.index });
    }
    Ok(total)
}
