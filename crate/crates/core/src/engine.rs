//! Guided intermediate resampling filter with likelihood estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridStep, TimeGrid};
use crate::guide::{Guide, GuideSpec};
use crate::model::{check_data, Model, ObsSeries};
use crate::par;
use crate::params::ParamVector;
use crate::resampling::{normalize_into, resample_ancestors, resample_n, ResampleScheme};
use crate::rng::{purpose, RngStream, SimRng};
use crate::stats::log_mean_exp;

/// Description of how `filter_means` are formed, copied into output metadata.
pub const FILTER_MEAN_RULE: &str =
    "weighted mean of the propagated swarm at t_n with weights w * g_n / u_{t_n}, i.e. targeting p(x_{t_n} | y_{1:n})";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GirfConfig {
    #[serde(rename = "J")]
    pub particles: usize,
    #[serde(default = "one")]
    pub islands: usize,
    #[serde(default)]
    pub scheme: ResampleScheme,
    pub guide: GuideSpec,
    #[serde(default)]
    pub record_filter_means: bool,
    #[serde(default = "yes")]
    pub record_ess: bool,
    /// Weighted swarm mean after weighting at every grid step.
    #[serde(default)]
    pub record_step_means: bool,
    /// Grid time index whose resampled swarm is returned as `snapshot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_at: Option<usize>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl GirfConfig {
    pub fn new(particles: usize, guide: GuideSpec) -> Self {
        GirfConfig {
            particles,
            islands: 1,
            scheme: ResampleScheme::Systematic,
            guide,
            record_filter_means: false,
            record_ess: true,
            record_step_means: false,
            snapshot_at: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config(format!("J must be at least 2, got {}", self.particles)));
        }
        if self.islands < 1 {
            return Err(Error::Config("islands must be at least 1".into()));
        }
        self.guide.validate()
    }
}

/// Filtered swarm at one time. Guide values are stored on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSwarm {
    pub time: f64,
    pub states: Vec<Vec<f64>>,
    pub log_guide: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub ancestors: Vec<usize>,
}

impl ParticleSwarm {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut m = vec![0.0; d];
        for s in &self.states {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.states.len() as f64);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMetadata {
    pub steps: usize,
    pub particles: usize,
    pub islands: usize,
    pub failed_islands: Vec<usize>,
    pub filter_mean_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub loglik: f64,
    /// log mean weight at each grid step.
    pub cond_loglik: Vec<f64>,
    pub ess_trace: Vec<f64>,
    pub island_logliks: Vec<f64>,
    pub terminal_swarm: ParticleSwarm,
    /// Natural-scale parameters of the terminal swarm when parameters are
    /// carried per particle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_params: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_means: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_means: Option<Vec<Vec<f64>>>,
    /// Equally weighted swarm at `snapshot_at`, from the first island that
    /// completed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<ParticleSwarm>,
    pub metadata: FilterMetadata,
}

/// Guided importance weight in log space:
/// log(u_now / u_prev) + log g_prev when the previous time is an observation.
pub fn girf_weight(u_now: f64, u_prev: f64, g_prev: Option<f64>) -> Result<f64> {
    for v in [Some(u_now), Some(u_prev), g_prev].into_iter().flatten() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveGuide(v));
        }
    }
    let lw = u_now.ln() + (g_prev.map_or(0.0, f64::ln) - u_prev.ln());
    Ok(lw.exp())
}

/// Guide that reduces GIRF to the bootstrap particle filter (forces S = 1).
pub fn configure_bootstrap() -> GuideSpec {
    GuideSpec::Bootstrap
}

/// Guide that reduces GIRF to an auxiliary particle filter using the
/// model skeleton as forecaster (forces S = 1).
pub fn configure_apf() -> GuideSpec {
    GuideSpec::Apf
}

/// Per-particle parameter perturbation used by iterated filtering. Operates
/// on a particle's estimation-scale vector `z` and natural-scale vector
/// `theta` together.
pub trait Perturbation: Sync + Send {
    fn perturb(&self, step: &GridStep, z: &mut [f64], theta: &mut [f64], rng: &mut SimRng);
}

/// Parameter handling for a filter run.
#[derive(Clone, Copy)]
pub enum ThetaMode<'a> {
    Shared(&'a [f64]),
    /// Each particle carries `(z, theta)`; `init` holds `2 p` values per
    /// particle with the estimation scale first.
    Swarm {
        init: &'a [f64],
        perturbation: &'a dyn Perturbation,
    },
}

/// Runs the guided intermediate resampling filter on a single island.
pub fn girf_filter<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &GirfConfig,
    rng: RngStream,
) -> Result<FilterOutput> {
    let single = GirfConfig {
        islands: 1,
        ..config.clone()
    };
    run_islands(model, params, data, grid, &single, rng)
}

/// Runs `config.islands` independent filters and combines them by averaging
/// likelihoods on the natural scale.
pub fn run_islands<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &GirfConfig,
    rng: RngStream,
) -> Result<FilterOutput> {
    if !params.same_structure(model.params()) {
        return Err(Error::InvalidParams(format!(
            "parameters do not match the schema of model `{}`",
            model.name()
        )));
    }
    let theta = params.values();
    run_filter(model, ThetaMode::Shared(&theta), data, grid, config, rng)
}

/// Island driver shared by plain and iterated filtering. With swarm
/// parameters, `init` must hold `islands * J` particles.
pub fn run_filter<M: Model + ?Sized>(
    model: &M,
    theta: ThetaMode<'_>,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &GirfConfig,
    rng: RngStream,
) -> Result<FilterOutput> {
    config.validate()?;
    let grid = match config.guide.required_steps() {
        Some(s) if s != grid.steps() => grid.with_steps(s)?,
        _ => grid.clone(),
    };
    check_data(model, &grid, data)?;
    let base_theta: Vec<f64> = match theta {
        ThetaMode::Shared(t) => t.to_vec(),
        ThetaMode::Swarm { init, .. } => {
            let p = model.params().len();
            if init.len() != 2 * p * config.particles * config.islands {
                return Err(Error::InvalidParams("parameter swarm size mismatch".into()));
            }
            init[p..2 * p].to_vec()
        }
    };
    let guide = config.guide.build(model, &base_theta, &grid, data)?;

    let islands = config.islands;
    let mut runs = Vec::with_capacity(islands);
    for i in 0..islands {
        let stream = if islands == 1 {
            rng
        } else {
            rng.child(purpose::ISLAND).child(i as u64)
        };
        let island_theta = match theta {
            ThetaMode::Shared(t) => ThetaMode::Shared(t),
            ThetaMode::Swarm { init, perturbation } => {
                let block = init.len() / islands;
                ThetaMode::Swarm {
                    init: &init[i * block..(i + 1) * block],
                    perturbation,
                }
            }
        };
        runs.push(run_island(
            model,
            island_theta,
            data,
            &grid,
            config,
            guide.as_ref(),
            stream,
        ));
    }
    combine(runs, &grid, config, rng)
}

struct IslandRun {
    cond: Vec<f64>,
    ess: Vec<f64>,
    error: Option<Error>,
    states: Vec<f64>,
    params: Option<Vec<f64>>,
    log_guide: Vec<f64>,
    ancestors: Vec<usize>,
    filter_means: Vec<Vec<f64>>,
    step_means: Vec<Vec<f64>>,
    snapshot: Option<ParticleSwarm>,
}

#[derive(Clone, Copy)]
struct Propagated {
    log_u: f64,
    log_g: f64,
    logw: f64,
}

fn run_island<M: Model + ?Sized>(
    model: &M,
    theta: ThetaMode<'_>,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &GirfConfig,
    guide: &dyn Guide,
    rng: RngStream,
) -> IslandRun {
    let j_count = config.particles;
    let d = model.dim_latent();
    let c = guide.cache_len().max(1);
    let p = match theta {
        ThetaMode::Shared(_) => 1,
        ThetaMode::Swarm { .. } => 2 * model.params().len(),
    };
    let mut run = IslandRun {
        cond: Vec::with_capacity(grid.len() - 1),
        ess: Vec::with_capacity(grid.len() - 1),
        error: None,
        states: Vec::new(),
        params: None,
        log_guide: Vec::new(),
        ancestors: Vec::new(),
        filter_means: Vec::new(),
        step_means: Vec::new(),
        snapshot: None,
    };

    let mut x = vec![0.0; j_count * d];
    let mut cache = vec![0.0; j_count * c];
    let mut pars = match theta {
        ThetaMode::Shared(_) => vec![0.0; j_count],
        ThetaMode::Swarm { init, .. } => init.to_vec(),
    };
    let mut log_u = vec![0.0; j_count];
    let mut log_g = vec![0.0; j_count];
    let mut ancestors: Vec<usize> = (0..j_count).collect();

    let theta_of = |pj: &[f64]| -> Vec<f64> {
        match theta {
            ThetaMode::Shared(t) => t.to_vec(),
            ThetaMode::Swarm { .. } => pj[p / 2..].to_vec(),
        }
    };
    let shared = match theta {
        ThetaMode::Shared(t) => Some(t),
        ThetaMode::Swarm { .. } => None,
    };

    let init_stream = rng.child(purpose::INIT);
    let mut init_out: Vec<Result<()>> = vec![Ok(()); j_count];
    par::for_each_particle(
        &mut x,
        d,
        &mut cache,
        c,
        &mut pars,
        p,
        &mut init_out,
        |j, xj, _, pj, o| {
            let owned;
            let th = match shared {
                Some(t) => t,
                None => {
                    owned = theta_of(pj);
                    &owned
                }
            };
            *o = model.init_sample(th, xj, &mut init_stream.child(j as u64).rng());
        },
    );
    if let Some(Err(e)) = init_out.into_iter().find(|r| r.is_err()) {
        run.error = Some(e);
        return run;
    }

    let mut x_new = vec![0.0; j_count * d];
    let mut cache_new = vec![0.0; j_count * c];
    let mut pars_new = pars.clone();
    let blank = Propagated {
        log_u: 0.0,
        log_g: 0.0,
        logw: 0.0,
    };
    let mut out: Vec<Result<Propagated>> = vec![Ok(blank); j_count];
    let mut logw = vec![0.0; j_count];
    let mut probs = Vec::with_capacity(j_count);
    let prop_stream = rng.child(purpose::PROPAGATE);
    let fc_stream = rng.child(purpose::FORECAST);
    let perturb_stream = rng.child(purpose::PERTURB);
    let resample_stream = rng.child(purpose::RESAMPLE);
    let last_index = grid.len() - 1;

    for step in grid.steps_iter() {
        let k = step.index;
        let refresh = guide.refreshes_at(&step);
        let at_obs = step.reaches_observation(grid.steps());
        let leaves = step.leaves_observation();
        let prop_k = prop_stream.child(k as u64);
        let fc_k = fc_stream.child(k as u64);
        let pert_k = perturb_stream.child(k as u64);
        {
            let (x, cache, pars, log_u, log_g, ancestors) = (&x, &cache, &pars, &log_u, &log_g, &ancestors);
            par::for_each_particle(
                &mut x_new,
                d,
                &mut cache_new,
                c,
                &mut pars_new,
                p,
                &mut out,
                |j, xj, cj, pj, o| {
                    let a = ancestors[j];
                    xj.copy_from_slice(&x[a * d..(a + 1) * d]);
                    pj.copy_from_slice(&pars[a * p..(a + 1) * p]);
                    *o = (|| {
                        if let ThetaMode::Swarm { perturbation, .. } = theta {
                            let (z, th) = pj.split_at_mut(p / 2);
                            perturbation.perturb(&step, z, th, &mut pert_k.child(j as u64).rng());
                        }
                        let owned;
                        let th = match shared {
                            Some(t) => t,
                            None => {
                                owned = theta_of(pj);
                                &owned
                            }
                        };
                        if leaves {
                            model.reset_after_observation(xj);
                        }
                        model.transition(th, step.t_prev, step.t_now, xj, &mut prop_k.child(j as u64).rng())?;
                        if refresh {
                            guide.fill_cache(th, &step, xj, cj, fc_k.child(j as u64))?;
                        } else {
                            cj.copy_from_slice(&cache[a * c..(a + 1) * c]);
                        }
                        let lu = guide.log_value(th, &step, xj, cj)?;
                        let lg = if at_obs {
                            model.measurement_logdensity(th, step.n, &data[step.n], xj)?
                        } else {
                            0.0
                        };
                        let g_prev = if leaves { log_g[a] } else { 0.0 };
                        Ok(Propagated {
                            log_u: lu,
                            log_g: lg,
                            logw: lu + (g_prev - log_u[a]),
                        })
                    })();
                },
            );
        }
        for (j, o) in out.iter_mut().enumerate() {
            match o {
                Ok(v) => {
                    log_u[j] = v.log_u;
                    log_g[j] = v.log_g;
                    logw[j] = v.logw;
                }
                Err(e) => {
                    run.error = Some(std::mem::replace(e, Error::NonFiniteState));
                    return run;
                }
            }
        }
        if k == last_index {
            if let Some(j) = (0..j_count).find(|&j| log_u[j].is_finite() && log_u[j] != log_g[j]) {
                run.error = Some(Error::BoundaryViolation(format!(
                    "final guide {} differs from measurement density {}",
                    log_u[j], log_g[j]
                )));
                return run;
            }
        }
        let cond = match normalize_into(&logw, &mut probs, k) {
            Ok(v) => v,
            Err(e) => {
                run.error = Some(e);
                return run;
            }
        };
        run.cond.push(cond);
        if config.record_ess {
            run.ess.push(crate::resampling::ess(&probs));
        }
        if config.record_step_means {
            run.step_means.push(weighted_mean(&x_new, d, &probs));
        }
        if config.record_filter_means && at_obs {
            let fw: Vec<f64> = (0..j_count).map(|j| logw[j] + (log_g[j] - log_u[j])).collect();
            let mut fp = Vec::with_capacity(j_count);
            let mean = match normalize_into(&fw, &mut fp, k) {
                Ok(_) => weighted_mean(&x_new, d, &fp),
                Err(_) => vec![f64::NAN; d],
            };
            run.filter_means.push(mean);
        }
        ancestors = resample_ancestors(&probs, config.scheme, &mut resample_stream.child(k as u64).rng());
        if config.snapshot_at == Some(k) {
            run.snapshot = Some(ParticleSwarm {
                time: step.t_now,
                states: ancestors.iter().map(|&a| x_new[a * d..(a + 1) * d].to_vec()).collect(),
                log_guide: ancestors.iter().map(|&a| log_u[a]).collect(),
                log_weights: vec![0.0; j_count],
                ancestors: ancestors.clone(),
            });
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut cache, &mut cache_new);
        std::mem::swap(&mut pars, &mut pars_new);
    }

    run.states = Vec::with_capacity(j_count * d);
    run.log_guide = Vec::with_capacity(j_count);
    for &a in &ancestors {
        run.states.extend_from_slice(&x[a * d..(a + 1) * d]);
        run.log_guide.push(log_u[a]);
    }
    if shared.is_none() {
        let mut out_p = Vec::with_capacity(j_count * p / 2);
        for &a in &ancestors {
            out_p.extend_from_slice(&pars[a * p + p / 2..(a + 1) * p]);
        }
        run.params = Some(out_p);
    }
    run.ancestors = ancestors;
    run
}

fn weighted_mean(x: &[f64], d: usize, probs: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for (xj, &w) in x.chunks(d).zip(probs) {
        if w > 0.0 {
            for (a, b) in m.iter_mut().zip(xj) {
                *a += w * b;
            }
        }
    }
    m
}

fn island_weights(logliks: &[f64]) -> Vec<f64> {
    let max = logliks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logliks.len()];
    }
    let w: Vec<f64> = logliks.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn mix_means(per_island: &[&Vec<Vec<f64>>], cum: &[Vec<f64>], at: impl Fn(usize) -> usize) -> Vec<Vec<f64>> {
    let rows = per_island[0].len();
    (0..rows)
        .map(|r| {
            let w = island_weights(&cum.iter().map(|c| c[at(r)]).collect::<Vec<_>>());
            let d = per_island[0][r].len();
            let mut m = vec![0.0; d];
            for (i, means) in per_island.iter().enumerate() {
                if w[i] > 0.0 {
                    for (a, b) in m.iter_mut().zip(&means[r]) {
                        *a += w[i] * b;
                    }
                }
            }
            m
        })
        .collect()
}

fn combine(runs: Vec<IslandRun>, grid: &TimeGrid, config: &GirfConfig, rng: RngStream) -> Result<FilterOutput> {
    let steps = grid.len() - 1;
    let islands = runs.len();
    let failed: Vec<usize> = (0..islands).filter(|&i| runs[i].error.is_some()).collect();
    if failed.len() == islands {
        let mut runs = runs;
        return Err(runs.swap_remove(0).error.expect("failed island"));
    }
    let metadata = FilterMetadata {
        steps: grid.steps(),
        particles: config.particles,
        islands,
        failed_islands: failed.clone(),
        filter_mean_rule: FILTER_MEAN_RULE.to_string(),
    };
    if islands == 1 {
        let run = runs.into_iter().next().expect("one island");
        let loglik = run.cond.iter().sum();
        let states = run
            .states
            .chunks(run.states.len() / config.particles)
            .map(<[f64]>::to_vec)
            .collect();
        return Ok(FilterOutput {
            loglik,
            island_logliks: vec![loglik],
            cond_loglik: run.cond,
            ess_trace: run.ess,
            terminal_swarm: ParticleSwarm {
                time: *grid.times().last().expect("grid"),
                states,
                log_guide: run.log_guide,
                log_weights: vec![0.0; config.particles],
                ancestors: run.ancestors,
            },
            terminal_params: run
                .params
                .map(|p| p.chunks(p.len() / config.particles).map(<[f64]>::to_vec).collect()),
            filter_means: config.record_filter_means.then_some(run.filter_means),
            step_means: config.record_step_means.then_some(run.step_means),
            snapshot: run.snapshot,
            metadata,
        });
    }

    // cumulative log likelihood per island after each grid step
    let cum: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| {
            let mut acc = 0.0;
            let mut c: Vec<f64> = r
                .cond
                .iter()
                .map(|v| {
                    acc += v;
                    acc
                })
                .collect();
            c.resize(steps, f64::NEG_INFINITY);
            c
        })
        .collect();
    let mut cond = Vec::with_capacity(steps);
    let mut prev = 0.0;
    for k in 0..steps {
        let col: Vec<f64> = cum.iter().map(|c| c[k]).collect();
        let now = log_mean_exp(&col);
        cond.push(now - prev);
        prev = now;
    }
    let island_logliks: Vec<f64> = cum.iter().map(|c| c[steps - 1]).collect();
    let loglik = cond.iter().sum();

    let ok: Vec<&IslandRun> = runs.iter().filter(|r| r.error.is_none()).collect();
    let ok_cum: Vec<Vec<f64>> = runs
        .iter()
        .zip(&cum)
        .filter(|(r, _)| r.error.is_none())
        .map(|(_, c)| c.clone())
        .collect();
    let ess_trace = if config.record_ess {
        let mut e = vec![0.0; steps];
        for r in &ok {
            for (a, b) in e.iter_mut().zip(&r.ess) {
                *a += b / ok.len() as f64;
            }
        }
        e
    } else {
        Vec::new()
    };
    let filter_means = config.record_filter_means.then(|| {
        let per: Vec<&Vec<Vec<f64>>> = ok.iter().map(|r| &r.filter_means).collect();
        mix_means(&per, &ok_cum, |n| (n + 1) * grid.steps() - 1)
    });
    let step_means = config.record_step_means.then(|| {
        let per: Vec<&Vec<Vec<f64>>> = ok.iter().map(|r| &r.step_means).collect();
        mix_means(&per, &ok_cum, |k| k)
    });

    // pooled terminal swarm, island-weighted, resampled to J
    let j_count = config.particles;
    let w = island_weights(&ok_cum.iter().map(|c| c[steps - 1]).collect::<Vec<_>>());
    let pooled: Vec<f64> = w
        .iter()
        .flat_map(|&wi| std::iter::repeat(wi / j_count as f64).take(j_count))
        .collect();
    let picks = resample_n(&pooled, j_count, config.scheme, &mut rng.child(purpose::POOL).rng());
    let d = ok[0].states.len() / j_count;
    let mut states = Vec::with_capacity(j_count);
    let mut log_guide = Vec::with_capacity(j_count);
    let mut params = ok[0].params.as_ref().map(|_| Vec::with_capacity(j_count));
    for &q in &picks {
        let (i, j) = (q / j_count, q % j_count);
        states.push(ok[i].states[j * d..(j + 1) * d].to_vec());
        log_guide.push(ok[i].log_guide[j]);
        if let (Some(out), Some(src)) = (params.as_mut(), ok[i].params.as_ref()) {
            let p = src.len() / j_count;
            out.push(src[j * p..(j + 1) * p].to_vec());
        }
    }
    Ok(FilterOutput {
        loglik,
        cond_loglik: cond,
        ess_trace,
        island_logliks,
        terminal_swarm: ParticleSwarm {
            time: *grid.times().last().expect("grid"),
            states,
            log_guide,
            log_weights: vec![0.0; j_count],
            ancestors: picks,
        },
        terminal_params: params,
        filter_means,
        step_means,
        snapshot: ok[0].snapshot.clone(),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weight_examples() {
        assert_abs_diff_eq!(girf_weight(2.0, 1.0, None).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(girf_weight(2.0, 4.0, Some(0.5)).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(girf_weight(0.3, 1.0, None).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(girf_weight(0.0, 1.0, None), Err(Error::NonPositiveGuide(0.0)));
        assert_eq!(girf_weight(1.0, 1.0, Some(-1.0)), Err(Error::NonPositiveGuide(-1.0)));
    }

    #[test]
    fn island_weights_normalize() {
        let w = island_weights(&[0.0, f64::NEG_INFINITY, 2.0f64.ln()]);
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w[2], 2.0 / 3.0, epsilon = 1e-15);
    }
}
