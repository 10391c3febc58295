use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{Model, ObsSeries};
use crate::params::ParamVector;
use crate::resampling::{normalize_log_weights, resample_ancestors, ResampleScheme};
use crate::rng::{purpose, RngStream};
use crate::stats::log_mean_exp;

/// Plain bootstrap particle filter over the observation times. Draws follow
/// the same stream layout as the guided filter with one step per interval,
/// so the two agree bitwise when the guided filter uses the bootstrap guide.
/// Returns the per-observation conditional log likelihoods.
pub fn bootstrap_filter<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    data: &ObsSeries,
    grid: &TimeGrid,
    particles: usize,
    scheme: ResampleScheme,
    rng: RngStream,
) -> Result<Vec<f64>> {
    let theta = params.values();
    let d = model.dim_latent();
    let init = rng.child(purpose::INIT);
    let prop = rng.child(purpose::PROPAGATE);
    let resample = rng.child(purpose::RESAMPLE);
    let mut swarm: Vec<Vec<f64>> = Vec::with_capacity(particles);
    for j in 0..particles {
        let mut x = vec![0.0; d];
        model.init_sample(&theta, &mut x, &mut init.child(j as u64).rng())?;
        swarm.push(x);
    }
    let mut cond = Vec::with_capacity(data.len());
    for (n, y) in data.iter().enumerate() {
        let k = (n + 1) as u64;
        let mut logw = Vec::with_capacity(particles);
        for (j, x) in swarm.iter_mut().enumerate() {
            if n >= 1 {
                model.reset_after_observation(x);
            }
            model.transition(
                &theta,
                grid.obs_time(n),
                grid.obs_time(n + 1),
                x,
                &mut prop.child(k).child(j as u64).rng(),
            )?;
            logw.push(model.measurement_logdensity(&theta, n, y, x)?);
        }
        if logw.iter().all(|&w| w == f64::NEG_INFINITY) {
            return Err(Error::AllWeightsDegenerate { grid_index: n + 1 });
        }
        cond.push(log_mean_exp(&logw));
        let (probs, _) = normalize_log_weights(&logw)?;
        let anc = resample_ancestors(&probs, scheme, &mut resample.child(k).rng());
        swarm = anc.iter().map(|&a| swarm[a].clone()).collect();
    }
    Ok(cond)
}
