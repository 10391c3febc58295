//! Browser front end for three small experiments: likelihood traces of the
//! guided filter against the exact Kalman filter, the guided particle cloud
//! inside the first observation interval, and an MCAP interval explorer.
//!
//! Each operation has a plain Rust form returning a serializable struct and a
//! `wasm_bindgen` wrapper returning the same struct as JSON.

use girf::guide::Covariance;
use girf::mcap::{mcap_interval, McapOptions, ProfilePoints};
use girf::models::{CorrelatedBm, CorrelatedBmConfig};
use girf::oracles::{kalman_filter, kalman_guided_oracle};
use girf::{build_time_grid, configure_bootstrap, girf_filter, simulate_pomp, GirfConfig, GuideSpec, Model, RngStream};
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize)]
pub struct Traces {
    pub times: Vec<f64>,
    /// Cumulative log likelihood after each observation.
    pub kalman: Vec<f64>,
    pub girf: Vec<f64>,
    pub bootstrap: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cloud {
    pub time: f64,
    pub observation: [f64; 2],
    /// First two coordinates of each particle.
    pub points: Vec<[f64; 2]>,
    pub oracle_mean: [f64; 2],
    pub oracle_cov: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct Explorer {
    pub phi: Vec<f64>,
    pub loglik: Vec<f64>,
    pub curve: Vec<(f64, f64)>,
    pub phi_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
    pub se_mc: f64,
    pub se_stat: f64,
}

fn cumulative(v: &[f64], per_obs: usize) -> Vec<f64> {
    let mut acc = 0.0;
    v.chunks(per_obs)
        .map(|c| {
            acc += c.iter().sum::<f64>();
            acc
        })
        .collect()
}

fn cbm(d: usize, alpha: f64) -> girf::Result<CorrelatedBm> {
    CorrelatedBm::new(&CorrelatedBmConfig::new(d, alpha))
}

pub fn cbm_traces(d: usize, alpha: f64, n_obs: usize, particles: usize, seed: u64) -> girf::Result<Traces> {
    let model = cbm(d, alpha)?;
    let times: Vec<f64> = (1..=n_obs).map(|k| k as f64).collect();
    let grid = build_time_grid(0.0, &times, d)?;
    let root = RngStream::new(seed);
    let data = simulate_pomp(&model, model.params(), &grid, root.child(0))?.observations;
    let spec = model
        .linear_gaussian(&model.params().values())
        .ok_or_else(|| girf::Error::Model("no linear-Gaussian form".into()))?;
    let kalman = kalman_filter(&spec, &grid, &data)?;
    let mut config = GirfConfig::new(particles, GuideSpec::exact_gaussian(2, Covariance::Exact));
    config.record_ess = false;
    let guided = girf_filter(&model, model.params(), &data, &grid, &config, root.child(1))?;
    config.guide = configure_bootstrap();
    let boot = girf_filter(&model, model.params(), &data, &grid, &config, root.child(2))?;
    Ok(Traces {
        times,
        kalman: cumulative(&kalman.cond_loglik, 1),
        girf: cumulative(&guided.cond_loglik, d),
        bootstrap: cumulative(&boot.cond_loglik, 1),
    })
}

/// Swarm at `t_{0,s}` under the exact one-step guide, for a `d`-dimensional
/// uncorrelated Brownian motion with `d` intermediate steps.
pub fn guided_cloud(d: usize, s: usize, particles: usize, seed: u64) -> girf::Result<Cloud> {
    if d < 2 || s == 0 || s > d {
        return Err(girf::Error::Config("need d >= 2 and 1 <= s <= d".into()));
    }
    let model = cbm(d, 0.0)?;
    let grid = build_time_grid(0.0, &[1.0], d)?;
    let root = RngStream::new(seed);
    let data = simulate_pomp(&model, model.params(), &grid, root.child(0))?.observations;
    let mut config = GirfConfig::new(particles, GuideSpec::exact_gaussian(1, Covariance::Exact));
    config.record_ess = false;
    config.snapshot_at = Some(s);
    let out = girf_filter(&model, model.params(), &data, &grid, &config, root.child(1))?;
    let swarm = out.snapshot.expect("snapshot requested");
    let spec = model
        .linear_gaussian(&model.params().values())
        .ok_or_else(|| girf::Error::Model("no linear-Gaussian form".into()))?;
    let (m, c) = kalman_guided_oracle(&spec, &grid, &data, s, 1)?;
    Ok(Cloud {
        time: swarm.time,
        observation: [data[0][0], data[0][1]],
        points: swarm.states.iter().map(|x| [x[0], x[1]]).collect(),
        oracle_mean: [m[0], m[1]],
        oracle_cov: [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
    })
}

/// Profile of a parabola with curvature `curvature` peaked at 0, observed at
/// `points` equally spaced values on [-2, 2] with Gaussian noise of sd
/// `noise`, and its MCAP interval.
pub fn mcap_explorer(
    curvature: f64,
    noise: f64,
    points: usize,
    alpha: f64,
    span: f64,
    seed: u64,
) -> girf::Result<Explorer> {
    if points < 4 {
        return Err(girf::Error::Config("need at least four profile points".into()));
    }
    let normal = Normal::new(0.0, noise).map_err(|e| girf::Error::Config(e.to_string()))?;
    let mut rng = RngStream::new(seed).rng();
    let phi: Vec<f64> = (0..points)
        .map(|i| -2.0 + 4.0 * i as f64 / (points - 1) as f64)
        .collect();
    let loglik: Vec<f64> = phi
        .iter()
        .map(|p| -curvature * p * p + normal.sample(&mut rng))
        .collect();
    let profile = ProfilePoints::new(phi.clone(), loglik.clone())?;
    let options = McapOptions {
        alpha,
        span,
        ..McapOptions::default()
    };
    let ci = mcap_interval(&profile, &options)?;
    Ok(Explorer {
        phi,
        loglik,
        curve: ci.curve,
        phi_hat: ci.phi_hat,
        lower: ci.lower,
        upper: ci.upper,
        delta: ci.delta,
        se_mc: ci.se_mc,
        se_stat: ci.se_stat,
    })
}

fn to_js<T: Serialize>(r: girf::Result<T>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = cbmTraces)]
pub fn cbm_traces_js(d: usize, alpha: f64, n_obs: usize, particles: usize, seed: u32) -> Result<String, JsValue> {
    to_js(cbm_traces(d, alpha, n_obs, particles, seed as u64))
}

#[wasm_bindgen(js_name = guidedCloud)]
pub fn guided_cloud_js(d: usize, s: usize, particles: usize, seed: u32) -> Result<String, JsValue> {
    to_js(guided_cloud(d, s, particles, seed as u64))
}

#[wasm_bindgen(js_name = mcapExplorer)]
pub fn mcap_explorer_js(
    curvature: f64,
    noise: f64,
    points: usize,
    alpha: f64,
    span: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(mcap_explorer(curvature, noise, points, alpha, span, seed as u64))
}
