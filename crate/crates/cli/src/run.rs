use std::collections::BTreeMap;
use std::time::Instant;

use girf::igirf::{igirf_alternating, igirf_run, Alternation, IgirfConfig, IgirfOutput, ParamSwarm};
use girf::mcap::{mcap_interval, McapOptions, ProfilePoints};
use girf::oracles::{enkf_filter, kalman_filter};
use girf::rng::purpose;
use girf::{
    build_time_grid, configure_apf, configure_bootstrap, run_islands, simulate_pomp, GirfConfig, Model, ObsSeries,
    ParamVector, RngStream, TimeGrid,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Engine, ExperimentConfig, FilterConfig, McapConfig, Task};
use crate::error::CliError;
use crate::output::{fmt, read_series, write_series, Sink};

/// Model, parameters, grid and data shared by every task.
pub struct Setup {
    pub model: Box<dyn Model>,
    pub params: ParamVector,
    pub grid: TimeGrid,
    pub data: ObsSeries,
    /// Latent states at the observation times when the data were simulated.
    pub truth: Option<Vec<Vec<f64>>>,
}

fn model_and_params(
    config: &ExperimentConfig,
) -> Result<(Box<dyn Model>, ParamVector, Option<girf::models::BundledData>), CliError> {
    let spec = config
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `model` block".into()))?;
    let built = spec.build().map_err(|e| match e {
        girf::Error::Config(m) => CliError::Config(m),
        e => CliError::Model(e),
    })?;
    let mut params = built.model.params().clone();
    apply(&mut params, &config.theta, "theta")?;
    Ok((built.model, params, built.data))
}

fn apply(params: &mut ParamVector, values: &BTreeMap<String, f64>, block: &str) -> Result<(), CliError> {
    for (name, value) in values {
        if params.index_of(name).is_none() {
            return Err(CliError::Config(format!("{block}: unknown parameter `{name}`")));
        }
        params.set(name, *value)?;
    }
    Ok(())
}

fn steps(config: &ExperimentConfig) -> usize {
    config.grid.as_ref().map_or(1, |g| g.steps)
}

/// Builds the model and resolves the data: an observation file, data bundled
/// with the model, or a simulation from the configured grid.
pub fn setup(config: &ExperimentConfig) -> Result<Setup, CliError> {
    let (model, params, bundled) = model_and_params(config)?;
    let s = steps(config);
    let t0 = config.grid.as_ref().map_or(0.0, |g| g.t0);
    if let Some(path) = &config.data {
        let (times, data) = read_series(path)?;
        let grid = build_time_grid(t0, &times, s)?;
        return Ok(Setup {
            model,
            params,
            grid,
            data,
            truth: None,
        });
    }
    if let Some(b) = bundled {
        let grid = build_time_grid(b.t0, &b.obs_times, s)?;
        return Ok(Setup {
            model,
            params,
            grid,
            data: b.observations,
            truth: None,
        });
    }
    let gc = config
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Config("without `data`, a `grid` block is needed to simulate observations".into()))?;
    let grid = build_time_grid(t0, &gc.obs_times()?, s)?;
    let sim = simulate_pomp(model.as_ref(), &params, &grid, simulation_stream(config.seed)).map_err(CliError::Model)?;
    let truth = Some(sim.states_at_observations(&grid));
    Ok(Setup {
        model,
        params,
        grid,
        data: sim.observations,
        truth,
    })
}

fn simulation_stream(seed: u64) -> RngStream {
    RngStream::new(seed).child(purpose::SIMULATE)
}

fn suffix(config: &ExperimentConfig, r: usize) -> String {
    if config.replicates == 1 {
        String::new()
    } else {
        format!("_{r}")
    }
}

pub fn simulate(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let (model, params, _) = model_and_params(config)?;
    let gc = config
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Config("task `simulate` needs a `grid` block".into()))?;
    let grid = build_time_grid(gc.t0, &gc.obs_times()?, gc.steps)?;
    for r in 0..config.replicates {
        let seed = config.seed + r as u64;
        let start = Instant::now();
        let sim = simulate_pomp(model.as_ref(), &params, &grid, simulation_stream(seed)).map_err(CliError::Model)?;
        let wall = start.elapsed().as_secs_f64();
        let sfx = suffix(config, r);
        write_series(
            &mut sink.csv(&format!("states{sfx}.csv"))?,
            "x",
            &sim.times,
            &sim.states,
        )?;
        write_series(
            &mut sink.csv(&format!("observations{sfx}.csv"))?,
            "y",
            grid.obs_times(),
            &sim.observations,
        )?;
        sink.emit(&json!({
            "task": "simulate",
            "replicate": r,
            "seed": seed,
            "grid_points": sim.times.len(),
            "observations": sim.observations.len(),
            "wall_time_s": wall,
        }))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineRun {
    pub engine: Engine,
    pub label: String,
    pub loglik: f64,
    /// log p(y_n | y_{1:n-1}) estimates.
    pub cond_loglik: Vec<f64>,
    #[serde(skip)]
    pub means: Option<Vec<Vec<f64>>>,
    pub min_ess: Option<f64>,
    pub wall_time_s: f64,
}

fn label(fc: &FilterConfig) -> String {
    fc.label.clone().unwrap_or_else(|| {
        serde_json::to_value(fc.engine)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    })
}

fn per_observation(cond: &[f64], n_obs: usize) -> Vec<f64> {
    if n_obs == 0 || cond.len() % n_obs != 0 {
        return cond.to_vec();
    }
    cond.chunks(cond.len() / n_obs).map(|c| c.iter().sum()).collect()
}

pub fn run_engine(
    setup: &Setup,
    params: &ParamVector,
    fc: &FilterConfig,
    rng: RngStream,
) -> Result<EngineRun, CliError> {
    let model = setup.model.as_ref();
    let particle = |guide| GirfConfig {
        particles: fc.particles,
        islands: fc.islands,
        scheme: fc.scheme,
        guide,
        record_filter_means: true,
        record_ess: true,
        record_step_means: false,
        snapshot_at: None,
    };
    let start = Instant::now();
    let run = match fc.engine {
        Engine::Girf | Engine::Bootstrap | Engine::Apf => {
            let guide = match fc.engine {
                Engine::Bootstrap => configure_bootstrap(),
                Engine::Apf => configure_apf(),
                _ => fc
                    .guide
                    .clone()
                    .ok_or_else(|| CliError::Config("engine `girf` needs a `guide`".into()))?,
            };
            let out = run_islands(model, params, &setup.data, &setup.grid, &particle(guide), rng)?;
            EngineRun {
                engine: fc.engine,
                label: label(fc),
                loglik: out.loglik,
                cond_loglik: per_observation(&out.cond_loglik, setup.grid.num_obs()),
                means: out.filter_means,
                min_ess: out.ess_trace.iter().copied().reduce(f64::min),
                wall_time_s: 0.0,
            }
        }
        Engine::Enkf => {
            let out = enkf_filter(model, params, &setup.data, &setup.grid, fc.particles, rng)?;
            EngineRun {
                engine: fc.engine,
                label: label(fc),
                loglik: out.loglik,
                cond_loglik: out.cond_loglik,
                means: Some(out.means),
                min_ess: None,
                wall_time_s: 0.0,
            }
        }
        Engine::Kalman => {
            let spec = model.linear_gaussian(&params.values()).ok_or_else(|| {
                CliError::Model(girf::Error::Model(format!(
                    "model `{}` has no linear-Gaussian form for the kalman engine",
                    model.name()
                )))
            })?;
            let out = kalman_filter(&spec, &setup.grid, &setup.data)?;
            EngineRun {
                engine: fc.engine,
                label: label(fc),
                loglik: out.loglik,
                cond_loglik: out.cond_loglik,
                means: Some(out.means.iter().map(|m| m.iter().copied().collect()).collect()),
                min_ess: None,
                wall_time_s: 0.0,
            }
        }
    };
    Ok(EngineRun {
        wall_time_s: start.elapsed().as_secs_f64(),
        ..run
    })
}

fn replicate_stream(config: &ExperimentConfig, r: usize) -> RngStream {
    RngStream::new(config.seed + r as u64)
}

fn write_cond(sink: &Sink, name: &str, grid: &TimeGrid, runs: &[(usize, EngineRun)]) -> Result<(), CliError> {
    let mut out = sink.csv(name)?;
    out.write_record(["replicate", "engine", "n", "time", "cond_loglik"])?;
    for (r, run) in runs {
        for (n, c) in run.cond_loglik.iter().enumerate() {
            let t = grid.obs_times().get(n).copied().unwrap_or(f64::NAN);
            out.write_record([r.to_string(), run.label.clone(), (n + 1).to_string(), fmt(t), fmt(*c)])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_data(sink: &Sink, setup: &Setup) -> Result<(), CliError> {
    write_series(&mut sink.csv("data.csv")?, "y", setup.grid.obs_times(), &setup.data)
}

pub fn filter(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let fc = config.filter.as_ref().expect("checked by require");
    let setup = setup(config)?;
    write_data(sink, &setup)?;
    let mut runs = Vec::new();
    for r in 0..config.replicates {
        let run = run_engine(&setup, &setup.params, fc, replicate_stream(config, r))?;
        sink.emit(&json!({
            "task": "filter",
            "replicate": r,
            "seed": config.seed + r as u64,
            "engine": run.label,
            "loglik": run.loglik,
            "min_ess": run.min_ess,
            "wall_time_s": run.wall_time_s,
        }))?;
        runs.push((r, run));
    }
    let mut out = sink.csv("filter.csv")?;
    out.write_record(["replicate", "seed", "engine", "loglik", "min_ess", "wall_time_s"])?;
    for (r, run) in &runs {
        out.write_record([
            r.to_string(),
            (config.seed + *r as u64).to_string(),
            run.label.clone(),
            fmt(run.loglik),
            run.min_ess.map_or(String::new(), fmt),
            fmt(run.wall_time_s),
        ])?;
    }
    out.flush()?;
    write_cond(sink, "cond_loglik.csv", &setup.grid, &runs)
}

fn mse(means: &[Vec<f64>], reference: &[Vec<f64>]) -> Option<f64> {
    if means.len() != reference.len() || means.is_empty() {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (m, r) in means.iter().zip(reference) {
        for (a, b) in m.iter().zip(r) {
            total += (a - b) * (a - b);
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Filter means from the exact filter when the model is linear-Gaussian,
/// otherwise the simulated latent states.
fn reference_means(setup: &Setup) -> Result<Option<(&'static str, Vec<Vec<f64>>)>, CliError> {
    if let Some(spec) = setup.model.linear_gaussian(&setup.params.values()) {
        let out = kalman_filter(&spec, &setup.grid, &setup.data)?;
        return Ok(Some((
            "kalman",
            out.means.iter().map(|m| m.iter().copied().collect()).collect(),
        )));
    }
    Ok(setup.truth.clone().map(|t| ("truth", t)))
}

pub fn compare(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let engines = &config.compare.as_ref().expect("checked by require").engines;
    let setup = setup(config)?;
    write_data(sink, &setup)?;
    let reference = reference_means(&setup)?;
    let mut out = sink.csv("compare.csv")?;
    out.write_record([
        "replicate",
        "engine",
        "loglik",
        "mse",
        "reference",
        "min_ess",
        "wall_time_s",
    ])?;
    let mut runs = Vec::new();
    for r in 0..config.replicates {
        for fc in engines {
            let run = run_engine(&setup, &setup.params, fc, replicate_stream(config, r))?;
            let err = match (&reference, &run.means) {
                (Some((_, reference)), Some(m)) => mse(m, reference),
                _ => None,
            };
            let against = reference.as_ref().map(|(k, _)| *k);
            sink.emit(&json!({
                "task": "compare",
                "replicate": r,
                "engine": run.label,
                "loglik": run.loglik,
                "mse": err,
                "reference": against,
                "min_ess": run.min_ess,
                "wall_time_s": run.wall_time_s,
            }))?;
            out.write_record([
                r.to_string(),
                run.label.clone(),
                fmt(run.loglik),
                err.map_or(String::new(), fmt),
                against.unwrap_or("").to_string(),
                run.min_ess.map_or(String::new(), fmt),
                fmt(run.wall_time_s),
            ])?;
            runs.push((r, run));
        }
    }
    out.flush()?;
    write_cond(sink, "cond_loglik.csv", &setup.grid, &runs)
}

fn maximize(
    setup: &Setup,
    start: &ParamVector,
    ic: &IgirfConfig,
    rng: RngStream,
) -> Result<(ParamVector, Vec<IgirfOutput>), CliError> {
    let swarm = ParamSwarm::new(start, ic.particles * ic.islands);
    let model = setup.model.as_ref();
    Ok(match ic.alternation {
        Alternation::Joint => {
            let out = igirf_run(model, &setup.data, &setup.grid, ic, &swarm, rng)?;
            (out.estimate.clone(), vec![out])
        }
        Alternation::IvpThenRegular => {
            let out = igirf_alternating(model, &setup.data, &setup.grid, ic, &swarm, rng)?;
            (out.estimate, out.regular)
        }
    })
}

fn estimate_json(p: &ParamVector) -> serde_json::Map<String, serde_json::Value> {
    p.names()
        .zip(p.values())
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect()
}

pub fn igirf(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let ic = config.igirf.as_ref().expect("checked by require");
    let setup = setup(config)?;
    write_data(sink, &setup)?;
    let mut initial = setup.params.clone();
    apply(&mut initial, &config.start, "start")?;
    for r in 0..config.replicates {
        let start = Instant::now();
        let (estimate, passes) = maximize(&setup, &initial, ic, replicate_stream(config, r))?;
        let wall = start.elapsed().as_secs_f64();
        let sfx = suffix(config, r);
        for (k, pass) in passes.iter().enumerate() {
            let name = if passes.len() == 1 {
                format!("igirf_trace{sfx}.csv")
            } else {
                format!("igirf_trace{sfx}_round{k}.csv")
            };
            pass.write_trace_csv(sink.file(&name)?)?;
        }
        let last = passes.last().and_then(|p| p.trace.last());
        let summary = json!({
            "task": "igirf",
            "replicate": r,
            "seed": config.seed + r as u64,
            "estimate": estimate_json(&estimate),
            "final_loglik": last.map(|t| t.loglik),
            "iterations": passes.iter().map(|p| p.trace.len()).sum::<usize>(),
            "wall_time_s": wall,
        });
        sink.json(&format!("igirf{sfx}.json"), &summary)?;
        sink.emit(&summary)?;
    }
    Ok(())
}

pub fn profile(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let pc = config.profile.as_ref().expect("checked by require");
    let fc = config.filter.as_ref().expect("checked by require");
    let setup = setup(config)?;
    if setup.params.index_of(&pc.parameter).is_none() {
        return Err(CliError::Config(format!(
            "profile: unknown parameter `{}`",
            pc.parameter
        )));
    }
    if pc.values.is_empty() || pc.replicates == 0 {
        return Err(CliError::Config(
            "profile needs at least one value and one replicate".into(),
        ));
    }
    write_data(sink, &setup)?;
    let pool = RngStream::new(config.seed).child(purpose::POOL);
    let mut phi = Vec::new();
    let mut loglik = Vec::new();
    let mut reps = Vec::new();
    for (vi, &v) in pc.values.iter().enumerate() {
        for k in 0..pc.replicates {
            let rng = pool.child((vi * pc.replicates + k) as u64);
            let mut start = setup.params.clone();
            if pc.maximize {
                apply(&mut start, &config.start, "start")?;
            }
            start.set(&pc.parameter, v)?;
            let at = if pc.maximize {
                let mut ic = config.igirf.clone().expect("checked by require");
                ic.sigmas.remove(&pc.parameter);
                maximize(&setup, &start, &ic, rng.child(0))?.0
            } else {
                start
            };
            let run = run_engine(&setup, &at, fc, rng.child(1))?;
            sink.emit(&json!({
                "task": "profile",
                "parameter": pc.parameter,
                "phi": v,
                "replicate": k,
                "loglik": run.loglik,
                "estimate": estimate_json(&at),
                "wall_time_s": run.wall_time_s,
            }))?;
            phi.push(v);
            loglik.push(run.loglik);
            reps.push(k);
        }
    }
    let mut points = ProfilePoints::new(phi, loglik)?;
    points.replicate = Some(reps);
    points.write_csv(sink.file("profile.csv")?)?;
    if config.mcap.is_some() {
        mcap(config, sink)?;
    }
    Ok(())
}

fn mcap_options(mc: &McapConfig, n: usize) -> Result<McapOptions, CliError> {
    let mask = if mc.exclude.is_empty() {
        None
    } else {
        let mut m = vec![true; n];
        for &i in &mc.exclude {
            *m.get_mut(i)
                .ok_or_else(|| CliError::Config(format!("mcap.exclude: row {i} is out of range (0..{n})")))? = false;
        }
        Some(m)
    };
    Ok(McapOptions {
        alpha: mc.alpha,
        span: mc.span,
        transform: mc.transform,
        mask,
    })
}

pub fn mcap(config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let default = McapConfig {
        points: None,
        alpha: 0.05,
        span: girf::mcap::DEFAULT_SPAN,
        transform: Default::default(),
        exclude: Vec::new(),
    };
    let mc = config.mcap.as_ref().unwrap_or(&default);
    let path = mc.points.clone().unwrap_or_else(|| sink.path("profile.csv"));
    let file =
        std::fs::File::open(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let points = ProfilePoints::read_csv(file)?;
    let options = mcap_options(mc, points.len())?;
    let interval = mcap_interval(&points, &options)?;
    sink.json("mcap.json", &interval)?;
    let mut curve = sink.csv("mcap_curve.csv")?;
    curve.write_record(["phi", "smoothed_loglik"])?;
    for (p, l) in &interval.curve {
        curve.write_record([fmt(*p), fmt(*l)])?;
    }
    curve.flush()?;
    sink.emit(&json!({
        "task": "mcap",
        "points": points.len(),
        "phi_hat": interval.phi_hat,
        "lower": interval.lower,
        "upper": interval.upper,
        "lower_open": interval.lower_open,
        "upper_open": interval.upper_open,
        "se_mc": interval.se_mc,
        "se_stat": interval.se_stat,
        "delta": interval.delta,
    }))
}

pub fn dispatch(task: Task, config: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    config.require(task)?;
    match task {
        Task::Simulate => simulate(config, sink),
        Task::Filter => filter(config, sink),
        Task::Compare => compare(config, sink),
        Task::Igirf => igirf(config, sink),
        Task::Profile => profile(config, sink),
        Task::Mcap => mcap(config, sink),
    }
}
