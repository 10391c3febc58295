//! Iterated guided filtering for maximum likelihood estimation.
//!
//! Each iteration perturbs a swarm of parameter vectors, filters the data on
//! the extended state (latent state, parameters) with the parameters
//! perturbed again at every intermediate time, and keeps the terminal
//! parameter swarm. Perturbation sizes shrink geometrically.

use std::collections::BTreeMap;
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{run_filter, GirfConfig, Perturbation, ThetaMode};
use crate::error::{Error, Result};
use crate::grid::{GridStep, TimeGrid};
use crate::guide::GuideSpec;
use crate::model::{Model, ObsSeries};
use crate::params::{ParamKind, ParamVector, Transform};
use crate::resampling::ResampleScheme;
use crate::rng::{purpose, RngStream, SimRng};
use crate::stats::log_mean_exp;

pub const DEFAULT_COOLING: f64 = 0.92;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternation {
    /// IVPs and regular parameters are estimated together.
    #[default]
    Joint,
    /// Rounds of IVP-only passes over a data prefix followed by regular
    /// parameter passes over the full data.
    IvpThenRegular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Start of a filtering pass: every non-fixed parameter moves.
    Initial,
    /// Intermediate times: only regular parameters move.
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgirfConfig {
    #[serde(rename = "M")]
    pub iterations: usize,
    /// Initial perturbation sd on the estimation scale, by parameter name.
    /// Parameters not listed are not perturbed.
    pub sigmas: BTreeMap<String, f64>,
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    #[serde(rename = "J")]
    pub particles: usize,
    #[serde(default = "one")]
    pub islands: usize,
    #[serde(default)]
    pub scheme: ResampleScheme,
    pub guide: GuideSpec,
    #[serde(default)]
    pub alternation: Alternation,
    /// Number of observations used by IVP-only passes.
    #[serde(default)]
    pub ivp_data_prefix: Option<usize>,
    #[serde(default = "one")]
    pub rounds: usize,
    #[serde(default = "one")]
    pub ivp_iterations: usize,
    #[serde(default = "one")]
    pub ivp_islands: usize,
    #[serde(default)]
    pub ivp_particles: Option<usize>,
    #[serde(default)]
    pub point_estimate: PointEstimate,
}

fn default_cooling() -> f64 {
    DEFAULT_COOLING
}

fn one() -> usize {
    1
}

impl IgirfConfig {
    pub fn new(iterations: usize, particles: usize, guide: GuideSpec) -> Self {
        IgirfConfig {
            iterations,
            sigmas: BTreeMap::new(),
            cooling: DEFAULT_COOLING,
            particles,
            islands: 1,
            scheme: ResampleScheme::default(),
            guide,
            alternation: Alternation::Joint,
            ivp_data_prefix: None,
            rounds: 1,
            ivp_iterations: 1,
            ivp_islands: 1,
            ivp_particles: None,
            point_estimate: PointEstimate::Mean,
        }
    }

    pub fn with_sigma(mut self, name: &str, sd: f64) -> Self {
        self.sigmas.insert(name.to_string(), sd);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::Config(format!(
                "cooling factor must lie in (0, 1], got {}",
                self.cooling
            )));
        }
        if let Some((name, sd)) = self.sigmas.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!(
                "perturbation sd for `{name}` must be finite and nonnegative, got {sd}"
            )));
        }
        if self.rounds == 0 || self.ivp_iterations == 0 || self.ivp_islands == 0 {
            return Err(Error::Config(
                "rounds, ivp_iterations and ivp_islands must be positive".into(),
            ));
        }
        self.girf_config(self.particles, self.islands).validate()
    }

    /// Perturbation sds aligned with the parameter vector.
    pub fn sigma_vector(&self, template: &ParamVector) -> Result<Vec<f64>> {
        if let Some(name) = self.sigmas.keys().find(|n| template.index_of(n).is_none()) {
            return Err(Error::Config(format!(
                "perturbation sd given for unknown parameter `{name}`"
            )));
        }
        Ok(template
            .names()
            .map(|n| self.sigmas.get(n).copied().unwrap_or(0.0))
            .collect())
    }

    /// sd multiplier at iteration `m` (1-based).
    pub fn cooling_factor(&self, m: usize) -> f64 {
        self.cooling.powi(m as i32 - 1)
    }

    fn girf_config(&self, particles: usize, islands: usize) -> GirfConfig {
        GirfConfig {
            particles,
            islands,
            scheme: self.scheme,
            guide: self.guide.clone(),
            record_filter_means: false,
            record_ess: true,
            record_step_means: false,
            snapshot_at: None,
        }
    }
}

/// A population of parameter vectors sharing one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSwarm {
    template: ParamVector,
    members: Vec<Vec<f64>>,
    iteration: usize,
}

impl ParamSwarm {
    /// `size` copies of `template`.
    pub fn new(template: &ParamVector, size: usize) -> Self {
        ParamSwarm {
            template: template.clone(),
            members: vec![template.values(); size],
            iteration: 0,
        }
    }

    /// Natural-scale members. Fixed parameters must equal the template value.
    pub fn from_members(template: &ParamVector, members: Vec<Vec<f64>>) -> Result<Self> {
        let entries = template.entries();
        for m in &members {
            if m.len() != entries.len() {
                return Err(Error::InvalidParams("swarm member has the wrong length".into()));
            }
            for (e, &v) in entries.iter().zip(m) {
                if e.kind == ParamKind::Fixed && v.to_bits() != e.value.to_bits() {
                    return Err(Error::InvalidParams(format!(
                        "fixed parameter `{}` varies across the swarm",
                        e.name
                    )));
                }
                if !e.transform.check(v) {
                    return Err(Error::DomainError {
                        name: e.name.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(ParamSwarm {
            template: template.clone(),
            members,
            iteration: 0,
        })
    }

    pub fn template(&self) -> &ParamVector {
        &self.template
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn transforms(&self) -> Vec<Transform> {
        self.template.entries().iter().map(|e| e.transform).collect()
    }

    fn estimation_column(&self, i: usize) -> Vec<f64> {
        let t = self.template.entries()[i].transform;
        self.members.iter().map(|m| t.forward(m[i])).collect()
    }

    /// Per-parameter mean on the estimation scale.
    pub fn mean_estimation(&self) -> Vec<f64> {
        (0..self.template.len())
            .map(|i| crate::stats::mean(&self.estimation_column(i)))
            .collect()
    }

    /// Per-parameter sample sd on the estimation scale.
    pub fn sd_estimation(&self) -> Vec<f64> {
        (0..self.template.len())
            .map(|i| {
                let col = self.estimation_column(i);
                if col.len() < 2 {
                    0.0
                } else {
                    crate::stats::sample_variance(&col).sqrt()
                }
            })
            .collect()
    }

    /// Swarm centre on the estimation scale mapped back to the natural
    /// scale. Fixed parameters keep their values.
    pub fn point_estimate(&self, rule: PointEstimate) -> Result<ParamVector> {
        let values: Vec<f64> = self
            .template
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if e.kind == ParamKind::Fixed {
                    return e.value;
                }
                let mut col = self.estimation_column(i);
                let centre = match rule {
                    PointEstimate::Mean => crate::stats::mean(&col),
                    PointEstimate::Median => {
                        col.sort_by(f64::total_cmp);
                        crate::stats::quantile_sorted(&col, 0.5)
                    }
                };
                e.transform.inverse(centre)
            })
            .collect();
        self.template.with_values(&values)
    }

    /// Swarm of `size` members taken cyclically from this one.
    pub fn resized(&self, size: usize) -> ParamSwarm {
        ParamSwarm {
            template: self.template.clone(),
            members: (0..size).map(|j| self.members[j % self.len()].clone()).collect(),
            iteration: self.iteration,
        }
    }

    /// Sets parameter `name` to `value` in every member.
    pub fn set_all(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self
            .template
            .index_of(name)
            .ok_or_else(|| Error::InvalidParams(format!("unknown parameter `{name}`")))?;
        for m in &mut self.members {
            m[i] = value;
        }
        Ok(())
    }
}

fn perturb_member(
    values: &mut [f64],
    sigma: &[f64],
    kinds: &[ParamKind],
    transforms: &[Transform],
    stage: Stage,
    rng: &mut SimRng,
) {
    for i in 0..values.len() {
        let moves = match kinds[i] {
            ParamKind::Fixed => false,
            ParamKind::Ivp => stage == Stage::Initial,
            ParamKind::Regular => true,
        };
        if moves && sigma[i] > 0.0 {
            let e: f64 = StandardNormal.sample(rng);
            values[i] = transforms[i].inverse(transforms[i].forward(values[i]) + sigma[i] * e);
        }
    }
}

/// Gaussian perturbation on the estimation scale. Member `j` draws from
/// `rng.child(j)`.
pub fn perturb_params(swarm: &ParamSwarm, sigma: &[f64], stage: Stage, rng: RngStream) -> Result<ParamSwarm> {
    if sigma.len() != swarm.template.len() {
        return Err(Error::Config(
            "perturbation sds do not match the parameter vector".into(),
        ));
    }
    let kinds: Vec<ParamKind> = swarm.template.entries().iter().map(|e| e.kind).collect();
    let transforms = swarm.transforms();
    let mut out = swarm.clone();
    for (j, m) in out.members.iter_mut().enumerate() {
        perturb_member(m, sigma, &kinds, &transforms, stage, &mut rng.child(j as u64).rng());
    }
    Ok(out)
}

struct IntermediateKernel {
    sigma: Vec<f64>,
    kinds: Vec<ParamKind>,
    transforms: Vec<Transform>,
}

impl Perturbation for IntermediateKernel {
    fn perturb(&self, _step: &GridStep, z: &mut [f64], theta: &mut [f64], rng: &mut SimRng) {
        for i in 0..theta.len() {
            if self.kinds[i] == ParamKind::Regular && self.sigma[i] > 0.0 {
                let e: f64 = StandardNormal.sample(rng);
                z[i] += self.sigma[i] * e;
                theta[i] = self.transforms[i].inverse(z[i]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub island_logliks: Vec<f64>,
    /// Point estimate after the iteration.
    pub estimate: Vec<f64>,
    /// Estimation-scale swarm mean and sd.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub min_ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgirfOutput {
    pub swarm: ParamSwarm,
    pub trace: Vec<IterationRecord>,
    pub estimate: ParamVector,
}

impl IgirfOutput {
    pub fn logliks(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.loglik).collect()
    }

    /// `iteration,loglik,<name>_mean,<name>_sd,...` with means and sds on the
    /// estimation scale.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let names: Vec<&str> = self.swarm.template.names().collect();
        let mut header = vec!["iteration".to_string(), "loglik".to_string()];
        for n in &names {
            header.push(format!("{n}_mean"));
            header.push(format!("{n}_sd"));
        }
        out.write_record(&header)?;
        for r in &self.trace {
            let mut row = vec![r.iteration.to_string(), format!("{:.16e}", r.loglik)];
            for i in 0..names.len() {
                row.push(format!("{:.16e}", r.mean[i]));
                row.push(format!("{:.16e}", r.sd[i]));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One filtering pass per iteration over `data`, perturbing with `sigma`
/// scaled by the cooling schedule.
#[allow(clippy::too_many_arguments)]
fn iterate<M: Model + ?Sized>(
    model: &M,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &IgirfConfig,
    sigma: &[f64],
    girf: &GirfConfig,
    iterations: usize,
    init: &ParamSwarm,
    rng: RngStream,
) -> Result<IgirfOutput> {
    if !init.template.same_structure(model.params()) {
        return Err(Error::InvalidParams(format!(
            "swarm does not match the schema of model `{}`",
            model.name()
        )));
    }
    let (j_count, islands) = (girf.particles, girf.islands);
    if init.len() != j_count * islands {
        return Err(Error::Config(format!(
            "swarm has {} members, expected J * islands = {}",
            init.len(),
            j_count * islands
        )));
    }
    let kinds: Vec<ParamKind> = init.template.entries().iter().map(|e| e.kind).collect();
    let transforms = init.transforms();
    let island_config = GirfConfig {
        islands: 1,
        ..girf.clone()
    };
    let mut swarm = init.clone();
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let m = swarm.iteration + 1;
        let scale = config.cooling_factor(m);
        let sigma_m: Vec<f64> = sigma.iter().map(|s| s * scale).collect();
        let it = rng.child(purpose::ITERATION).child(m as u64);
        let started = perturb_params(&swarm, &sigma_m, Stage::Initial, it.child(purpose::PERTURB).child(0))?;
        let kernel = IntermediateKernel {
            sigma: sigma_m,
            kinds: kinds.clone(),
            transforms: transforms.clone(),
        };
        let mut members = Vec::with_capacity(swarm.len());
        let mut island_logliks = Vec::with_capacity(islands);
        let mut min_ess = f64::INFINITY;
        for i in 0..islands {
            let block = &started.members[i * j_count..(i + 1) * j_count];
            let mut packed = Vec::with_capacity(2 * block.len() * kinds.len());
            for v in block {
                packed.extend(v.iter().zip(&transforms).map(|(x, t)| t.forward(*x)));
                packed.extend_from_slice(v);
            }
            let stream = if islands == 1 {
                it
            } else {
                it.child(purpose::ISLAND).child(i as u64)
            };
            let mode = ThetaMode::Swarm {
                init: &packed,
                perturbation: &kernel,
            };
            let out = run_filter(model, mode, data, grid, &island_config, stream).map_err(|e| Error::Iteration {
                iteration: m,
                source: Box::new(e),
            })?;
            island_logliks.push(out.loglik);
            min_ess = out.ess_trace.iter().copied().fold(min_ess, f64::min);
            members.extend(out.terminal_params.expect("swarm filtering returns parameters"));
        }
        swarm = ParamSwarm {
            template: swarm.template.clone(),
            members,
            iteration: m,
        };
        trace.push(IterationRecord {
            iteration: m,
            loglik: log_mean_exp(&island_logliks),
            island_logliks,
            estimate: swarm.point_estimate(config.point_estimate)?.values(),
            mean: swarm.mean_estimation(),
            sd: swarm.sd_estimation(),
            min_ess,
        });
    }
    let estimate = swarm.point_estimate(config.point_estimate)?;
    Ok(IgirfOutput { swarm, trace, estimate })
}

/// Runs `config.iterations` iterations of iterated guided filtering starting
/// from `init` (`J * islands` members). Iteration `m` uses perturbation sds
/// `sigma * cooling^(m - 1)`, counting from the swarm's completed iterations.
pub fn igirf_run<M: Model + ?Sized>(
    model: &M,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &IgirfConfig,
    init: &ParamSwarm,
    rng: RngStream,
) -> Result<IgirfOutput> {
    config.validate()?;
    let sigma = config.sigma_vector(&init.template)?;
    let girf = config.girf_config(config.particles, config.islands);
    iterate(model, data, grid, config, &sigma, &girf, config.iterations, init, rng)
}

/// IVP-only passes over the first `config.ivp_data_prefix` observations
/// with `config.ivp_islands` islands. Regular parameters are neither
/// perturbed nor changed: each member keeps its own regular values.
pub fn estimate_ivps<M: Model + ?Sized>(
    model: &M,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &IgirfConfig,
    swarm: &ParamSwarm,
    rng: RngStream,
) -> Result<IgirfOutput> {
    config.validate()?;
    let prefix = config.ivp_data_prefix.unwrap_or(data.len());
    if prefix == 0 || prefix > data.len() {
        return Err(Error::Config(format!(
            "IVP data prefix {prefix} must lie in 1..={}",
            data.len()
        )));
    }
    let mut sigma = config.sigma_vector(&swarm.template)?;
    for (s, e) in sigma.iter_mut().zip(swarm.template.entries()) {
        if e.kind != ParamKind::Ivp {
            *s = 0.0;
        }
    }
    let particles = config.ivp_particles.unwrap_or(config.particles);
    let girf = config.girf_config(particles, config.ivp_islands);
    let short_grid = grid.truncated(prefix)?;
    let short_data: ObsSeries = data[..prefix].to_vec();
    let mut out = iterate(
        model,
        &short_data,
        &short_grid,
        config,
        &sigma,
        &girf,
        config.ivp_iterations,
        swarm,
        rng,
    )?;
    let ivp: Vec<usize> = (0..swarm.template.len())
        .filter(|&i| swarm.template.entries()[i].kind == ParamKind::Ivp)
        .collect();
    let mut members = swarm.members.clone();
    for (m, new) in members.iter_mut().zip(&out.swarm.members) {
        for &i in &ivp {
            m[i] = new[i];
        }
    }
    out.swarm.members = members;
    out.estimate = out.swarm.point_estimate(config.point_estimate)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternatingOutput {
    pub estimate: ParamVector,
    pub regular: Vec<IgirfOutput>,
    pub ivp: Vec<IgirfOutput>,
}

/// Alternates IVP passes on a data prefix with regular-parameter passes on
/// the full data, `config.rounds` times. Each IVP pass starts from the
/// current point estimate of the regular parameters, and each regular pass
/// starts from the IVP point estimate.
pub fn igirf_alternating<M: Model + ?Sized>(
    model: &M,
    data: &ObsSeries,
    grid: &TimeGrid,
    config: &IgirfConfig,
    init: &ParamSwarm,
    rng: RngStream,
) -> Result<AlternatingOutput> {
    config.validate()?;
    let names: Vec<String> = init.template.names().map(str::to_string).collect();
    let kinds: Vec<ParamKind> = init.template.entries().iter().map(|e| e.kind).collect();
    let mut sigma_regular = config.clone();
    for (n, k) in names.iter().zip(&kinds) {
        if *k == ParamKind::Ivp {
            sigma_regular.sigmas.remove(n);
        }
    }
    let ivp_size = config.ivp_islands * config.ivp_particles.unwrap_or(config.particles);
    let mut regular = init.clone();
    let mut ivp_swarm = init.resized(ivp_size);
    let mut out = AlternatingOutput {
        estimate: init.point_estimate(config.point_estimate)?,
        regular: Vec::new(),
        ivp: Vec::new(),
    };
    for r in 0..config.rounds {
        let centre = regular.point_estimate(config.point_estimate)?;
        for (i, k) in kinds.iter().enumerate() {
            if *k == ParamKind::Regular {
                for m in &mut ivp_swarm.members {
                    m[i] = centre.entries()[i].value;
                }
            }
        }
        let stage = rng.child(r as u64);
        let ivp_out = estimate_ivps(model, data, grid, config, &ivp_swarm, stage.child(0))?;
        ivp_swarm = ivp_out.swarm.clone();
        let ivp_centre = ivp_out.estimate.clone();
        for (i, k) in kinds.iter().enumerate() {
            if *k == ParamKind::Ivp {
                regular.set_all(&names[i], ivp_centre.entries()[i].value)?;
            }
        }
        let reg_out = igirf_run(model, data, grid, &sigma_regular, &regular, stage.child(1))?;
        regular = reg_out.swarm.clone();
        out.estimate = reg_out.estimate.clone();
        out.ivp.push(ivp_out);
        out.regular.push(reg_out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamEntry;

    fn template() -> ParamVector {
        ParamVector::new(vec![
            ParamEntry::new("a", 0.5, Transform::Identity, ParamKind::Regular),
            ParamEntry::new("s", 2.0, Transform::Log, ParamKind::Regular),
            ParamEntry::new("x0", 1.0, Transform::Identity, ParamKind::Ivp),
            ParamEntry::new("f", 0.3, Transform::Logit, ParamKind::Fixed),
        ])
        .unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let sw = ParamSwarm::new(&template(), 10);
        let out = perturb_params(&sw, &[0.0; 4], Stage::Initial, RngStream::new(1)).unwrap();
        assert_eq!(out, sw);
    }

    #[test]
    fn stages_respect_kinds() {
        let sw = ParamSwarm::new(&template(), 50);
        let sigma = [0.5; 4];
        let mid = perturb_params(&sw, &sigma, Stage::Intermediate, RngStream::new(2)).unwrap();
        let start = perturb_params(&sw, &sigma, Stage::Initial, RngStream::new(2)).unwrap();
        for (m, s) in mid.members().iter().zip(start.members()) {
            assert_eq!(m[2], 1.0);
            assert_eq!(m[3].to_bits(), 0.3f64.to_bits());
            assert_eq!(s[3].to_bits(), 0.3f64.to_bits());
            assert!(m[1] > 0.0);
        }
        assert!(start.members().iter().any(|s| s[2] != 1.0));
        assert!(mid.members().iter().any(|m| m[0] != 0.5));
    }

    #[test]
    fn point_estimate_uses_estimation_scale() {
        let t = template();
        let members = vec![vec![0.0, 1.0, 1.0, 0.3], vec![1.0, 100.0, 3.0, 0.3]];
        let sw = ParamSwarm::from_members(&t, members).unwrap();
        let est = sw.point_estimate(PointEstimate::Mean).unwrap();
        assert!((est.get("s").unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(est.get("a"), Some(0.5));
        assert_eq!(est.get("f"), Some(0.3));
    }

    #[test]
    fn fixed_values_must_match() {
        let t = template();
        assert!(ParamSwarm::from_members(&t, vec![vec![0.0, 1.0, 1.0, 0.4]]).is_err());
    }

    #[test]
    fn cooling_is_geometric() {
        let c = IgirfConfig::new(5, 10, GuideSpec::Bootstrap);
        assert_eq!(c.cooling_factor(1), 1.0);
        assert!((c.cooling_factor(4) - 0.92f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn unknown_sigma_name_is_rejected() {
        let c = IgirfConfig::new(1, 10, GuideSpec::Bootstrap).with_sigma("nope", 0.1);
        assert!(matches!(c.sigma_vector(&template()), Err(Error::Config(_))));
    }

    proptest::proptest! {
        #[test]
        fn log_parameters_stay_positive(sd in 0.0f64..20.0, seed in 0u64..1000) {
            let sw = ParamSwarm::new(&template(), 20);
            let out = perturb_params(&sw, &[0.0, sd, 0.0, 0.0], Stage::Intermediate, RngStream::new(seed)).unwrap();
            proptest::prop_assert!(out.members().iter().all(|m| m[1] > 0.0));
        }
    }
}
