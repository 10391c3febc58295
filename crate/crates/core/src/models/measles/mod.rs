//! Gravity-coupled SEIR network for measles case reports.
//!
//! Time is measured in days from 1 January of the data's start year. The
//! latent state holds (S, E, I, C) per city where C counts recoveries since
//! the last observation time.

mod data;

pub use data::{haversine_km, synthetic_network, CityInfo, MeaslesData, SyntheticSpec};

use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeasurementFamily, Model};
use crate::params::{ParamEntry, ParamKind, ParamVector, Transform};
use crate::rng::SimRng;
use crate::stats::discrete_normal_logpmf;

/// Proportion of the year taken up by school terms.
pub const SCHOOL_TERM_FRACTION: f64 = 0.739;
/// Calendar day on which the school cohort enters the susceptible pool.
pub const COHORT_ENTRY_DAY: f64 = 251.0;
pub const DAYS_PER_YEAR: f64 = 365.25;
/// Inclusive holiday ranges in calendar days.
pub const HOLIDAYS: [(u32, u32); 5] = [(0, 6), (100, 115), (199, 252), (300, 308), (356, 365)];

const R0: usize = 0;
const AMPLITUDE: usize = 1;
const MIXING: usize = 2;
const MU: usize = 3;
const NU_EI: usize = 4;
const NU_IR: usize = 5;
const SIGMA2: usize = 6;
const PSI: usize = 7;
const GRAVITY: usize = 8;
const COHORT: usize = 9;
/// Per-city blocks start here: rho, then s0, e0, i0.
const PER_CITY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeaslesParams {
    #[serde(rename = "R0")]
    pub r0: f64,
    pub a: f64,
    pub alpha: f64,
    pub mu: f64,
    pub nu_ei: f64,
    pub nu_ir: f64,
    pub sigma2: f64,
    pub psi: f64,
    #[serde(rename = "G")]
    pub gravity: f64,
    pub c: f64,
    pub rho: f64,
    pub s0: f64,
    pub e0: f64,
    pub i0: f64,
}

impl Default for MeaslesParams {
    fn default() -> Self {
        MeaslesParams {
            r0: 25.0,
            a: 0.3,
            alpha: 0.97,
            mu: 0.02 / DAYS_PER_YEAR,
            nu_ei: 1.0 / 8.0,
            nu_ir: 1.0 / 5.0,
            sigma2: 0.05,
            psi: 0.15,
            gravity: 100.0,
            c: 0.4,
            rho: 0.5,
            s0: 0.035,
            e0: 1e-4,
            i0: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeaslesNetwork {
    cities: Vec<CityInfo>,
    /// Gravity flux divided by the population of the receiving city, at G = 1.
    unit_flux: Vec<Vec<f64>>,
    births: Vec<std::collections::HashMap<i32, f64>>,
    start_year: i32,
    euler_dt: f64,
    params: ParamVector,
}

/// Mean transmission rate from the basic reproduction number.
pub fn beta_bar(r0: f64, nu_ir: f64, mu: f64) -> f64 {
    r0 * (nu_ir + mu)
}

/// Calendar day (0-based, fractional) of time `t` in days.
pub fn day_of_year(t: f64) -> f64 {
    t - DAYS_PER_YEAR * (t / DAYS_PER_YEAR).floor()
}

pub fn is_holiday(t: f64) -> bool {
    let day = day_of_year(t).floor() as u32;
    HOLIDAYS.iter().any(|&(a, b)| (a..=b).contains(&day))
}

/// Seasonal transmission coefficient for school terms and holidays.
pub fn seasonal_beta(t: f64, beta_bar: f64, amplitude: f64) -> f64 {
    let p = SCHOOL_TERM_FRACTION;
    if is_holiday(t) {
        (1.0 - 2.0 * p * amplitude) * beta_bar
    } else {
        (1.0 + 2.0 * (1.0 - p) * amplitude) * beta_bar
    }
}

/// v_kl = G (dbar / Pbar^2) P_k P_l / d_kl.
pub fn gravity_flux(gravity: f64, mean_distance: f64, mean_population: f64, pk: f64, pl: f64, dkl: f64) -> f64 {
    gravity * mean_distance / (mean_population * mean_population) * pk * pl / dkl
}

/// Expected infections per unit time in city `k`:
/// beta S_k [(I_k/P_k)^a + sum_l (v_kl / P_k) ((I_l/P_l)^a - (I_k/P_k)^a)],
/// with the bracket clamped at zero. `flux_over_p[l]` is v_kl / P_k.
pub fn infection_rate(beta: f64, mixing: f64, k: usize, s: &[f64], i: &[f64], pop: &[f64], flux_over_p: &[f64]) -> f64 {
    let prev = |l: usize| (i[l].max(0.0) / pop[l]).powf(mixing);
    let own = prev(k);
    let mut bracket = own;
    for l in 0..pop.len() {
        if l != k && flux_over_p[l] != 0.0 {
            bracket += flux_over_p[l] * (prev(l) - own);
        }
    }
    beta * s[k] * bracket.max(0.0)
}

/// Number of events over a step of length `delta` for a process with mean
/// rate `rate` and white-noise intensity `sigma2`: Poisson with a
/// Gamma(delta / sigma2, sigma2)-distributed time change, Poisson(delta rate)
/// when sigma2 = 0.
pub fn overdispersed_increment(rate: f64, delta: f64, sigma2: f64, rng: &mut SimRng) -> f64 {
    if !(rate > 0.0) || !(delta > 0.0) {
        return 0.0;
    }
    let clock = if sigma2 > 0.0 {
        match Gamma::new(delta / sigma2, sigma2) {
            Ok(g) => g.sample(rng),
            Err(_) => delta,
        }
    } else {
        delta
    };
    let mean = rate * clock;
    if !(mean > 0.0) {
        return 0.0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng),
        Err(_) => mean.round(),
    }
}

/// Log probability of `y` reports given `delta_nir` recoveries, under the
/// discrete normal with mean rho N and variance rho(1-rho)N + psi^2 rho^2 N^2 + 1.
pub fn measles_measurement_logpmf(rho: f64, psi: f64, y: f64, delta_nir: f64) -> f64 {
    let (m, v) = report_moments(rho, psi, delta_nir);
    discrete_normal_logpmf(y, m, v)
}

fn report_moments(rho: f64, psi: f64, n: f64) -> (f64, f64) {
    let n = n.max(0.0);
    (rho * n, rho * (1.0 - rho) * n + psi * psi * rho * rho * n * n + 1.0)
}

/// Susceptible recruitment for a year: continuous daily rate and cohort pulse.
pub fn susceptible_recruitment(births_four_years_before: f64, cohort: f64) -> (f64, f64) {
    (
        (1.0 - cohort) * births_four_years_before / DAYS_PER_YEAR,
        cohort * births_four_years_before,
    )
}

impl MeaslesNetwork {
    pub fn new(data: &MeaslesData, defaults: &MeaslesParams, euler_dt: f64) -> Result<Self> {
        let k = data.cities.len();
        if k == 0 {
            return Err(Error::Model("measles network needs at least one city".into()));
        }
        if !(euler_dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "euler_dt must be positive, got {euler_dt}"
            )));
        }
        let pops: Vec<f64> = data.cities.iter().map(|c| c.population).collect();
        let mean_pop = pops.iter().sum::<f64>() / k as f64;
        let mut pair_sum = 0.0;
        let mut pairs = 0.0;
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    if !(data.distances[a][b] > 0.0) {
                        return Err(Error::ZeroDistance(a, b));
                    }
                    pair_sum += data.distances[a][b];
                    pairs += 1.0;
                }
            }
        }
        let mean_dist = if pairs > 0.0 { pair_sum / pairs } else { 1.0 };
        let unit_flux = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        if a == b {
                            0.0
                        } else {
                            gravity_flux(1.0, mean_dist, mean_pop, pops[a], pops[b], data.distances[a][b]) / pops[a]
                        }
                    })
                    .collect()
            })
            .collect();

        let p = defaults;
        let mut entries = vec![
            ParamEntry::new("R0", p.r0, Transform::Log, ParamKind::Regular),
            ParamEntry::new("a", p.a, Transform::Logit, ParamKind::Regular),
            ParamEntry::new("alpha", p.alpha, Transform::Log, ParamKind::Regular),
            ParamEntry::new("mu", p.mu, Transform::Log, ParamKind::Fixed),
            ParamEntry::new("nu_EI", p.nu_ei, Transform::Log, ParamKind::Regular),
            ParamEntry::new("nu_IR", p.nu_ir, Transform::Log, ParamKind::Regular),
            ParamEntry::new("sigma2", p.sigma2, Transform::Log, ParamKind::Regular),
            ParamEntry::new("psi", p.psi, Transform::Log, ParamKind::Regular),
            ParamEntry::new("G", p.gravity, Transform::Log, ParamKind::Regular),
            ParamEntry::new("c", p.c, Transform::Logit, ParamKind::Fixed),
        ];
        for c in 1..=k {
            entries.push(ParamEntry::new(
                &format!("rho_{c}"),
                p.rho,
                Transform::Logit,
                ParamKind::Fixed,
            ));
        }
        for (name, v) in [("s0", p.s0), ("e0", p.e0), ("i0", p.i0)] {
            for c in 1..=k {
                entries.push(ParamEntry::new(
                    &format!("{name}_{c}"),
                    v,
                    Transform::Logit,
                    ParamKind::Ivp,
                ));
            }
        }
        Ok(MeaslesNetwork {
            cities: data.cities.clone(),
            unit_flux,
            births: data.births.clone(),
            start_year: data.start_year,
            euler_dt,
            params: ParamVector::new(entries)?,
        })
    }

    pub fn num_cities(&self) -> usize {
        self.cities.len()
    }

    pub fn cities(&self) -> &[CityInfo] {
        &self.cities
    }

    /// v_kl at gravitation constant `gravity`.
    pub fn flux(&self, gravity: f64, k: usize, l: usize) -> f64 {
        gravity * self.unit_flux[k][l] * self.cities[k].population
    }

    fn births(&self, k: usize, t: f64) -> Result<f64> {
        let year = self.start_year + (t / DAYS_PER_YEAR).floor() as i32 - 4;
        self.births[k].get(&year).copied().ok_or(Error::MissingBirthData {
            city: self.cities[k].name.clone(),
            year,
        })
    }

    fn euler_steps(&self, len: f64) -> usize {
        ((len / self.euler_dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Whether the cohort entry time falls in (t, t + h].
    fn cohort_pulse_in(t: f64, h: f64) -> bool {
        let year_start = DAYS_PER_YEAR * (t / DAYS_PER_YEAR).floor();
        [year_start, year_start + DAYS_PER_YEAR]
            .iter()
            .any(|&y0| t < y0 + COHORT_ENTRY_DAY && y0 + COHORT_ENTRY_DAY <= t + h)
    }

    fn advance(
        &self,
        theta: &[f64],
        t_from: f64,
        t_to: f64,
        x: &mut [f64],
        mut rng: Option<&mut SimRng>,
    ) -> Result<()> {
        let len = t_to - t_from;
        if len == 0.0 {
            return Ok(());
        }
        let k_count = self.num_cities();
        let steps = self.euler_steps(len);
        let h = len / steps as f64;
        let bbar = beta_bar(theta[R0], theta[NU_IR], theta[MU]);
        let pops: Vec<f64> = self.cities.iter().map(|c| c.population).collect();
        let gravity = theta[GRAVITY];
        let mut flux_row = vec![0.0; k_count];
        let mut s = vec![0.0; k_count];
        let mut i = vec![0.0; k_count];
        for step in 0..steps {
            let t = t_from + step as f64 * h;
            let beta = seasonal_beta(t, bbar, theta[AMPLITUDE]);
            let pulse = Self::cohort_pulse_in(t, h);
            for k in 0..k_count {
                s[k] = x[4 * k];
                i[k] = x[4 * k + 2];
            }
            for k in 0..k_count {
                for (f, u) in flux_row.iter_mut().zip(&self.unit_flux[k]) {
                    *f = gravity * u;
                }
                let lambda = infection_rate(beta, theta[MIXING], k, &s, &i, &pops, &flux_row);
                let (sk, ek, ik) = (x[4 * k], x[4 * k + 1], x[4 * k + 2]);
                let b = self.births(k, t)?;
                let (daily, cohort) = susceptible_recruitment(b, theta[COHORT]);
                let mu = theta[MU];
                let sig = theta[SIGMA2];
                let (n_se, d_s, n_ei, d_e, n_ir, d_i, mut births) = match rng.as_deref_mut() {
                    Some(r) => {
                        let n_se = overdispersed_increment(lambda, h, sig, r).min(sk);
                        let d_s = overdispersed_increment(mu * sk, h, sig, r).min(sk - n_se);
                        let n_ei = overdispersed_increment(theta[NU_EI] * ek, h, sig, r).min(ek);
                        let d_e = overdispersed_increment(mu * ek, h, sig, r).min(ek - n_ei);
                        let n_ir = overdispersed_increment(theta[NU_IR] * ik, h, sig, r).min(ik);
                        let d_i = overdispersed_increment(mu * ik, h, sig, r).min(ik - n_ir);
                        let births = overdispersed_increment(daily, h, 0.0, r);
                        (n_se, d_s, n_ei, d_e, n_ir, d_i, births)
                    }
                    None => {
                        let n_se = (lambda * h).min(sk);
                        let d_s = (mu * sk * h).min(sk - n_se);
                        let n_ei = (theta[NU_EI] * ek * h).min(ek);
                        let d_e = (mu * ek * h).min(ek - n_ei);
                        let n_ir = (theta[NU_IR] * ik * h).min(ik);
                        let d_i = (mu * ik * h).min(ik - n_ir);
                        (n_se, d_s, n_ei, d_e, n_ir, d_i, daily * h)
                    }
                };
                if pulse {
                    births += match rng {
                        Some(_) => cohort.round(),
                        None => cohort,
                    };
                }
                let new_s = sk - n_se - d_s;
                let new_e = ek + n_se - n_ei - d_e;
                let new_i = ik + n_ei - n_ir - d_i;
                births = births.min((pops[k] - new_s - new_e - new_i).max(0.0));
                x[4 * k] = new_s + births;
                x[4 * k + 1] = new_e;
                x[4 * k + 2] = new_i;
                x[4 * k + 3] += n_ir;
            }
        }
        Ok(())
    }
}

impl Model for MeaslesNetwork {
    fn name(&self) -> &str {
        "measles"
    }

    fn dim_latent(&self) -> usize {
        4 * self.num_cities()
    }

    fn dim_obs(&self) -> usize {
        self.num_cities()
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn init_sample(&self, theta: &[f64], x: &mut [f64], _rng: &mut SimRng) -> Result<()> {
        let k_count = self.num_cities();
        for (k, city) in self.cities.iter().enumerate() {
            let frac = |block: usize| theta[PER_CITY + block * k_count + k];
            let p = city.population;
            let s = (frac(1) * p).round();
            let e = (frac(2) * p).round();
            let i = (frac(3) * p).round();
            if s + e + i > p {
                return Err(Error::InvalidParams(format!(
                    "initial fractions exceed the population of {}",
                    city.name
                )));
            }
            x[4 * k..4 * k + 4].copy_from_slice(&[s, e, i, 0.0]);
        }
        Ok(())
    }

    fn transition(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64], rng: &mut SimRng) -> Result<()> {
        self.advance(theta, t_from, t_to, x, Some(rng))
    }

    fn skeleton(&self, theta: &[f64], t_from: f64, t_to: f64, x: &mut [f64]) -> Result<()> {
        self.advance(theta, t_from, t_to, x, None)
    }

    fn measurement_logdensity(&self, theta: &[f64], _k: usize, y: &[f64], x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (k, &yk) in y.iter().enumerate() {
            if !yk.is_nan() {
                total += measles_measurement_logpmf(theta[PER_CITY + k], theta[PSI], yk, x[4 * k + 3]);
            }
        }
        Ok(total)
    }

    fn measurement_sample(&self, theta: &[f64], _k: usize, x: &[f64], y: &mut [f64], rng: &mut SimRng) -> Result<()> {
        for (k, yk) in y.iter_mut().enumerate() {
            let (m, v) = report_moments(theta[PER_CITY + k], theta[PSI], x[4 * k + 3]);
            let draw = Normal::new(m, v.sqrt())
                .map_err(|e| Error::Model(e.to_string()))?
                .sample(rng);
            *yk = draw.round().max(0.0);
        }
        Ok(())
    }

    fn measurement_moments(&self, theta: &[f64], _k: usize, x: &[f64], mean: &mut [f64], var: &mut [f64]) {
        for k in 0..mean.len() {
            let (m, v) = report_moments(theta[PER_CITY + k], theta[PSI], x[4 * k + 3]);
            mean[k] = m;
            var[k] = v;
        }
    }

    fn measurement_family(&self) -> MeasurementFamily {
        MeasurementFamily::DiscreteNormal
    }

    fn reset_after_observation(&self, x: &mut [f64]) {
        for k in 0..self.num_cities() {
            x[4 * k + 3] = 0.0;
        }
    }
}
