//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero when any criterion fails. `GIRF_ACCEPTANCE=3,6` restricts the run
//! to the listed criteria.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use girf::guide::{Covariance, LookaheadSpec};
use girf::igirf::{igirf_run, IgirfConfig, ParamSwarm};
use girf::mcap::{mcap_cutoff, mcap_interval, McapOptions, ProfilePoints};
use girf::models::measles::{overdispersed_increment, synthetic_network, MeaslesNetwork, MeaslesParams, SyntheticSpec};
use girf::models::{CorrelatedBm, CorrelatedBmConfig, Lorenz96, Lorenz96Config};
use girf::oracles::{enkf_filter, kalman_filter, kalman_guided_oracle, LinearGaussianSpec};
use girf::{
    build_time_grid, configure_apf, girf_filter, run_islands, simulate_pomp, GirfConfig, GuideSpec, Model, ObsSeries,
    ResampleScheme, RngStream, TimeGrid,
};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> girf::Result<Outcome>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: Check,
}

const fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        id: 1,
        name: "likelihood unbiasedness",
        budget: minutes(2),
        check: unbiasedness,
    },
    Criterion {
        id: 2,
        name: "GIRF vs APF at d=50",
        budget: minutes(10),
        check: girf_vs_apf,
    },
    Criterion {
        id: 3,
        name: "filter-mean MSE scaling",
        budget: minutes(20),
        check: mse_scaling,
    },
    Criterion {
        id: 4,
        name: "correlated guide robustness",
        budget: minutes(10),
        check: correlation_robustness,
    },
    Criterion {
        id: 5,
        name: "intermediate guided laws",
        budget: minutes(2),
        check: intermediate_laws,
    },
    Criterion {
        id: 6,
        name: "Lorenz GIRF vs EnKF",
        budget: minutes(30),
        check: lorenz_vs_enkf,
    },
    Criterion {
        id: 7,
        name: "iterated filtering MLE",
        budget: minutes(5),
        check: igirf_mle,
    },
    Criterion {
        id: 8,
        name: "MCAP cutoff",
        budget: Duration::from_secs(1),
        check: mcap_exactness,
    },
    Criterion {
        id: 9,
        name: "measles network",
        budget: minutes(10),
        check: measles_properties,
    },
    Criterion {
        id: 10,
        name: "thread-count determinism",
        budget: minutes(30),
        check: determinism,
    },
];

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("GIRF_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for c in CRITERIA
        .iter()
        .filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.id)))
    {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) if elapsed > c.budget => (false, format!("{} (over the {:?} budget)", o.detail, c.budget)),
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {} [{:.1}s] {}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn cbm(d: usize, alpha: f64) -> CorrelatedBm {
    CorrelatedBm::new(&CorrelatedBmConfig::new(d, alpha)).expect("valid CBM")
}

fn unit_times(n: usize, spacing: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * spacing).collect()
}

fn lg_spec<M: Model>(model: &M) -> LinearGaussianSpec {
    model
        .linear_gaussian(&model.params().values())
        .expect("linear Gaussian model")
}

fn simulate<M: Model>(model: &M, grid: &TimeGrid, seed: u64) -> girf::Result<ObsSeries> {
    Ok(simulate_pomp(model, model.params(), grid, RngStream::new(seed))?.observations)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// CBM d=2: the likelihood estimate averages to the Kalman likelihood.
fn unbiasedness() -> girf::Result<Outcome> {
    let model = cbm(2, 0.0);
    let grid = build_time_grid(0.0, &unit_times(5, 1.0), 2)?;
    let data = simulate(&model, &grid, 101)?;
    let truth = kalman_filter(&lg_spec(&model), &grid, &data)?.loglik;
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in [ResampleScheme::Systematic, ResampleScheme::Multinomial] {
        let mut config = GirfConfig::new(200, GuideSpec::exact_gaussian(2, Covariance::Exact));
        config.scheme = scheme;
        config.record_ess = false;
        let root = RngStream::new(7);
        let ratios: Vec<f64> = (0..500)
            .map(|r| {
                girf_filter(&model, model.params(), &data, &grid, &config, root.child(r))
                    .map(|o| (o.loglik - truth).exp())
            })
            .collect::<girf::Result<_>>()?;
        let (m, sd) = mean_sd(&ratios);
        let se = sd / (ratios.len() as f64).sqrt();
        let ok = (m - 1.0).abs() <= 3.0 * se;
        pass &= ok;
        detail.push(format!("{scheme:?}: mean lik ratio {m:.4} (se {se:.4})"));
    }
    Ok(Outcome {
        pass,
        detail: detail.join("; "),
    })
}

/// CBM d=50: GIRF with S=d against the auxiliary particle filter with d
/// times as many particles.
fn girf_vs_apf() -> girf::Result<Outcome> {
    let d = 50;
    let model = cbm(d, 0.0);
    let grid = build_time_grid(0.0, &unit_times(50, 1.0), d)?;
    let data = simulate(&model, &grid, 202)?;
    let truth = kalman_filter(&lg_spec(&model), &grid, &data)?.loglik;

    let mut config = GirfConfig::new(2000, GuideSpec::exact_gaussian(2, Covariance::Exact));
    config.record_ess = false;
    let t = Instant::now();
    let girf = girf_filter(&model, model.params(), &data, &grid, &config, RngStream::new(21))?.loglik;
    let girf_time = t.elapsed().as_secs_f64();

    let mut apf_config = GirfConfig::new(2000 * d, configure_apf());
    apf_config.record_ess = false;
    let t = Instant::now();
    let apf = girf_filter(&model, model.params(), &data, &grid, &apf_config, RngStream::new(22))?.loglik;
    let apf_time = t.elapsed().as_secs_f64();

    let girf_err = (girf - truth).abs();
    let apf_err = (apf - truth).abs();
    Ok(Outcome {
        pass: girf_err <= 30.0 && apf_err >= 10.0 * girf_err,
        detail: format!(
            "Kalman {truth:.1}, GIRF {girf:.1} ({girf_time:.0}s), APF {apf:.1} with J={} ({apf_time:.0}s)",
            2000 * d
        ),
    })
}

fn terminal_mse(d: usize, replicates: u64, seed: u64) -> girf::Result<f64> {
    let model = cbm(d, 0.0);
    let grid = build_time_grid(0.0, &unit_times(50, 1.0), d)?;
    let data = simulate(&model, &grid, seed)?;
    let kf = kalman_filter(&lg_spec(&model), &grid, &data)?;
    let target = kf.means.last().expect("observations");
    let mut config = GirfConfig::new(1000, GuideSpec::exact_gaussian(2, Covariance::Exact));
    config.islands = 5;
    config.record_filter_means = true;
    config.record_ess = false;
    let root = RngStream::new(seed + 1);
    let mut total = 0.0;
    for r in 0..replicates {
        let out = run_islands(&model, model.params(), &data, &grid, &config, root.child(r))?;
        let means = out.filter_means.expect("recorded");
        let last = means.last().expect("observations");
        total += last
            .iter()
            .zip(target.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / d as f64;
    }
    Ok(total / replicates as f64)
}

/// Terminal filter-mean MSE against the Kalman filter, 5 x 1000 particles.
fn mse_scaling() -> girf::Result<Outcome> {
    let mse20 = terminal_mse(20, 20, 303)?;
    let mse50 = terminal_mse(50, 20, 305)?;
    Ok(Outcome {
        pass: mse50 <= 0.03,
        detail: format!("MSE d=20 {mse20:.4}, d=50 {mse50:.4} (threshold 0.03 at d=50)"),
    })
}

/// d=20, alpha=0.5: exact-covariance guide against its diagonal approximation.
fn correlation_robustness() -> girf::Result<Outcome> {
    let d = 20;
    let model = cbm(d, 0.5);
    let grid = build_time_grid(0.0, &unit_times(50, 1.0), d)?;
    let data = simulate(&model, &grid, 404)?;
    let truth = kalman_filter(&lg_spec(&model), &grid, &data)?.loglik;
    let run = |cov: Covariance, seed: u64| -> girf::Result<f64> {
        let mut config = GirfConfig::new(1000, GuideSpec::exact_gaussian(2, cov));
        config.islands = 5;
        config.record_ess = false;
        Ok(run_islands(&model, model.params(), &data, &grid, &config, RngStream::new(seed))?.loglik)
    };
    let exact = run(Covariance::Exact, 41)?;
    let diag = run(Covariance::Diagonal, 42)?;
    let (e_err, d_err) = ((exact - truth).abs(), (diag - truth).abs());
    Ok(Outcome {
        pass: e_err <= 1.0 && d_err > e_err && d_err <= 30.0,
        detail: format!("Kalman {truth:.2}, exact {exact:.2}, diagonal {diag:.2}"),
    })
}

/// d=20, B=1: swarm means at sub-steps of the first interval against the
/// exact guided-law means.
fn intermediate_laws() -> girf::Result<Outcome> {
    let d = 20;
    let model = cbm(d, 0.0);
    let grid = build_time_grid(0.0, &[1.0], d)?;
    let data = simulate(&model, &grid, 505)?;
    let spec = lg_spec(&model);
    let mut config = GirfConfig::new(1000, GuideSpec::exact_gaussian(1, Covariance::Exact));
    config.record_step_means = true;
    config.record_ess = false;
    let reps = 30;
    let root = RngStream::new(55);
    let runs: Vec<Vec<Vec<f64>>> = (0..reps)
        .map(|r| {
            girf_filter(&model, model.params(), &data, &grid, &config, root.child(r))
                .map(|o| o.step_means.expect("recorded"))
        })
        .collect::<girf::Result<_>>()?;
    let mut pass = true;
    let mut detail = Vec::new();
    for s in [4usize, 12, 20] {
        let (oracle, _) = kalman_guided_oracle(&spec, &grid, &data, s, 1)?;
        let mut inside = 0;
        for i in 0..d {
            let xs: Vec<f64> = runs.iter().map(|r| r[s - 1][i]).collect();
            let (m, sd) = mean_sd(&xs);
            if (m - oracle[i]).abs() <= 3.0 * sd / (reps as f64).sqrt() {
                inside += 1;
            }
        }
        let frac = inside as f64 / d as f64;
        pass &= frac >= 0.95;
        detail.push(format!("s={s}: {inside}/{d}"));
    }
    Ok(Outcome {
        pass,
        detail: format!("components within 3 SE: {}", detail.join(", ")),
    })
}

fn lorenz_pair(spacing: f64, enkf_members: usize, seed: u64) -> girf::Result<(f64, f64)> {
    let d = 50;
    let model = Lorenz96::new(&Lorenz96Config::new(d))?;
    let times = unit_times(100, spacing);
    let data = simulate(&model, &build_time_grid(0.0, &times, 1)?, seed)?;
    let grid = build_time_grid(0.0, &times, d)?;
    let mut config = GirfConfig::new(2000, GuideSpec::Lookahead(LookaheadSpec::new(2, 10)));
    config.record_ess = false;
    let girf = girf_filter(&model, model.params(), &data, &grid, &config, RngStream::new(seed + 1))?.loglik;
    let enkf = enkf_filter(
        &model,
        model.params(),
        &data,
        &grid,
        enkf_members,
        RngStream::new(seed + 2),
    )?
    .loglik;
    Ok((girf, enkf))
}

/// Lorenz-96 d=50: GIRF far ahead of the EnKF at observation spacing 0.5,
/// EnKF at least as good at spacing 0.1.
fn lorenz_vs_enkf() -> girf::Result<Outcome> {
    let (girf_wide, enkf_wide) = lorenz_pair(0.5, 16000, 606)?;
    let (girf_dense, enkf_dense) = lorenz_pair(0.1, 6000, 616)?;
    Ok(Outcome {
        pass: girf_wide - enkf_wide >= 1e3 && enkf_dense >= girf_dense,
        detail: format!(
            "spacing 0.5: GIRF {girf_wide:.0}, EnKF {enkf_wide:.0}; spacing 0.1: GIRF {girf_dense:.0}, EnKF {enkf_dense:.0}"
        ),
    })
}

fn igirf_setup(iterations: usize, particles: usize) -> girf::Result<(CorrelatedBm, TimeGrid, ObsSeries, IgirfConfig)> {
    let model = cbm(1, 0.0);
    let grid = build_time_grid(0.0, &unit_times(100, 1.0), 2)?;
    let data = simulate(&model, &grid, 707)?;
    let mut config = IgirfConfig::new(iterations, particles, GuideSpec::Lookahead(LookaheadSpec::new(2, 10)))
        .with_sigma("obs_sd", 0.02);
    config.cooling = 0.92;
    Ok((model, grid, data, config))
}

/// d=1 linear Gaussian with unknown measurement sd: the final swarm mean
/// lands near the Kalman likelihood maximizer.
fn igirf_mle() -> girf::Result<Outcome> {
    let (model, grid, data, config) = igirf_setup(20, 500)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=2700 {
        let sd = 0.3 + 0.001 * i as f64;
        let theta = model.params().with_values(&[0.0, sd, 0.0])?;
        let ll = kalman_filter(&model.linear_gaussian(&theta.values()).expect("linear"), &grid, &data)?.loglik;
        if ll > best.0 {
            best = (ll, sd);
        }
    }
    let mut start = model.params().clone();
    start.set("obs_sd", 2.0)?;
    let swarm = ParamSwarm::new(&start, config.particles);
    let out = igirf_run(&model, &data, &grid, &config, &swarm, RngStream::new(77))?;
    let est = out.estimate.get("obs_sd").expect("obs_sd");
    let rel = (est - best.1).abs() / best.1;
    Ok(Outcome {
        pass: rel <= 0.10,
        detail: format!(
            "iterated estimate {est:.4}, Kalman MLE {:.3} (relative error {rel:.3})",
            best.1
        ),
    })
}

fn parabola_points(noise: f64) -> ProfilePoints {
    let mut phi = Vec::new();
    let mut ll = Vec::new();
    for i in 0..17 {
        let p = -2.0 + 0.5 * i as f64;
        let e = noise * if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + 0.1 * i as f64);
        phi.push(p);
        ll.push(-(p - 2.0) * (p - 2.0) + e);
    }
    ProfilePoints::new(phi, ll).expect("finite points")
}

/// Cutoff with no Monte Carlo error, monotone adjustment, exact parabola.
fn mcap_exactness() -> girf::Result<Outcome> {
    let opts = McapOptions::default();
    let delta0 = mcap_cutoff(1.0, 0.0, 0.05);
    let exact = mcap_interval(&parabola_points(0.0), &opts)?;
    let mut deltas = Vec::new();
    for k in 0..6 {
        deltas.push(mcap_interval(&parabola_points(0.05 * k as f64), &opts)?.delta);
    }
    let monotone = deltas.windows(2).all(|w| w[1] >= w[0]);
    let root = exact.delta.sqrt();
    let interval_ok = (exact.lower - (2.0 - root)).abs() <= 1e-6 && (exact.upper - (2.0 + root)).abs() <= 1e-6;
    let delta_ok = (delta0 - 1.9207).abs() < 5e-5 && (exact.delta - 1.9207).abs() < 5e-5;
    Ok(Outcome {
        pass: delta_ok && monotone && interval_ok,
        detail: format!(
            "delta {delta0:.4}, interval ({:.6}, {:.6}), noise ladder deltas {:?}",
            exact.lower,
            exact.upper,
            deltas.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>()
        ),
    })
}

fn measles_setup(years: usize) -> girf::Result<(MeaslesNetwork, ObsSeries, TimeGrid)> {
    let spec = SyntheticSpec {
        cities: 5,
        years,
        start_year: 1950,
        seed: 1,
        params: MeaslesParams::default(),
    };
    let data = synthetic_network(&spec, 1.0)?;
    let model = MeaslesNetwork::new(&data, &spec.params, 1.0)?;
    let grid = build_time_grid(data.t0, &data.obs_times, 5)?;
    Ok((model, data.cases, grid))
}

/// Five-city network over two years of biweekly reports.
fn measles_properties() -> girf::Result<Outcome> {
    let (model, cases, grid) = measles_setup(2)?;
    let sim = simulate_pomp(&model, model.params(), &grid, RngStream::new(909))?;
    let nonneg = sim.states.iter().flatten().all(|&v| v >= 0.0);

    let j = 500;
    let config = GirfConfig::new(j, GuideSpec::Lookahead(LookaheadSpec::new(3, 40)));
    let out = girf_filter(&model, model.params(), &cases, &grid, &config, RngStream::new(99))?;
    let min_ess = out.ess_trace.iter().copied().fold(f64::INFINITY, f64::min);

    let mut rng = RngStream::new(919).rng();
    let draws: Vec<f64> = (0..100_000)
        .map(|_| overdispersed_increment(4.0, 1.5, 0.0, &mut rng))
        .collect();
    let (m, sd) = mean_sd(&draws);
    let dispersion = sd * sd / m;

    Ok(Outcome {
        pass: nonneg && out.loglik.is_finite() && min_ess >= 0.02 * j as f64 && (0.9..=1.1).contains(&dispersion),
        detail: format!(
            "nonnegative {nonneg}, loglik {:.1}, min ESS {min_ess:.1}, Poisson variance/mean {dispersion:.4}",
            out.loglik
        ),
    })
}

fn bits(xs: impl IntoIterator<Item = f64>) -> Vec<u64> {
    xs.into_iter().map(f64::to_bits).collect()
}

/// Primary outputs of reduced versions of the experiments above.
fn fingerprint() -> girf::Result<Vec<Vec<u64>>> {
    let mut out = Vec::new();

    let model = cbm(10, 0.3);
    let grid = build_time_grid(0.0, &unit_times(10, 1.0), 10)?;
    let data = simulate(&model, &grid, 1)?;
    for (guide, scheme) in [
        (
            GuideSpec::exact_gaussian(2, Covariance::Exact),
            ResampleScheme::Systematic,
        ),
        (
            GuideSpec::exact_gaussian(2, Covariance::Diagonal),
            ResampleScheme::Multinomial,
        ),
        (configure_apf(), ResampleScheme::Systematic),
    ] {
        let mut config = GirfConfig::new(300, guide);
        config.scheme = scheme;
        config.islands = 3;
        config.record_filter_means = true;
        config.record_step_means = true;
        let o = run_islands(&model, model.params(), &data, &grid, &config, RngStream::new(2))?;
        out.push(bits(o.cond_loglik.iter().copied().chain(o.ess_trace.iter().copied())));
        out.push(bits(o.filter_means.into_iter().flatten().flatten()));
        out.push(bits(o.step_means.into_iter().flatten().flatten()));
        out.push(bits(o.terminal_swarm.states.into_iter().flatten()));
    }

    let lorenz = Lorenz96::new(&Lorenz96Config::new(10))?;
    let times = unit_times(8, 0.5);
    let ldata = simulate(&lorenz, &build_time_grid(0.0, &times, 1)?, 3)?;
    let lgrid = build_time_grid(0.0, &times, 10)?;
    let config = GirfConfig::new(200, GuideSpec::Lookahead(LookaheadSpec::new(2, 5)));
    let o = girf_filter(&lorenz, lorenz.params(), &ldata, &lgrid, &config, RngStream::new(4))?;
    out.push(bits(o.cond_loglik));
    let e = enkf_filter(&lorenz, lorenz.params(), &ldata, &lgrid, 500, RngStream::new(5))?;
    out.push(bits(e.cond_loglik.into_iter().chain(e.means.into_iter().flatten())));

    let (model, grid, data, mut config) = igirf_setup(3, 100)?;
    config.islands = 2;
    let swarm = ParamSwarm::new(model.params(), 200);
    let o = igirf_run(&model, &data, &grid, &config, &swarm, RngStream::new(6))?;
    out.push(bits(o.logliks()));
    out.push(bits(o.swarm.members().iter().flatten().copied()));

    let (model, cases, grid) = measles_setup(1)?;
    let config = GirfConfig::new(60, GuideSpec::Lookahead(LookaheadSpec::new(3, 10)));
    let o = girf_filter(&model, model.params(), &cases, &grid, &config, RngStream::new(8))?;
    out.push(bits(o.cond_loglik));

    let r = mcap_interval(&parabola_points(0.1), &McapOptions::default())?;
    out.push(bits([r.phi_hat, r.delta, r.lower, r.upper]));
    Ok(out)
}

/// Same seeds on one and three worker threads give bit-identical outputs.
fn determinism() -> girf::Result<Outcome> {
    let pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
    };
    let one = pool(1).install(fingerprint)?;
    let three = pool(3).install(fingerprint)?;
    let differing = one.iter().zip(&three).filter(|(a, b)| a != b).count();
    Ok(Outcome {
        pass: one.len() == three.len() && differing == 0,
        detail: format!("{} output groups compared, {differing} differ", one.len()),
    })
}
