use girf::guide::Covariance;
use girf::igirf::{estimate_ivps, igirf_run, IgirfConfig, ParamSwarm};
use girf::models::{CorrelatedBm, CorrelatedBmConfig};
use girf::oracles::gaussian_conditional;
use girf::rng::purpose;
use girf::{build_time_grid, girf_filter, simulate_pomp, GirfConfig, GuideSpec, Model, RngStream};
use nalgebra::DMatrix;

fn cbm(d: usize, x0: f64) -> CorrelatedBm {
    CorrelatedBm::new(&CorrelatedBmConfig {
        d,
        alpha: 0.2,
        obs_sd: 1.0,
        drift: None,
        x0,
    })
    .unwrap()
}

#[test]
fn zero_perturbation_reproduces_plain_filter() {
    let model = cbm(3, 0.0);
    let grid = build_time_grid(0.0, &[1.0, 2.0, 3.0, 4.0], 3).unwrap();
    let sim = simulate_pomp(&model, model.params(), &grid, RngStream::new(4)).unwrap();
    let guide = GuideSpec::exact_gaussian(2, Covariance::Exact);
    let config = IgirfConfig::new(1, 40, guide.clone()).with_sigma("obs_sd", 0.0);
    let swarm = ParamSwarm::new(model.params(), 40);
    let rng = RngStream::new(17);
    let out = igirf_run(&model, &sim.observations, &grid, &config, &swarm, rng).unwrap();

    let plain = girf_filter(
        &model,
        model.params(),
        &sim.observations,
        &grid,
        &GirfConfig::new(40, guide),
        rng.child(purpose::ITERATION).child(1),
    )
    .unwrap();
    assert_eq!(out.trace[0].loglik, plain.loglik);
    for m in out.swarm.members() {
        for (a, b) in m.iter().zip(model.params().values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn fixed_parameters_never_move() {
    let model = cbm(2, 0.0);
    let grid = build_time_grid(0.0, &[1.0, 2.0, 3.0], 2).unwrap();
    let sim = simulate_pomp(&model, model.params(), &grid, RngStream::new(5)).unwrap();
    let mut config = IgirfConfig::new(3, 30, GuideSpec::Bootstrap)
        .with_sigma("obs_sd", 0.3)
        .with_sigma("x0", 0.5)
        .with_sigma("alpha", 0.5);
    config.islands = 2;
    let swarm = ParamSwarm::new(model.params(), 60);
    let out = igirf_run(&model, &sim.observations, &grid, &config, &swarm, RngStream::new(3)).unwrap();
    let alpha = model.params().get("alpha").unwrap();
    assert_eq!(out.swarm.len(), 60);
    assert_eq!(out.trace.len(), 3);
    assert!(out.swarm.members().iter().all(|m| m[0].to_bits() == alpha.to_bits()));
    assert!(out.swarm.members().iter().all(|m| m[1] > 0.0));
    assert!(out.trace.iter().all(|r| r.loglik.is_finite()));
}

#[test]
fn swarm_size_must_match() {
    let model = cbm(2, 0.0);
    let grid = build_time_grid(0.0, &[1.0, 2.0], 1).unwrap();
    let data = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let config = IgirfConfig::new(1, 30, GuideSpec::Bootstrap);
    let swarm = ParamSwarm::new(model.params(), 10);
    assert!(igirf_run(&model, &data, &grid, &config, &swarm, RngStream::new(1)).is_err());
}

#[test]
fn ivp_estimate_matches_kalman_posterior() {
    let truth = cbm(1, 2.0);
    let grid = build_time_grid(0.0, &[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
    let sim = simulate_pomp(&truth, truth.params(), &grid, RngStream::new(8)).unwrap();

    let model = cbm(1, 0.0);
    let mut config = IgirfConfig::new(1, 100, GuideSpec::exact_gaussian(2, Covariance::Exact)).with_sigma("x0", 1.0);
    config.ivp_data_prefix = Some(3);
    config.ivp_iterations = 30;
    config.ivp_islands = 4;
    let swarm = ParamSwarm::new(model.params(), 400);
    let out = estimate_ivps(&model, &sim.observations, &grid, &config, &swarm, RngStream::new(2)).unwrap();
    let est = out.estimate.get("x0").unwrap();
    assert!(out.swarm.members().iter().all(|m| m[1] == 1.0));

    // flat prior on the initial value: posterior of X_0 given y_1..y_3
    let mut spec = model.linear_gaussian(&model.params().values()).unwrap();
    spec.init_cov = DMatrix::from_element(1, 1, 1e8);
    let short = build_time_grid(0.0, &[1.0, 2.0, 3.0], 2).unwrap();
    let (m, p) = gaussian_conditional(&spec, &short, &sim.observations[..3].to_vec(), 0.0, 3).unwrap();
    let sd = p[(0, 0)].sqrt();
    assert!(
        (est - m[0]).abs() < 3.0 * sd,
        "estimate {est}, posterior {} +- {sd}",
        m[0]
    );
}
