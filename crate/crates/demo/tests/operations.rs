use girf_demo::{cbm_traces, guided_cloud, mcap_explorer};

#[test]
fn traces_end_near_the_exact_likelihood() {
    let t = cbm_traces(4, 0.3, 10, 400, 3).unwrap();
    assert_eq!(t.times.len(), 10);
    assert_eq!(t.kalman.len(), 10);
    assert_eq!(t.girf.len(), 10);
    assert_eq!(t.bootstrap.len(), 10);
    let gap = (t.girf[9] - t.kalman[9]).abs();
    assert!(gap < 3.0, "girf {} vs kalman {}", t.girf[9], t.kalman[9]);
}

#[test]
fn cloud_has_requested_shape() {
    let c = guided_cloud(6, 3, 300, 1).unwrap();
    assert_eq!(c.points.len(), 300);
    assert_eq!(c.time, 0.5);
    assert!(c.oracle_cov[0][0] > 0.0 && c.oracle_cov[0][1] == c.oracle_cov[1][0]);
    assert!(guided_cloud(6, 7, 300, 1).is_err());
}

#[test]
fn noiseless_explorer_gives_the_likelihood_ratio_interval() {
    let e = mcap_explorer(0.5, 0.0, 17, 0.05, 0.75, 0).unwrap();
    assert!(e.phi_hat.abs() < 1e-6);
    let half = (2.0 * 1.920729410347062f64).sqrt();
    assert!(
        (e.upper - half).abs() < 1e-4 && (e.lower + half).abs() < 1e-4,
        "{} {}",
        e.lower,
        e.upper
    );
}
