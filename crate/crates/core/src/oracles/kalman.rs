use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::LinearGaussianSpec;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ObsSeries;
use crate::stats::LN_2PI;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub loglik: f64,
    /// log p(y_n | y_{1:n-1}) for n = 1..N.
    pub cond_loglik: Vec<f64>,
    /// Filter means at t_1..t_N.
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

fn predict(spec: &LinearGaussianSpec, m: &mut DVector<f64>, p: &mut DMatrix<f64>, dt: f64) {
    if dt == 0.0 {
        return;
    }
    m.axpy(dt, &spec.drift, 1.0);
    *p += &spec.q_rate * dt;
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

/// Measurement update with y = x + N(0, R); returns log p(y | past).
fn update(spec: &LinearGaussianSpec, m: &mut DVector<f64>, p: &mut DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let d = m.len();
    let innov_cov = &*p + &spec.obs_cov;
    let chol = Cholesky::new(innov_cov).ok_or(Error::SingularInnovation)?;
    let resid = DVector::from_column_slice(y) - &*m;
    let sol = chol.solve(&resid);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ll = -0.5 * (d as f64 * LN_2PI + logdet + resid.dot(&sol));
    // K = P S^{-1}
    let gain = chol.solve(&*p).transpose();
    *m += &gain * resid;
    *p -= &gain * &*p;
    symmetrize(p);
    Ok(ll)
}

/// Exact filter for a linear-Gaussian model observed at the grid's
/// observation times.
pub fn kalman_filter(spec: &LinearGaussianSpec, grid: &TimeGrid, data: &ObsSeries) -> Result<KalmanOutput> {
    if data.len() != grid.num_obs() || data.iter().any(|y| y.len() != spec.dim()) {
        return Err(Error::DataMismatch("Kalman data dimensions".into()));
    }
    let mut m = spec.init_mean.clone();
    let mut p = spec.init_cov.clone();
    let mut t = grid.t0();
    let mut out = KalmanOutput {
        loglik: 0.0,
        cond_loglik: Vec::with_capacity(data.len()),
        means: Vec::with_capacity(data.len()),
        covs: Vec::with_capacity(data.len()),
    };
    for (n, y) in data.iter().enumerate() {
        let tn = grid.obs_time(n + 1);
        predict(spec, &mut m, &mut p, tn - t);
        t = tn;
        let ll = update(spec, &mut m, &mut p, y)?;
        out.loglik += ll;
        out.cond_loglik.push(ll);
        out.means.push(m.clone());
        out.covs.push(p.clone());
    }
    Ok(out)
}

/// Law of X_t given y_{1:m}, by forward filtering and Rauch-Tung-Striebel
/// smoothing over the observation times augmented with `t`.
pub fn gaussian_conditional(
    spec: &LinearGaussianSpec,
    grid: &TimeGrid,
    data: &ObsSeries,
    t: f64,
    m: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = m.min(data.len());
    // (time, observation index or None)
    let mut points: Vec<(f64, Option<usize>)> = (1..=m).map(|k| (grid.obs_time(k), Some(k))).collect();
    let pos = points.partition_point(|&(tk, _)| tk < t);
    if points.get(pos).map(|&(tk, _)| tk) != Some(t) {
        points.insert(pos, (t, None));
    }
    let target = pos;

    let mut mean = spec.init_mean.clone();
    let mut cov = spec.init_cov.clone();
    let mut time = grid.t0();
    let mut filt = Vec::with_capacity(points.len());
    let mut pred = Vec::with_capacity(points.len());
    for &(tk, obs) in &points {
        predict(spec, &mut mean, &mut cov, tk - time);
        time = tk;
        pred.push((mean.clone(), cov.clone()));
        if let Some(k) = obs {
            update(spec, &mut mean, &mut cov, &data[k - 1])?;
        }
        filt.push((mean.clone(), cov.clone()));
    }
    if target + 1 == points.len() {
        return Ok(filt.pop().expect("nonempty"));
    }
    let (mut ms, mut ps) = filt.last().cloned().expect("nonempty");
    for k in (target..points.len() - 1).rev() {
        let (mf, pf) = &filt[k];
        let (mp, pp) = &pred[k + 1];
        let chol = Cholesky::<f64, Dyn>::new(pp.clone()).ok_or(Error::SingularCovariance)?;
        // C = P_f P_p^{-1} with P_p symmetric
        let c = chol.solve(pf).transpose();
        let new_m = mf + &c * (&ms - mp);
        let mut new_p = pf + &c * (&ps - pp) * c.transpose();
        symmetrize(&mut new_p);
        ms = new_m;
        ps = new_p;
    }
    Ok((ms, ps))
}

/// Guided filter distribution at grid index `k` when the guide is the exact
/// forecast likelihood of the next `lookahead` observations.
pub fn kalman_guided_oracle(
    spec: &LinearGaussianSpec,
    grid: &TimeGrid,
    data: &ObsSeries,
    k: usize,
    lookahead: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = if k == 0 { 0 } else { (k - 1) / grid.steps() };
    let m = if k == 0 { 0 } else { (n + lookahead).min(grid.num_obs()) };
    gaussian_conditional(spec, grid, data, grid.times()[k], m)
}
