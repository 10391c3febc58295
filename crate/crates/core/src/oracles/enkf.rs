use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{check_data, Model, ObsSeries};
use crate::par::map_indexed;
use crate::params::ParamVector;
use crate::rng::{purpose, RngStream};
use crate::stats::LN_2PI;

/// Relative diagonal regularization of the innovation covariance.
pub const ENKF_REGULARIZATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnkfOutput {
    pub loglik: f64,
    pub cond_loglik: Vec<f64>,
    /// Ensemble means after each update.
    pub means: Vec<Vec<f64>>,
}

/// Stochastic (perturbed-observation) ensemble Kalman filter. The predictive
/// density of y_n is approximated by N(mean of h(X), cov of h(X) + R) with
/// sample covariances normalized by J - 1, where h and R are the model's
/// measurement mean and variance.
pub fn enkf_filter<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    data: &ObsSeries,
    grid: &TimeGrid,
    members: usize,
    rng: RngStream,
) -> Result<EnkfOutput> {
    if members < 2 {
        return Err(Error::Config("EnKF needs at least two members".into()));
    }
    let obs_grid = grid.with_steps(1)?;
    check_data(model, &obs_grid, data)?;
    let theta = params.values();
    let d = model.dim_latent();
    let q = model.dim_obs();
    let jf = members as f64;

    let init = rng.child(purpose::INIT);
    let mut ens: Vec<Vec<f64>> = map_indexed(members, |j| {
        let mut x = vec![0.0; d];
        model
            .init_sample(&theta, &mut x, &mut init.child(j as u64).rng())
            .map(|_| x)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let prop = rng.child(purpose::PROPAGATE);
    let pert = rng.child(purpose::MEASURE);
    let mut out = EnkfOutput {
        loglik: 0.0,
        cond_loglik: Vec::with_capacity(data.len()),
        means: Vec::with_capacity(data.len()),
    };
    for (n, y) in data.iter().enumerate() {
        let (t0, t1) = (obs_grid.obs_time(n), obs_grid.obs_time(n + 1));
        let stream = prop.child((n + 1) as u64);
        let forecast: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = map_indexed(members, |j| {
            let mut x = ens[j].clone();
            if n >= 1 {
                model.reset_after_observation(&mut x);
            }
            model.transition(&theta, t0, t1, &mut x, &mut stream.child(j as u64).rng())?;
            let mut h = vec![0.0; q];
            let mut v = vec![0.0; q];
            model.measurement_moments(&theta, n, &x, &mut h, &mut v);
            Ok((x, h, v))
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let mut xbar = DVector::zeros(d);
        let mut hbar = DVector::zeros(q);
        let mut rdiag = DVector::zeros(q);
        for (x, h, v) in &forecast {
            xbar += DVector::from_column_slice(x);
            hbar += DVector::from_column_slice(h);
            rdiag += DVector::from_column_slice(v);
        }
        xbar /= jf;
        hbar /= jf;
        rdiag /= jf;
        let mut ax = DMatrix::zeros(d, members);
        let mut ah = DMatrix::zeros(q, members);
        for (j, (x, h, _)) in forecast.iter().enumerate() {
            for i in 0..d {
                ax[(i, j)] = x[i] - xbar[i];
            }
            for i in 0..q {
                ah[(i, j)] = h[i] - hbar[i];
            }
        }
        let c_xh = &ax * ah.transpose() / (jf - 1.0);
        let mut s = &ah * ah.transpose() / (jf - 1.0);
        for i in 0..q {
            s[(i, i)] += rdiag[i];
        }
        let reg = ENKF_REGULARIZATION * s.trace();
        for i in 0..q {
            s[(i, i)] += reg;
        }
        let chol = Cholesky::new(s).ok_or(Error::SingularCovariance)?;
        let yv = DVector::from_column_slice(y);
        let resid = &yv - &hbar;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let ll = -0.5 * (q as f64 * LN_2PI + logdet + resid.dot(&chol.solve(&resid)));
        out.loglik += ll;
        out.cond_loglik.push(ll);

        // K = C_xh S^{-1}
        let gain = chol.solve(&c_xh.transpose()).transpose();
        let pstream = pert.child((n + 1) as u64);
        ens = map_indexed(members, |j| {
            let (x, h, _) = &forecast[j];
            let mut r = pstream.child(j as u64).rng();
            let innov = DVector::from_iterator(
                q,
                (0..q).map(|i| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    y[i] + rdiag[i].sqrt() * e - h[i]
                }),
            );
            let upd = &gain * innov;
            x.iter().zip(upd.iter()).map(|(a, b)| a + b).collect()
        });
        let mut m = vec![0.0; d];
        for x in &ens {
            for (a, b) in m.iter_mut().zip(x) {
                *a += b / jf;
            }
        }
        out.means.push(m);
    }
    Ok(out)
}
