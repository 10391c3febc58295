//! Monte Carlo adjusted profile confidence intervals.
//!
//! Profile points are smoothed with a tricube-weighted local quadratic
//! regression. A weighted quadratic fit around the smoothed maximum gives the
//! Monte Carlo standard error of the maximizer, which widens the usual
//! chi-squared cutoff.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const DEFAULT_SPAN: f64 = 0.75;
const GRID_POINTS: usize = 401;
/// The q-th nearest point sits at this fraction inside the tricube radius.
const NEIGHBOURHOOD_STRETCH: f64 = 1.1;
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoints {
    pub phi: Vec<f64>,
    pub loglik: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<Vec<usize>>,
}

#[derive(Deserialize)]
struct ProfileRow {
    phi: f64,
    loglik: f64,
    #[serde(default)]
    replicate: Option<usize>,
}

impl ProfilePoints {
    pub fn new(phi: Vec<f64>, loglik: Vec<f64>) -> Result<Self> {
        if phi.len() != loglik.len() {
            return Err(Error::DataMismatch("phi and loglik lengths differ".into()));
        }
        if phi.iter().chain(&loglik).any(|v| !v.is_finite()) {
            return Err(Error::DataMismatch("profile points must be finite".into()));
        }
        Ok(ProfilePoints {
            phi,
            loglik,
            replicate: None,
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Reads `phi,loglik[,replicate]` rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut phi = Vec::new();
        let mut loglik = Vec::new();
        let mut rep = Vec::new();
        for row in csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r)
            .deserialize::<ProfileRow>()
        {
            let row = row?;
            phi.push(row.phi);
            loglik.push(row.loglik);
            rep.push(row.replicate);
        }
        let mut p = ProfilePoints::new(phi, loglik)?;
        if rep.iter().all(Option::is_some) && !rep.is_empty() {
            p.replicate = Some(rep.into_iter().flatten().collect());
        }
        Ok(p)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi", "loglik", "replicate"])?;
        for i in 0..self.len() {
            let rep = self.replicate.as_ref().map_or(String::new(), |r| r[i].to_string());
            out.write_record([format!("{:.16e}", self.phi[i]), format!("{:.16e}", self.loglik[i]), rep])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Tricube-weighted local quadratic regression through profile points.
#[derive(Debug, Clone)]
pub struct LocalSmoother {
    phi: Vec<f64>,
    loglik: Vec<f64>,
    span: f64,
}

impl LocalSmoother {
    pub fn new(phi: &[f64], loglik: &[f64], span: f64) -> Result<Self> {
        if !(span > 0.0 && span <= 1.0) {
            return Err(Error::Config(format!("span must lie in (0, 1], got {span}")));
        }
        if phi.len() < 4 {
            return Err(Error::DegenerateFit(format!(
                "{} profile points, need at least 4",
                phi.len()
            )));
        }
        Ok(LocalSmoother {
            phi: phi.to_vec(),
            loglik: loglik.to_vec(),
            span,
        })
    }

    /// Tricube weights of the neighbourhood holding a `span` fraction of
    /// the points around `x` (at least three distinct phi values).
    pub fn weights(&self, x: f64) -> Vec<f64> {
        let n = self.phi.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| (self.phi[i] - x).abs().total_cmp(&(self.phi[j] - x).abs()));
        let mut q = ((self.span * n as f64).floor() as usize).clamp(3, n);
        let distinct = |q: usize| {
            let mut v: Vec<f64> = order[..q].iter().map(|&i| self.phi[i]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        while q < n && distinct(q) < 3 {
            q += 1;
        }
        let mut dist: Vec<f64> = self.phi.iter().map(|p| (p - x).abs()).collect();
        let h = dist[order[q - 1]] * NEIGHBOURHOOD_STRETCH;
        if h == 0.0 {
            return dist.iter().map(|&d| if d == 0.0 { 1.0 } else { 0.0 }).collect();
        }
        for d in dist.iter_mut() {
            let u = *d / h;
            *d = if u < 1.0 { (1.0 - u * u * u).powi(3) } else { 0.0 };
        }
        dist
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let w = self.weights(x);
        let centred: Vec<f64> = self.phi.iter().map(|p| p - x).collect();
        let fit = weighted_quadratic(&centred, &self.loglik, &w)?;
        Ok(fit.coef[0])
    }

    pub fn range(&self) -> (f64, f64) {
        let lo = self.phi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct SmoothFit {
    pub smoother: LocalSmoother,
    pub maximizer: f64,
    pub max_value: f64,
    /// Smoothing weights used at the maximizer.
    pub weights: Vec<f64>,
}

/// Smooths the profile and locates the maximizer of the smoothed curve by a
/// grid search refined with golden-section search. Ties resolve to the
/// leftmost maximizer.
pub fn local_smooth(points: &ProfilePoints, span: f64) -> Result<SmoothFit> {
    let smoother = LocalSmoother::new(&points.phi, &points.loglik, span)?;
    let (lo, hi) = smoother.range();
    if !(hi > lo) {
        return Err(Error::DegenerateFit("profile points share a single phi value".into()));
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| smoother.eval(x)).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] + TIE_TOLERANCE * (1.0 + values[best].abs()) {
            best = i;
        }
    }
    let (mut x_max, mut v_max) = (grid[best], values[best]);
    let tol = TIE_TOLERANCE * (1.0 + v_max.abs());
    if best > 0 && best + 1 < grid.len() && values[best - 1] < v_max - tol && values[best + 1] < v_max - tol {
        let (x, v) = golden_max(&smoother, grid[best - 1], grid[best + 1])?;
        if v > v_max {
            x_max = x;
            v_max = v;
        }
    }
    Ok(SmoothFit {
        weights: smoother.weights(x_max),
        smoother,
        maximizer: x_max,
        max_value: v_max,
    })
}

fn golden_max(s: &LocalSmoother, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = s.eval(c)?;
    let mut fd = s.eval(d)?;
    for _ in 0..100 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = s.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = s.eval(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, s.eval(x)?))
}

struct WlsFit {
    /// Coefficients of 1, x, x^2.
    coef: Vector3<f64>,
    xtwx_inv: Matrix3<f64>,
    weighted_rss: f64,
    sum_w: f64,
    sum_w2: f64,
    weighted_tss: f64,
}

fn weighted_quadratic(x: &[f64], y: &[f64], w: &[f64]) -> Result<WlsFit> {
    let mut xtwx = Matrix3::zeros();
    let mut xtwy = Vector3::zeros();
    let mut distinct: Vec<f64> = Vec::new();
    for i in 0..x.len() {
        if w[i] < 0.0 || !w[i].is_finite() {
            return Err(Error::DegenerateFit("weights must be finite and nonnegative".into()));
        }
        if w[i] == 0.0 {
            continue;
        }
        if !distinct.contains(&x[i]) {
            distinct.push(x[i]);
        }
        let row = Vector3::new(1.0, x[i], x[i] * x[i]);
        xtwx += row * row.transpose() * w[i];
        xtwy += row * (w[i] * y[i]);
    }
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} distinct weighted phi values, need 3",
            distinct.len()
        )));
    }
    let inv = xtwx
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("singular quadratic design".into()))?;
    let coef = inv * xtwy;
    let mut rss = 0.0;
    let mut sum_w = 0.0;
    let mut sum_w2 = 0.0;
    let mut tss = 0.0;
    for i in 0..x.len() {
        tss += w[i] * y[i] * y[i];
        let r = y[i] - (coef[0] + coef[1] * x[i] + coef[2] * x[i] * x[i]);
        rss += w[i] * r * r;
        sum_w += w[i];
        sum_w2 += w[i] * w[i];
    }
    Ok(WlsFit {
        coef,
        xtwx_inv: inv,
        weighted_rss: rss,
        sum_w,
        sum_w2,
        weighted_tss: tss,
    })
}

/// Weighted quadratic -a phi^2 + b phi + c with coefficient covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

/// Weighted least squares fit. The residual variance is the weighted
/// residual sum of squares over (n_eff - 3) with n_eff = (sum w)^2 / sum w^2,
/// floored at one degree of freedom.
pub fn quadratic_fit_with_covariance(phi: &[f64], loglik: &[f64], weights: &[f64]) -> Result<QuadraticFit> {
    let fit = weighted_quadratic(phi, loglik, weights)?;
    let n_eff = fit.sum_w * fit.sum_w / fit.sum_w2;
    let dof = (n_eff - 3.0).max(1.0);
    let sigma2 = if fit.weighted_rss <= 1e-24 * fit.weighted_tss {
        0.0
    } else {
        fit.weighted_rss / dof
    };
    let cov = fit.xtwx_inv * sigma2;
    Ok(QuadraticFit {
        a: -fit.coef[2],
        b: fit.coef[1],
        c: fit.coef[0],
        var_a: cov[(2, 2)],
        var_b: cov[(1, 1)],
        cov_ab: -cov[(1, 2)],
    })
}

/// Monotone map applied to phi before smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiTransform {
    #[default]
    Identity,
    Sqrt,
    Log,
}

impl PhiTransform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            PhiTransform::Identity => v,
            PhiTransform::Sqrt => v.sqrt(),
            PhiTransform::Log => v.ln(),
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            PhiTransform::Identity => v,
            PhiTransform::Sqrt => v * v,
            PhiTransform::Log => v.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McapOptions {
    pub alpha: f64,
    pub span: f64,
    pub transform: PhiTransform,
    /// Points to keep; all points when absent.
    pub mask: Option<Vec<bool>>,
}

impl Default for McapOptions {
    fn default() -> Self {
        McapOptions {
            alpha: 0.05,
            span: DEFAULT_SPAN,
            transform: PhiTransform::Identity,
            mask: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McapInterval {
    pub phi_hat: f64,
    pub se_mc: f64,
    pub se_stat: f64,
    pub se_total: f64,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
    /// True when the smoothed curve stays above the cutoff up to the edge of
    /// the profiled range, so the endpoint is the range boundary.
    pub lower_open: bool,
    pub upper_open: bool,
    pub quadratic: QuadraticFit,
    pub span: f64,
    pub alpha: f64,
    pub transform: PhiTransform,
    /// Smoothed curve on the original phi scale.
    pub curve: Vec<(f64, f64)>,
}

/// delta = (a SE_mc^2 + 1/2) times the (1 - alpha) quantile of chi-squared(1).
pub fn mcap_cutoff(a: f64, se_mc: f64, alpha: f64) -> f64 {
    let chi = ChiSquared::new(1.0)
        .expect("one degree of freedom")
        .inverse_cdf(1.0 - alpha);
    (a * se_mc * se_mc + 0.5) * chi
}

/// Delta-method standard error of the quadratic maximizer b / (2a).
pub fn mcap_se(q: &QuadraticFit) -> f64 {
    let v = (q.var_b - 2.0 * q.b / q.a * q.cov_ab + q.b * q.b / (q.a * q.a) * q.var_a) / (4.0 * q.a * q.a);
    v.max(0.0).sqrt()
}

pub fn mcap_interval(points: &ProfilePoints, options: &McapOptions) -> Result<McapInterval> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {}",
            options.alpha
        )));
    }
    let keep = |i: usize| options.mask.as_ref().is_none_or(|m| m[i]);
    if let Some(m) = &options.mask {
        if m.len() != points.len() {
            return Err(Error::DataMismatch(
                "mask length differs from the number of points".into(),
            ));
        }
    }
    let mut phi = Vec::new();
    let mut ll = Vec::new();
    for i in 0..points.len() {
        if keep(i) {
            let v = options.transform.forward(points.phi[i]);
            if !v.is_finite() {
                return Err(Error::DomainError {
                    name: "phi".into(),
                    value: points.phi[i],
                });
            }
            phi.push(v);
            ll.push(points.loglik[i]);
        }
    }
    let smooth = local_smooth(&ProfilePoints::new(phi.clone(), ll.clone())?, options.span)?;
    let quad = quadratic_fit_with_covariance(&phi, &ll, &smooth.weights)?;
    if !(quad.a > 0.0) {
        return Err(Error::NegativeCurvature(quad.a));
    }
    let se_mc = mcap_se(&quad);
    let se_stat = 1.0 / (2.0 * quad.a).sqrt();
    let delta = mcap_cutoff(quad.a, se_mc, options.alpha);
    let target = smooth.max_value - delta;
    let s = &smooth.smoother;
    let (lo, hi) = s.range();
    let (lower, lower_open) = crossing(s, smooth.maximizer, lo, target)?;
    let (upper, upper_open) = crossing(s, smooth.maximizer, hi, target)?;
    let curve = (0..101)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / 100.0;
            s.eval(x).map(|v| (options.transform.inverse(x), v))
        })
        .collect::<Result<_>>()?;
    Ok(McapInterval {
        phi_hat: options.transform.inverse(smooth.maximizer),
        se_mc,
        se_stat,
        se_total: (se_stat * se_stat + se_mc * se_mc).sqrt(),
        delta,
        lower: options.transform.inverse(lower),
        upper: options.transform.inverse(upper),
        lower_open,
        upper_open,
        quadratic: quad,
        span: options.span,
        alpha: options.alpha,
        transform: options.transform,
        curve,
    })
}

/// First point between `from` and `to` where the smoothed curve falls to
/// `target`, located by a scan followed by bisection.
fn crossing(s: &LocalSmoother, from: f64, to: f64, target: f64) -> Result<(f64, bool)> {
    let steps = GRID_POINTS;
    let mut prev = from;
    for i in 1..=steps {
        let x = from + (to - from) * i as f64 / steps as f64;
        if s.eval(x)? < target {
            let (mut inside, mut outside) = (prev, x);
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if mid == inside || mid == outside {
                    break;
                }
                if s.eval(mid)? >= target {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            return Ok((0.5 * (inside + outside), false));
        }
        prev = x;
    }
    Ok((to, true))
}
