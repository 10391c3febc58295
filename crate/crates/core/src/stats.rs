//! Small numeric helpers shared across modules.

use statrs::function::erf::erfc;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Natural log of the smallest positive double, used as a floor for masses.
pub const LOG_FLOOR: f64 = -745.0;

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// log((1/n) * sum exp(x_i)).
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    logsumexp(xs) - (xs.len() as f64).ln()
}

pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + var.ln() + r * r / var)
}

/// Standard normal cdf.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// log(Phi(b) - Phi(a)) for a < b, accurate in both tails.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    let mass = if a >= 0.0 {
        // upper tail: Q(a) - Q(b)
        0.5 * (erfc(a / std::f64::consts::SQRT_2) - erfc(b / std::f64::consts::SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / std::f64::consts::SQRT_2) - erfc(-a / std::f64::consts::SQRT_2))
    } else {
        1.0 - std_normal_cdf(a) - (1.0 - std_normal_cdf(b))
    };
    if mass > 0.0 {
        mass.ln().max(LOG_FLOOR)
    } else {
        LOG_FLOOR
    }
}

/// Discrete normal mass Phi(y + 1/2; m, v) - Phi(y - 1/2; m, v) on the log scale.
pub fn discrete_normal_logpmf(y: f64, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    log_normal_interval((y - 0.5 - mean) / sd, (y + 0.5 - mean) / sd)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 divisor.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of sorted data (R's default type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
