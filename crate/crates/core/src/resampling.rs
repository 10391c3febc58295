//! Weight normalization, effective sample size and resampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    #[default]
    Systematic,
    Multinomial,
}

/// Normalized probabilities and log of the mean (unnormalized) weight.
pub fn normalize_log_weights(logw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut probs = Vec::with_capacity(logw.len());
    let log_mean = normalize_into(logw, &mut probs, usize::MAX)?;
    Ok((probs, log_mean))
}

pub(crate) fn normalize_into(logw: &[f64], probs: &mut Vec<f64>, grid_index: usize) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for &w in logw {
        if w.is_nan() || w == f64::INFINITY {
            return Err(Error::NonFiniteGuide { grid_index });
        }
        max = max.max(w);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::AllWeightsDegenerate { grid_index });
    }
    probs.clear();
    probs.extend(logw.iter().map(|&w| (w - max).exp()));
    let sum: f64 = probs.iter().sum();
    let inv = 1.0 / sum;
    probs.iter_mut().for_each(|p| *p *= inv);
    Ok(max + sum.ln() - (logw.len() as f64).ln())
}

/// 1 / sum p_j^2.
pub fn ess(probs: &[f64]) -> f64 {
    1.0 / probs.iter().map(|p| p * p).sum::<f64>()
}

/// Draws `probs.len()` ancestor indices.
pub fn resample_ancestors(probs: &[f64], scheme: ResampleScheme, rng: &mut SimRng) -> Vec<usize> {
    resample_n(probs, probs.len(), scheme, rng)
}

/// Draws `count` ancestor indices from `probs`.
pub fn resample_n(probs: &[f64], count: usize, scheme: ResampleScheme, rng: &mut SimRng) -> Vec<usize> {
    match scheme {
        ResampleScheme::Systematic => systematic_with_offset(probs, count, rng.random::<f64>()),
        ResampleScheme::Multinomial => {
            let mut u: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
            u.sort_unstable_by(f64::total_cmp);
            select_sorted(probs, u.into_iter())
        }
    }
}

/// Systematic resampling with the single uniform `offset` in [0, 1):
/// output `j` takes the stratum holding (j + offset) / count.
pub fn systematic_with_offset(probs: &[f64], count: usize, offset: f64) -> Vec<usize> {
    let inv = 1.0 / count as f64;
    select_sorted(probs, (0..count).map(|j| (j as f64 + offset) * inv))
}

fn select_sorted(probs: &[f64], points: impl Iterator<Item = f64>) -> Vec<usize> {
    let last = probs.len() - 1;
    let mut out = Vec::with_capacity(probs.len());
    let mut i = 0;
    let mut cum = probs[0];
    for u in points {
        while u >= cum && i < last {
            i += 1;
            cum += probs[i];
        }
        // skip zero-probability tail entries picked up by rounding
        let mut k = i;
        while probs[k] == 0.0 && k > 0 {
            k -= 1;
        }
        out.push(k);
    }
    out
}
