//! Observation times refined by equally spaced intermediate times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The refined time grid t_{n,s}, n in 0..N, s in 0..=S.
///
/// Entry `n * S + s` holds t_{n,s}; observation times sit at multiples of S
/// and are stored once, shared by the adjacent intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    obs_times: Vec<f64>,
    steps: usize,
    times: Vec<f64>,
}

/// One transition of the refined grid, from t_{n,s-1} to t_{n,s}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStep {
    /// Flat index of the destination time (1..=N*S).
    pub index: usize,
    /// Observation interval, 0-based: the step lies in [t_n, t_{n+1}].
    pub n: usize,
    /// Intermediate step within the interval, 1..=S.
    pub s: usize,
    pub t_prev: f64,
    pub t_now: f64,
}

impl GridStep {
    /// True when the step starts at an observation time t_n with n >= 1.
    pub fn leaves_observation(&self) -> bool {
        self.s == 1 && self.n >= 1
    }

    /// True when the step ends at the observation time t_{n+1}.
    pub fn reaches_observation(&self, steps: usize) -> bool {
        self.s == steps
    }
}

/// Builds the refined grid with `steps` equal sub-intervals per observation interval.
pub fn build_time_grid(t0: f64, obs_times: &[f64], steps: usize) -> Result<TimeGrid> {
    if steps < 1 {
        return Err(Error::ZeroSteps);
    }
    if obs_times.is_empty() || !t0.is_finite() {
        return Err(Error::NonMonotoneTimes);
    }
    let mut prev = t0;
    for &t in obs_times {
        if !t.is_finite() || t <= prev {
            return Err(Error::NonMonotoneTimes);
        }
        prev = t;
    }
    let mut times = Vec::with_capacity(obs_times.len() * steps + 1);
    times.push(t0);
    let mut start = t0;
    for &end in obs_times {
        let width = end - start;
        for s in 1..steps {
            times.push(start + (s as f64 / steps as f64) * width);
        }
        times.push(end);
        start = end;
    }
    Ok(TimeGrid {
        t0,
        obs_times: obs_times.to_vec(),
        steps,
        times,
    })
}

impl TimeGrid {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    /// Number of observations N.
    pub fn num_obs(&self) -> usize {
        self.obs_times.len()
    }

    /// Intermediate steps per interval S.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// All grid times, N*S + 1 entries.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// t_{n,s}; `n` may equal N only with `s == 0`.
    pub fn time(&self, n: usize, s: usize) -> f64 {
        self.times[n * self.steps + s]
    }

    /// Observation time t_n for n in 0..=N (t_0 is the initial time).
    pub fn obs_time(&self, n: usize) -> f64 {
        if n == 0 {
            self.t0
        } else {
            self.obs_times[n - 1]
        }
    }

    pub fn is_observation(&self, index: usize) -> bool {
        index > 0 && index % self.steps == 0
    }

    /// 1-based observation number for an observation grid index.
    pub fn observation_index(&self, index: usize) -> Option<usize> {
        self.is_observation(index).then(|| index / self.steps)
    }

    /// Iterates the N*S transitions in order.
    pub fn steps_iter(&self) -> impl Iterator<Item = GridStep> + '_ {
        (1..self.times.len()).map(move |k| GridStep {
            index: k,
            n: (k - 1) / self.steps,
            s: (k - 1) % self.steps + 1,
            t_prev: self.times[k - 1],
            t_now: self.times[k],
        })
    }

    /// Same observation schedule with a different number of intermediate steps.
    pub fn with_steps(&self, steps: usize) -> Result<TimeGrid> {
        build_time_grid(self.t0, &self.obs_times, steps)
    }

    /// Grid restricted to the first `n` observations.
    pub fn truncated(&self, n: usize) -> Result<TimeGrid> {
        build_time_grid(self.t0, &self.obs_times[..n.min(self.obs_times.len())], self.steps)
    }
}
