//! Guided intermediate resampling filters for high-dimensional partially
//! observed Markov process models.
//!
//! The crate provides the model contract ([`Model`]), the guided filter and
//! its likelihood estimate ([`girf_filter`], [`run_islands`]), guide
//! constructions ([`guide`]), iterated filtering for maximum likelihood
//! ([`igirf`]), Monte Carlo adjusted profile intervals ([`mcap`]), three
//! benchmark model families ([`models`]) and exact or baseline reference
//! filters ([`oracles`]).
//!
//! ```
//! use girf::guide::Covariance;
//! use girf::models::{CorrelatedBm, CorrelatedBmConfig};
//! use girf::oracles::kalman_filter;
//! use girf::{build_time_grid, run_islands, simulate_pomp, GirfConfig, GuideSpec, Model, RngStream};
//!
//! # fn main() -> girf::Result<()> {
//! let model = CorrelatedBm::new(&CorrelatedBmConfig::new(5, 0.5))?;
//! let times: Vec<f64> = (1..=10).map(f64::from).collect();
//! let grid = build_time_grid(0.0, &times, 5)?;
//! let data = simulate_pomp(&model, model.params(), &grid, RngStream::new(1))?.observations;
//!
//! let mut config = GirfConfig::new(200, GuideSpec::exact_gaussian(2, Covariance::Exact));
//! config.islands = 2;
//! let out = run_islands(&model, model.params(), &data, &grid, &config, RngStream::new(2))?;
//!
//! let lg = model.linear_gaussian(&model.params().values()).unwrap();
//! let exact = kalman_filter(&lg, &grid, &data)?;
//! assert!((out.loglik - exact.loglik).abs() < 5.0);
//! # Ok(())
//! # }
//! ```

pub mod engine;
pub mod error;
pub mod grid;
pub mod guide;
pub mod igirf;
pub mod mcap;
pub mod model;
pub mod models;
pub mod oracles;
mod par;
pub mod params;
pub mod resampling;
pub mod rng;
pub mod stats;

pub use engine::{
    configure_apf, configure_bootstrap, girf_filter, girf_weight, run_islands, FilterOutput, GirfConfig, ParticleSwarm,
};
pub use error::{Error, Result};
pub use grid::{build_time_grid, GridStep, TimeGrid};
pub use guide::{GuideSpec, LookaheadSpec};
pub use model::{simulate_pomp, MeasurementFamily, Model, ObsSeries, Simulation};
pub use params::{ParamEntry, ParamKind, ParamVector, Transform};
pub use resampling::ResampleScheme;
pub use rng::RngStream;
