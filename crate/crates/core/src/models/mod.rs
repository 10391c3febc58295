//! Built-in benchmark models and construction from JSON configuration.

pub mod cbm;
pub mod lorenz;

pub use cbm::{CorrelatedBm, CorrelatedBmConfig};
pub use lorenz::{lorenz_drift, Lorenz96, Lorenz96Config, SkeletonMethod};
pub mod measles;
mod registry;

pub use measles::{MeaslesData, MeaslesNetwork, MeaslesParams};
pub use registry::{BuiltModel, BundledData, MeaslesSpec, ModelSpec};
