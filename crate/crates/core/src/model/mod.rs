//! Observation models, system assembly and synthetic data.

mod hyper;
mod obs;
mod simulate;
mod system;

pub use hyper::Hyperparams;
pub use obs::{covariates, InsituObs, ObservationSet, SatelliteObs, N_COVARIATES};
pub use simulate::{simulate_scenario, ScenarioConfig, SimulatedData};
pub use system::{assemble, LinearGaussianSystem, ModelKind, FIXED_PRIOR_SD};
