//! Monte Carlo path simulation and estimators for the fluctuation
//! functionals.

pub mod estimators;
pub mod path;
pub mod record;

pub use estimators::*;
pub use path::{is_exact, Flow, SimConfig, StableSampler};
pub use record::{extract_extrema_chain, simulate_path, Knot, PathRecord};
