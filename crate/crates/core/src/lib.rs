//! Hybrid model of an icing wind tunnel water/air injection plant.
//!
//! Tanks, valves and nozzles are lumped first-principles models; nozzle
//! temperature and droplet MVD come from fitted predictors. [`sim`] ties
//! them together on a fixed time grid and [`fit`] holds the pipeline that
//! produces the predictors.

pub mod config;
pub mod fit;
pub mod nozzle;
pub mod sim;
pub mod state;
pub mod tank;
pub mod test_section;
pub mod units;
pub mod valve;

pub use config::{load_config, validate_config, PlantConfig, Violation};
pub use fit::dataset::{Dataset, ExperimentRecord, Variable};
pub use fit::predictor::Predictor;
pub use sim::engine::Simulator;
pub use sim::scenario::Scenario;
pub use sim::trace::Trace;
pub use state::PlantState;
