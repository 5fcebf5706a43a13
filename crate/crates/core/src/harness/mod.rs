pub mod config;
pub mod dataset;
pub mod experiment;
pub mod metrics;
pub mod report;

pub use config::{resolve, ConfigFile, RunConfig};
pub use dataset::{load_dataset, Dataset};
pub use experiment::{nonlinear_init, run_experiment, train_run, ExperimentSpec, Mutation, TrainReport};
pub use metrics::{energy_estimate, metrics, Metrics};
