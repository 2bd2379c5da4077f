//! The integrated learning loop: exploration, measurement, model update,
//! convergence check and planning, plus prediction-error evaluation.

pub mod config;
pub mod metrics;
pub mod run;
pub mod scenario;

pub use config::{RunConfig, default_models};
pub use metrics::{
    convergence_delta, evaluate_prediction, stream_seed, trend_slope, uncertainty_calibration, Coverage, PredictionError, Snapshot,
};
pub use run::{plan_mutual_information, run_experiment, run_with, RunLog, RunOptions, StepRecord};
pub use scenario::Scenario;
