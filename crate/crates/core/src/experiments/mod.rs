//! Simulation studies: error rates over parameter grids, network detection
//! on the Lorenz system and calibration self-checks.

mod calibration;
mod network;
pub mod stats;
mod trials;

pub use calibration::{
    null_rejection_check, residual_law_check, run_calibration, scaled_residual_norms,
    CalibrationConfig, CalibrationReport, CheckResult,
};
pub use network::{network_detect, NetworkConfig, NetworkEdge, NetworkResult, NetworkRunRecord};
pub use stats::{binomial_test_greater, clopper_pearson, Interval, RateEstimate};
pub use trials::{
    run_seed, run_trials, write_metrics_csv, GeneratorConfig, RunOutcome, RunRecord, Scenario, Sweep,
    SweepVariable, TrialMetrics, MAX_RETRIES,
};
