//! Causal parent discovery from multi-environment data under locally linear
//! models.
//!
//! For every candidate subset `S` of covariates, each environment is
//! regressed on `X_S` and the spread of residual sums of squares across
//! environments is tested against a Monte-Carlo calibrated chi-squared
//! ratio. The estimate is the intersection of all subsets that survive the
//! test, which contains only true parents with probability at least `1 − α`
//! when the model holds.
//!
//! Besides the procedure itself the crate ships the synthetic data
//! generators and the trial harness used to study its error rates.

pub mod datagen;
pub mod dataset;
pub mod discovery;
pub mod error;
pub mod experiments;
pub mod heterogeneity;
pub mod invariance;
pub mod io;
pub mod linalg;
pub mod seed;
pub mod subset;

pub use dataset::{EnvironmentData, GroundTruth, MultiEnvDataset};
pub use discovery::{discover, DiscoveryOptions, DiscoveryResult, DiscoveryStatus};
pub use error::{Error, Result};
pub use heterogeneity::{heterogeneity_index, infinite_env_limit, power_bound, HeterogeneityInput};
pub use invariance::{mc_pvalue, phi_s, sample_null_ratio, test_statistic, SubsetTestReport, TestConfig};
pub use subset::Subset;
