use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::stats::{ks_critical_value, ks_statistic};
use crate::datagen::{gen_independent, Family, IndependentGenConfig};
use crate::error::{Error, Result};
use crate::invariance::{phi_s, TestConfig};
use crate::linalg::{least_squares, residuals};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: String, measured: f64, lower: f64, upper: f64) -> Self {
        CheckResult { name, measured, lower, upper, passed: lower <= measured && measured <= upper }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Must have Gaussian noise for the checks to be exact.
    pub generator: IndependentGenConfig,
    pub alphas: Vec<f64>,
    pub replications: usize,
    pub mc_samples: usize,
    pub ks_samples: usize,
    pub ks_level: f64,
    pub intercept: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            generator: IndependentGenConfig::default(),
            alphas: vec![0.05, 0.1],
            replications: 2000,
            mc_samples: 100,
            ks_samples: 10_000,
            ks_level: 0.01,
            intercept: true,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.generator.family != Family::Normal {
            return Err(Error::config("calibration needs the normal family"));
        }
        if self.replications == 0 || self.ks_samples == 0 {
            return Err(Error::config("replications and KS sample size must be positive"));
        }
        if !(self.ks_level > 0.0 && self.ks_level < 1.0) {
            return Err(Error::config("KS level must lie in (0, 1)"));
        }
        for &alpha in &self.alphas {
            TestConfig { alpha, mc_samples: self.mc_samples, ..Default::default() }.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Rejection frequency of `φ_{S*}` at level `alpha` over fresh datasets,
/// checked against `alpha ± 3` binomial standard errors.
pub fn null_rejection_check(config: &CalibrationConfig, alpha: f64, seed: u64) -> Result<CheckResult> {
    let parents = config.generator.parents;
    let rejections = (0..config.replications)
        .into_par_iter()
        .map(|rep| -> Result<bool> {
            let s = seed::derive(seed, &[seed::TAG_RUN, rep as u64]);
            let (data, _) = gen_independent(&config.generator, s)?;
            let data = data.intercept(config.intercept);
            let test = TestConfig {
                alpha,
                mc_samples: config.mc_samples,
                seed: seed::derive(s, &[seed::TAG_TEST]),
                rank_tol: None,
            };
            Ok(phi_s(&data, parents, &test)?.rejected)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&r| r)
        .count();
    let reps = config.replications as f64;
    let rate = rejections as f64 / reps;
    let se = (alpha * (1.0 - alpha) / reps).sqrt();
    Ok(CheckResult::new(
        format!("null rejection rate at alpha = {alpha}"),
        rate,
        alpha - 3.0 * se,
        alpha + 3.0 * se,
    ))
}

/// Scaled residual sums of squares `‖rᵉ_{S*}‖² / σ_Y²` of true-parent
/// regressions, `count` values in generation order.
pub fn scaled_residual_norms(config: &CalibrationConfig, count: usize, seed: u64) -> Result<Vec<f64>> {
    let per = config.generator.num_envs;
    let datasets = count.div_ceil(per);
    let var = config.generator.target_noise_std.powi(2);
    let parents = config.generator.parents;
    let chunks = (0..datasets)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (data, _) = gen_independent(&config.generator, seed::derive(seed, &[seed::TAG_RUN, k as u64]))?;
            let data = data.intercept(config.intercept);
            (0..data.num_envs())
                .map(|e| {
                    let x = data.design(e, parents);
                    let y = &data.environments()[e].target;
                    let r = residuals(&x, y, &least_squares(&x, y, None)?)?;
                    Ok(r.norm_squared() / var)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<f64> = chunks.into_iter().flatten().collect();
    out.truncate(count);
    Ok(out)
}

/// KS distance of scaled residual norms from `χ²(n − |S*| − intercept)`.
pub fn residual_law_check(config: &CalibrationConfig, seed: u64) -> Result<CheckResult> {
    let dof = config.generator.samples_per_env as i64
        - config.generator.parents.len() as i64
        - config.intercept as i64;
    if dof < 1 {
        return Err(Error::config("residual law needs more samples than regressors"));
    }
    let values = scaled_residual_norms(config, config.ks_samples, seed)?;
    let law = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    let d = ks_statistic(&values, |x| law.cdf(x))?;
    Ok(CheckResult::new(
        format!("residual chi-squared law, {dof} degrees of freedom"),
        d,
        0.0,
        ks_critical_value(values.len(), config.ks_level),
    ))
}

pub fn run_calibration(config: &CalibrationConfig, seed: u64) -> Result<CalibrationReport> {
    config.validate()?;
    let mut checks = config
        .alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| null_rejection_check(config, a, seed::derive(seed, &[i as u64])))
        .collect::<Result<Vec<_>>>()?;
    checks.push(residual_law_check(config, seed::derive(seed, &[u64::MAX]))?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(CalibrationReport { checks, passed })
}
