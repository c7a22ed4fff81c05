use serde::{Deserialize, Serialize};

use super::{check_positive, Family, ParamRange, Standardized};
use crate::dataset::{EnvironmentData, GroundTruth, MultiEnvDataset};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::seed;
use crate::subset::Subset;

/// Parents of `Y` in the SEM: `x2` and `x3` (0-based 1 and 2).
pub const SEM_PARENTS: [usize; 2] = [1, 2];

/// Linear SEM over `X1..X6, Y`:
///
/// ```text
/// X1 = ε1
/// X2 = X1 + ε2
/// X3 = 0.3·X1 + ε3
/// X4 = 0.2·X3 + ε4        (ε4 has std σ3 unless `separate_sigma4`)
/// Y  = β2·X2 + β3·X3 + εY
/// X5 = 0.1·X2 + Y + ε5
/// X6 = Y + ε6
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemGenConfig {
    pub num_envs: usize,
    pub samples_per_env: usize,
    pub noise_family: Family,
    /// Range of the per-environment node noise stds σ1..σ6.
    pub sigma_range: ParamRange,
    /// Range of the per-environment coefficients β2, β3.
    pub beta_range: ParamRange,
    pub target_noise_std: f64,
    /// When set, overrides both ranges with `σ ~ U[2, 2+h]`, `β ~ U[1, 1+h]`.
    pub heterogeneity: Option<f64>,
    /// Use σ4 for the X4 noise instead of reusing σ3.
    pub separate_sigma4: bool,
    pub student_t_dof: f64,
}

impl Default for SemGenConfig {
    fn default() -> Self {
        SemGenConfig {
            num_envs: 30,
            samples_per_env: 50,
            noise_family: Family::Normal,
            sigma_range: ParamRange::new(1.0, 5.0),
            beta_range: ParamRange::new(1.0, 5.0),
            target_noise_std: 2.0,
            heterogeneity: None,
            separate_sigma4: false,
            student_t_dof: 3.0,
        }
    }
}

impl SemGenConfig {
    pub fn with_heterogeneity(h: f64) -> Self {
        SemGenConfig {
            heterogeneity: Some(h),
            ..Default::default()
        }
    }

    /// Effective (sigma, beta) ranges after applying `heterogeneity`.
    pub fn ranges(&self) -> (ParamRange, ParamRange) {
        match self.heterogeneity {
            Some(h) => (ParamRange::new(2.0, 2.0 + h), ParamRange::new(1.0, 1.0 + h)),
            None => (self.sigma_range, self.beta_range),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_envs == 0 || self.samples_per_env == 0 {
            return Err(Error::config("environments and samples must be positive"));
        }
        if let Some(h) = self.heterogeneity {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::config(format!("heterogeneity must be non-negative, got {h}")));
            }
        }
        let (sigma, beta) = self.ranges();
        sigma.validate("sigma", true)?;
        beta.validate("beta", false)?;
        check_positive("target noise std", self.target_noise_std)?;
        Standardized::new(self.noise_family, 0.0, 1.0, self.student_t_dof)?;
        Ok(())
    }
}

/// Evaluates the structural equations for given noise terms
/// `[ε1, .., ε6, εY]`, returning `[X1, .., X6, Y]`.
pub fn sem_evaluate(beta2: f64, beta3: f64, noise: [f64; 7]) -> [f64; 7] {
    let [e1, e2, e3, e4, e5, e6, ey] = noise;
    let x1 = e1;
    let x2 = x1 + e2;
    let x3 = 0.3 * x1 + e3;
    let x4 = 0.2 * x3 + e4;
    let y = beta2 * x2 + beta3 * x3 + ey;
    let x5 = 0.1 * x2 + y + e5;
    let x6 = y + e6;
    [x1, x2, x3, x4, x5, x6, y]
}

/// Samples the SEM per environment. Candidate covariates are `X1..X6`;
/// `X5` and `X6` are descendants of the target.
pub fn gen_sem(config: &SemGenConfig, seed: u64) -> Result<(MultiEnvDataset, GroundTruth)> {
    config.validate()?;
    let (sigma_range, beta_range) = config.ranges();
    let n = config.samples_per_env;
    let parents: Subset = SEM_PARENTS.into_iter().collect();
    let mut envs = Vec::with_capacity(config.num_envs);
    let mut coefficients = Vec::with_capacity(config.num_envs);
    let target_noise = Standardized::new(config.noise_family, 0.0, config.target_noise_std, config.student_t_dof)?;
    for e in 0..config.num_envs {
        let mut rng = seed::stream(seed, &[seed::TAG_ENV, e as u64]);
        let sigmas: [f64; 6] = std::array::from_fn(|_| sigma_range.sample(&mut rng));
        let beta2 = beta_range.sample(&mut rng);
        let beta3 = beta_range.sample(&mut rng);
        let sigma_for = |node: usize| {
            if node == 3 && !config.separate_sigma4 {
                sigmas[2]
            } else {
                sigmas[node]
            }
        };
        let node_noise = (0..6)
            .map(|k| Standardized::new(config.noise_family, 0.0, sigma_for(k), config.student_t_dof))
            .collect::<Result<Vec<_>>>()?;
        let mut x = Matrix::zeros(n, 6);
        let mut y = Vector::zeros(n);
        for i in 0..n {
            let mut noise = [0.0; 7];
            for (k, dist) in node_noise.iter().enumerate() {
                noise[k] = dist.sample(&mut rng);
            }
            noise[6] = target_noise.sample(&mut rng);
            let values = sem_evaluate(beta2, beta3, noise);
            for j in 0..6 {
                x[(i, j)] = values[j];
            }
            y[i] = values[6];
        }
        envs.push(EnvironmentData::new(x, y)?);
        coefficients.push(vec![0.0, beta2, beta3, 0.0, 0.0, 0.0]);
    }
    let mut metadata = serde_json::Map::new();
    metadata.insert("config".into(), serde_json::to_value(config)?);
    metadata.insert("seed".into(), seed.into());
    Ok((
        MultiEnvDataset::new(envs)?,
        GroundTruth {
            parents,
            coefficients,
            generator: "sem".into(),
            metadata,
        },
    ))
}
