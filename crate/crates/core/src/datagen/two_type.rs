use serde::{Deserialize, Serialize};

use super::{check_positive, Family, Standardized};
use crate::dataset::{EnvironmentData, GroundTruth, MultiEnvDataset};
use crate::error::{Error, Result};
use crate::heterogeneity::HeterogeneityInput;
use crate::linalg::{Matrix, Vector};
use crate::seed;
use crate::subset::Subset;

/// Two environment types with fixed parameters: the first half of the
/// environments uses `(beta1, sigma_v, mean_v)`, the second half
/// `(beta2, sigma_w, mean_w)`. Covariates are independent normals and the
/// target noise is Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTypeGenConfig {
    pub num_envs: usize,
    pub samples_per_env: usize,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sigma_v: Vec<f64>,
    pub sigma_w: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub mean_w: Vec<f64>,
    pub sigma_y: f64,
}

impl TwoTypeGenConfig {
    pub fn dimension(&self) -> usize {
        self.beta1.len()
    }

    /// Union of the supports of `beta1` and `beta2`.
    pub fn parents(&self) -> Subset {
        self.beta1
            .iter()
            .zip(&self.beta2)
            .enumerate()
            .filter(|(_, (a, b))| **a != 0.0 || **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Heterogeneity inputs for testing the (wrong) subset `tested`.
    pub fn heterogeneity_input(&self, tested: Subset) -> HeterogeneityInput {
        HeterogeneityInput {
            beta1: self.beta1.clone(),
            beta2: self.beta2.clone(),
            sigma_v: self.sigma_v.clone(),
            sigma_w: self.sigma_w.clone(),
            sigma_y: self.sigma_y,
            omitted: self.parents().difference(tested),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        if self.num_envs < 2 || !self.num_envs.is_multiple_of(2) {
            return Err(Error::config("the two-type design needs an even number of environments"));
        }
        if self.samples_per_env <= d {
            return Err(Error::config("the two-type design needs more samples than covariates"));
        }
        let lens = [
            self.beta2.len(),
            self.sigma_v.len(),
            self.sigma_w.len(),
            self.mean_v.len(),
            self.mean_w.len(),
        ];
        if lens.iter().any(|&l| l != d) {
            return Err(Error::config("all parameter vectors must share the dimension"));
        }
        for s in self.sigma_v.iter().chain(&self.sigma_w) {
            check_positive("covariate std", *s)?;
        }
        check_positive("target noise std", self.sigma_y)
    }
}

pub fn gen_two_type(config: &TwoTypeGenConfig, seed: u64) -> Result<(MultiEnvDataset, GroundTruth)> {
    config.validate()?;
    let (n, d) = (config.samples_per_env, config.dimension());
    let half = config.num_envs / 2;
    let noise = Standardized::new(Family::Normal, 0.0, config.sigma_y, 0.0)?;
    let mut envs = Vec::with_capacity(config.num_envs);
    let mut coefficients = Vec::with_capacity(config.num_envs);
    for e in 0..config.num_envs {
        let (beta, sigma, mean) = if e < half {
            (&config.beta1, &config.sigma_v, &config.mean_v)
        } else {
            (&config.beta2, &config.sigma_w, &config.mean_w)
        };
        let dists = (0..d)
            .map(|j| Standardized::new(Family::Normal, mean[j], sigma[j], 0.0))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = seed::stream(seed, &[seed::TAG_ENV, e as u64]);
        let mut x = Matrix::zeros(n, d);
        let mut y = Vector::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..d {
                let v = dists[j].sample(&mut rng);
                x[(i, j)] = v;
                acc += beta[j] * v;
            }
            y[i] = acc + noise.sample(&mut rng);
        }
        envs.push(EnvironmentData::new(x, y)?);
        coefficients.push(beta.clone());
    }
    let mut metadata = serde_json::Map::new();
    metadata.insert("config".into(), serde_json::to_value(config)?);
    metadata.insert("seed".into(), seed.into());
    Ok((
        MultiEnvDataset::new(envs)?,
        GroundTruth {
            parents: config.parents(),
            coefficients,
            generator: "two_type".into(),
            metadata,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heterogeneity::heterogeneity_index;

    fn config() -> TwoTypeGenConfig {
        TwoTypeGenConfig {
            num_envs: 4,
            samples_per_env: 20,
            beta1: vec![1.0, 0.0],
            beta2: vec![10.0, 0.0],
            sigma_v: vec![1.0, 1.0],
            sigma_w: vec![1.0, 1.0],
            mean_v: vec![0.0, 0.0],
            mean_w: vec![0.0, 0.0],
            sigma_y: 1.0,
        }
    }

    #[test]
    fn parameters_follow_the_two_types() {
        let (ds, truth) = gen_two_type(&config(), 1).unwrap();
        assert_eq!(ds.num_envs(), 4);
        assert_eq!(truth.parents.to_vec(), vec![0]);
        assert_eq!(truth.coefficients[0], vec![1.0, 0.0]);
        assert_eq!(truth.coefficients[3], vec![10.0, 0.0]);
    }

    #[test]
    fn heterogeneity_of_omitting_the_parent() {
        let cfg = config();
        let i = heterogeneity_index(&cfg.heterogeneity_input([1].into_iter().collect())).unwrap();
        assert!((i - 2.0 / 101.0).abs() < 1e-15);
        let i = heterogeneity_index(&cfg.heterogeneity_input([0].into_iter().collect())).unwrap();
        assert_eq!(i, 1.0);
    }

    #[test]
    fn validation() {
        let mut odd = config();
        odd.num_envs = 3;
        assert!(gen_two_type(&odd, 0).is_err());
        let mut short = config();
        short.samples_per_env = 2;
        assert!(gen_two_type(&short, 0).is_err());
    }
}
