use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::subset::{Subset, MAX_REPRESENTABLE_DIM};

/// Observations `(Xᵉ, Yᵉ)` of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentData {
    pub covariates: Matrix,
    pub target: Vector,
}

impl EnvironmentData {
    pub fn new(covariates: Matrix, target: Vector) -> Result<Self> {
        if covariates.nrows() != target.len() {
            return Err(Error::shape(format!(
                "environment has {} covariate rows but {} targets",
                covariates.nrows(),
                target.len()
            )));
        }
        if target.is_empty() {
            return Err(Error::invalid("environment has no observations"));
        }
        if !covariates.iter().chain(target.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("environment contains non-finite values"));
        }
        Ok(EnvironmentData { covariates, target })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// Observations of every environment.
///
/// When `intercept_added` is set, each covariate matrix carries a trailing
/// column of ones at index `num_covariates`. That column is never a
/// candidate parent; it is part of every regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiEnvDataset {
    environments: Vec<EnvironmentData>,
    labels: Vec<String>,
    num_covariates: usize,
    intercept_added: bool,
}

impl MultiEnvDataset {
    /// Builds a dataset from raw environments (no intercept column).
    /// Labels default to `"1".."E"`.
    pub fn new(environments: Vec<EnvironmentData>) -> Result<Self> {
        let labels = (1..=environments.len()).map(|e| e.to_string()).collect();
        Self::with_labels(environments, labels)
    }

    pub fn with_labels(environments: Vec<EnvironmentData>, labels: Vec<String>) -> Result<Self> {
        let first = environments
            .first()
            .ok_or_else(|| Error::invalid("dataset has no environments"))?;
        let d = first.covariates.ncols();
        if let Some((e, env)) = environments
            .iter()
            .enumerate()
            .find(|(_, env)| env.covariates.ncols() != d)
        {
            return Err(Error::shape(format!(
                "environment {} has {} covariates, expected {d}",
                e + 1,
                env.covariates.ncols()
            )));
        }
        if d > MAX_REPRESENTABLE_DIM {
            return Err(Error::invalid(format!(
                "{d} covariates exceed the supported maximum of {MAX_REPRESENTABLE_DIM}"
            )));
        }
        if labels.len() != environments.len() {
            return Err(Error::shape("one label per environment required"));
        }
        Ok(MultiEnvDataset {
            environments,
            labels,
            num_covariates: d,
            intercept_added: false,
        })
    }

    /// Appends the constant-one column to every environment (idempotent).
    pub fn with_intercept(mut self) -> Self {
        if !self.intercept_added {
            for env in &mut self.environments {
                let n = env.covariates.nrows();
                let cols = env.covariates.ncols();
                env.covariates = std::mem::replace(&mut env.covariates, Matrix::zeros(0, 0))
                    .insert_column(cols, 1.0);
                debug_assert_eq!(env.covariates.nrows(), n);
            }
            self.intercept_added = true;
        }
        self
    }

    /// Adds the intercept column when `flag` is set.
    pub fn intercept(self, flag: bool) -> Self {
        if flag {
            self.with_intercept()
        } else {
            self
        }
    }

    pub fn environments(&self) -> &[EnvironmentData] {
        &self.environments
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_envs(&self) -> usize {
        self.environments.len()
    }

    /// Number of candidate covariates `D` (excluding any intercept column).
    pub fn num_covariates(&self) -> usize {
        self.num_covariates
    }

    pub fn intercept_added(&self) -> bool {
        self.intercept_added
    }

    /// Column indices of the regression design for `subset`, intercept last.
    pub fn design_columns(&self, subset: Subset) -> Vec<usize> {
        let mut cols = subset.to_vec();
        if self.intercept_added {
            cols.push(self.num_covariates);
        }
        cols
    }

    /// `Xᵉ_S`, including the intercept column when present.
    pub fn design(&self, env: usize, subset: Subset) -> Matrix {
        let x = &self.environments[env].covariates;
        x.select_columns(&self.design_columns(subset))
    }

    pub(crate) fn check_subset(&self, subset: Subset) -> Result<()> {
        if subset.span() > self.num_covariates {
            return Err(Error::invalid(format!(
                "subset {:?} references covariates beyond D = {}",
                subset.to_one_based(),
                self.num_covariates
            )));
        }
        Ok(())
    }

    /// Raw covariates without the intercept column.
    pub fn raw_covariates(&self, env: usize) -> Matrix {
        let x = &self.environments[env].covariates;
        x.columns(0, self.num_covariates).into_owned()
    }

    /// Multiplies every target by `factor`.
    pub fn scale_targets(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for env in &mut out.environments {
            env.target *= factor;
        }
        out
    }

    /// Reorders candidate covariates: new column `perm[i]` holds old column `i`.
    pub fn permute_covariates(&self, perm: &[usize]) -> Result<Self> {
        let d = self.num_covariates;
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::invalid("not a permutation of the covariate indices"));
        }
        let mut out = self.clone();
        for (env, src) in out.environments.iter_mut().zip(&self.environments) {
            for (old, &new) in perm.iter().enumerate() {
                env.covariates.set_column(new, &src.covariates.column(old));
            }
        }
        Ok(out)
    }
}

/// Ground truth attached to synthetic datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub parents: Subset,
    /// `βᵉ` per environment over all `D` covariates (zero off the support).
    pub coefficients: Vec<Vec<f64>>,
    pub generator: String,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MultiEnvDataset {
        let e1 = EnvironmentData::new(
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            Vector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        let e2 = EnvironmentData::new(
            Matrix::from_row_slice(1, 2, &[5.0, 6.0]),
            Vector::from_vec(vec![3.0]),
        )
        .unwrap();
        MultiEnvDataset::new(vec![e1, e2]).unwrap()
    }

    #[test]
    fn intercept_column_is_appended_once() {
        let ds = toy().with_intercept().with_intercept();
        assert!(ds.intercept_added());
        assert_eq!(ds.num_covariates(), 2);
        assert_eq!(ds.environments()[0].covariates.ncols(), 3);
        assert_eq!(ds.design_columns(Subset::EMPTY), vec![2]);
        let x = ds.design(0, [1].into_iter().collect());
        assert_eq!(x, Matrix::from_row_slice(2, 2, &[2.0, 1.0, 4.0, 1.0]));
        assert_eq!(ds.raw_covariates(1), Matrix::from_row_slice(1, 2, &[5.0, 6.0]));
    }

    #[test]
    fn rejects_inconsistent_environments() {
        let bad = EnvironmentData::new(Matrix::zeros(2, 2), Vector::zeros(3));
        assert!(matches!(bad, Err(Error::Shape(_))));
        let empty = EnvironmentData::new(Matrix::zeros(0, 2), Vector::zeros(0));
        assert!(matches!(empty, Err(Error::InvalidInput(_))));
        let a = EnvironmentData::new(Matrix::zeros(1, 2), Vector::zeros(1)).unwrap();
        let b = EnvironmentData::new(Matrix::zeros(1, 3), Vector::zeros(1)).unwrap();
        assert!(MultiEnvDataset::new(vec![a, b]).is_err());
        assert!(MultiEnvDataset::new(vec![]).is_err());
    }

    #[test]
    fn permutation_moves_columns() {
        let ds = toy().permute_covariates(&[1, 0]).unwrap();
        assert_eq!(ds.environments()[0].covariates[(0, 0)], 2.0);
        assert!(toy().permute_covariates(&[0, 0]).is_err());
    }
}
