//! The per-subset invariance test.
//!
//! For a candidate set `S`, every environment is regressed on `X_S` and the
//! ratio `T_S = min_e ‖rᵉ_S‖² / max_e ‖rᵉ_S‖²` is compared with Monte-Carlo
//! draws of `min_e Zᵉ / max_e Zᵉ`, where the `Zᵉ` are independent
//! chi-squared variables with `nᵉ − rank(X_SᵀX_S)` degrees of freedom.
//! Small `T_S` means the residual scales differ across environments, which
//! is evidence against `S` being an invariant set.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::dataset::MultiEnvDataset;
use crate::error::{Error, Result};
use crate::linalg::{solve_gram, Matrix, Vector};
use crate::seed;
use crate::subset::Subset;

/// Settings of the test `φ_S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestConfig {
    /// Level in `[0, 1)`; `0` never rejects.
    pub alpha: f64,
    /// Number `B` of Monte-Carlo null draws.
    pub mc_samples: usize,
    pub seed: u64,
    /// Relative singular-value cutoff; `None` uses `p·ε` for a `p×p` Gram.
    pub rank_tol: Option<f64>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.1,
            mc_samples: 100,
            seed: 0,
            rank_tol: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::config("mc_samples must be at least 1"));
        }
        if let Some(tol) = self.rank_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::config(format!("rank_tol must be positive, got {tol}")));
            }
        }
        Ok(())
    }
}

/// Outcome of `φ_S` for one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetTestReport {
    pub subset: Subset,
    pub residual_norms_sq: Vec<f64>,
    pub dofs: Vec<usize>,
    #[serde(with = "ratio_serde")]
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
}

/// `min/max` of the squared residual norms, `+∞` when all of them vanish.
pub fn test_statistic(residual_norms_sq: &[f64]) -> Result<f64> {
    if residual_norms_sq.is_empty() {
        return Err(Error::invalid("no residual norms supplied"));
    }
    if let Some(bad) = residual_norms_sq
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::invalid(format!(
            "squared residual norms must be finite and non-negative, got {bad}"
        )));
    }
    Ok(min_max_ratio(residual_norms_sq.iter().copied()))
}

fn min_max_ratio(values: impl Iterator<Item = f64>) -> f64 {
    let (min, max) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if max > 0.0 {
        min / max
    } else {
        f64::INFINITY
    }
}

/// Draws `min_e Zᵉ / max_e Zᵉ` for fixed per-environment degrees of freedom.
#[derive(Debug, Clone)]
pub struct NullRatioSampler {
    // (degrees of freedom, distribution, multiplicity); dof 0 has no entry.
    groups: Vec<(ChiSquared<f64>, usize)>,
    zero_dof_envs: usize,
}

impl NullRatioSampler {
    pub fn new(dofs: &[usize]) -> Self {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        let mut zero = 0;
        for &k in dofs {
            if k == 0 {
                zero += 1;
            } else if let Some(c) = counts.iter_mut().find(|(d, _)| *d == k) {
                c.1 += 1;
            } else {
                counts.push((k, 1));
            }
        }
        let groups = counts
            .into_iter()
            .map(|(k, m)| (ChiSquared::new(k as f64).expect("positive dof"), m))
            .collect();
        NullRatioSampler {
            groups,
            zero_dof_envs: zero,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.groups.is_empty() {
            return f64::INFINITY;
        }
        let mut min = if self.zero_dof_envs > 0 { 0.0 } else { f64::INFINITY };
        let mut max = 0.0f64;
        for (dist, mult) in &self.groups {
            for _ in 0..*mult {
                let z = dist.sample(rng);
                min = min.min(z);
                max = max.max(z);
            }
        }
        if max > 0.0 {
            min / max
        } else {
            f64::INFINITY
        }
    }
}

/// One draw of the null ratio. Zero degrees of freedom contribute `Zᵉ = 0`.
pub fn sample_null_ratio<R: Rng + ?Sized>(dofs: &[usize], rng: &mut R) -> f64 {
    NullRatioSampler::new(dofs).sample(rng)
}

/// Monte-Carlo p-value `(1 + #{b : R_b < T}) / (B + 1)`; `1` when `T = +∞`.
pub fn mc_pvalue<R: Rng + ?Sized>(statistic: f64, dofs: &[usize], draws: usize, rng: &mut R) -> f64 {
    if statistic.is_infinite() {
        return 1.0;
    }
    let sampler = NullRatioSampler::new(dofs);
    let below = (0..draws)
        .filter(|_| sampler.sample(rng) < statistic)
        .count();
    (1 + below) as f64 / (draws + 1) as f64
}

/// Per-environment sufficient statistics shared across subsets.
#[derive(Debug, Clone)]
pub(crate) struct PreparedEnv {
    gram: Matrix,
    xty: Vector,
}

/// A dataset with all Gram matrices precomputed.
#[derive(Debug, Clone)]
pub(crate) struct Prepared<'a> {
    data: &'a MultiEnvDataset,
    envs: Vec<PreparedEnv>,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(data: &'a MultiEnvDataset) -> Self {
        let envs = data
            .environments()
            .iter()
            .map(|env| PreparedEnv {
                gram: env.covariates.tr_mul(&env.covariates),
                xty: env.covariates.tr_mul(&env.target),
            })
            .collect();
        Prepared { data, envs }
    }

    /// Squared residual norms and degrees of freedom for every environment.
    fn residual_summary(&self, subset: Subset, rank_tol: Option<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
        let cols = self.data.design_columns(subset);
        let mut norms = Vec::with_capacity(self.envs.len());
        let mut dofs = Vec::with_capacity(self.envs.len());
        for (env, prep) in self.data.environments().iter().zip(&self.envs) {
            let n = env.len();
            let gram = prep.gram.select_rows(&cols).select_columns(&cols);
            let xty = prep.xty.select_rows(&cols);
            let sol = solve_gram(&gram, &xty, rank_tol)?;
            let dof = n.saturating_sub(sol.rank);
            // With rank ≥ nᵉ the target lies in the column span; the
            // residual is zero up to rounding.
            let norm_sq = if dof == 0 {
                0.0
            } else {
                let mut sum = 0.0;
                for i in 0..n {
                    let mut fit = 0.0;
                    for (b, &c) in sol.beta.iter().zip(&cols) {
                        fit += env.covariates[(i, c)] * b;
                    }
                    let r = env.target[i] - fit;
                    sum += r * r;
                }
                sum
            };
            norms.push(norm_sq);
            dofs.push(dof);
        }
        Ok((norms, dofs))
    }

    pub(crate) fn test(&self, subset: Subset, config: &TestConfig) -> Result<SubsetTestReport> {
        self.data.check_subset(subset)?;
        let (residual_norms_sq, dofs) = self.residual_summary(subset, config.rank_tol)?;
        let statistic = test_statistic(&residual_norms_sq)?;
        let mut rng = seed::stream(config.seed, &[seed::TAG_SUBSET, subset.mask()]);
        let p_value = mc_pvalue(statistic, &dofs, config.mc_samples, &mut rng);
        let rejected = statistic.is_finite() && p_value <= config.alpha;
        Ok(SubsetTestReport {
            subset,
            residual_norms_sq,
            dofs,
            statistic,
            p_value,
            rejected,
        })
    }
}

/// Runs `φ_S` on `dataset` for `subset`.
///
/// The Monte-Carlo stream is derived from `(config.seed, subset)`, so the
/// outcome for a subset does not depend on which other subsets are tested
/// or in which order.
pub fn phi_s(dataset: &MultiEnvDataset, subset: Subset, config: &TestConfig) -> Result<SubsetTestReport> {
    config.validate()?;
    Prepared::new(dataset).test(subset, config)
}

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected statistic {t:?}"))),
        }
    }
}
