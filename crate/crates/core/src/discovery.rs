//! Exhaustive subset search and the intersection estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiEnvDataset;
use crate::error::{Error, Result};
use crate::invariance::{Prepared, SubsetTestReport, TestConfig};
use crate::subset::{subsets_by_cardinality, Subset};

pub const DEFAULT_MAX_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryOptions {
    /// Largest `D` the enumeration accepts.
    pub max_dim: usize,
    /// Stop once the running intersection is empty. Only the estimate is
    /// then guaranteed; reports cover the subsets tested so far.
    pub early_stop: bool,
}

impl Default for DiscoveryOptions {
    fn default() -> Self {
        DiscoveryOptions {
            max_dim: DEFAULT_MAX_DIM,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscoveryStatus {
    /// At least one subset was accepted; the estimate is their intersection.
    Estimated,
    /// Every subset was rejected. The estimate is reported as `∅`; this
    /// outcome points at a misspecified model rather than at parents.
    ModelRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub estimated_parents: Subset,
    pub status: DiscoveryStatus,
    pub subsets_tested: usize,
    pub early_stopped: bool,
    pub reports: Vec<SubsetTestReport>,
}

impl DiscoveryResult {
    pub fn accepted(&self) -> impl Iterator<Item = &SubsetTestReport> {
        self.reports.iter().filter(|r| !r.rejected)
    }
}

/// Tests every subset of `{1..D}` and intersects the accepted ones.
///
/// Subsets are visited by increasing cardinality, lexicographically within
/// a cardinality; each level is tested in parallel. Per-subset random
/// streams make the result independent of the thread count.
pub fn discover(
    dataset: &MultiEnvDataset,
    config: &TestConfig,
    options: &DiscoveryOptions,
) -> Result<DiscoveryResult> {
    config.validate()?;
    if dataset.num_envs() < 2 {
        return Err(Error::InsufficientEnvironments {
            found: dataset.num_envs(),
        });
    }
    let d = dataset.num_covariates();
    if d > options.max_dim {
        return Err(Error::Capacity {
            dim: d,
            limit: options.max_dim,
        });
    }

    let prepared = Prepared::new(dataset);
    let mut reports: Vec<SubsetTestReport> = Vec::with_capacity(1 << d);
    let mut intersection = Subset::full(d);
    let mut any_accepted = false;
    let mut early_stopped = false;

    let levels: Vec<Vec<Subset>> = subsets_by_cardinality(d).collect();
    let total: usize = levels.iter().map(Vec::len).sum();
    for level in levels {
        let level_reports = level
            .par_iter()
            .map(|&s| prepared.test(s, config))
            .collect::<Result<Vec<_>>>()?;
        for rep in &level_reports {
            if !rep.rejected {
                any_accepted = true;
                intersection = intersection.intersection(rep.subset);
            }
        }
        reports.extend(level_reports);
        if options.early_stop && any_accepted && intersection.is_empty() {
            early_stopped = reports.len() < total;
            break;
        }
    }

    let (estimated_parents, status) = if any_accepted {
        (intersection, DiscoveryStatus::Estimated)
    } else {
        (Subset::EMPTY, DiscoveryStatus::ModelRejected)
    };
    debug_assert!(reports
        .iter()
        .filter(|r| !r.rejected)
        .all(|r| estimated_parents.is_subset_of(r.subset)));

    Ok(DiscoveryResult {
        estimated_parents,
        status,
        subsets_tested: reports.len(),
        early_stopped,
        reports,
    })
}

/// Intersection of an accepted family, `None` for an empty family.
pub fn intersect_accepted<I: IntoIterator<Item = Subset>>(accepted: I) -> Option<Subset> {
    accepted.into_iter().reduce(Subset::intersection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EnvironmentData;
    use crate::linalg::{Matrix, Vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Two environment types; covariate 0 drives the target with different
    /// coefficients, covariates 1 and 2 are noise.
    fn dataset(envs: usize, n: usize, seed: u64) -> MultiEnvDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let list = (0..envs)
            .map(|e| {
                let x = Matrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b = if e % 2 == 0 { 1.0 } else { 4.0 };
                let y = Vector::from_fn(n, |i, _| b * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal));
                EnvironmentData::new(x, y).unwrap()
            })
            .collect();
        MultiEnvDataset::new(list).unwrap().with_intercept()
    }

    #[test]
    fn intersection_examples() {
        let s = |v: &[usize]| -> Subset { v.iter().copied().collect() };
        assert_eq!(intersect_accepted([s(&[]), s(&[0, 1])]), Some(Subset::EMPTY));
        let family = [s(&[1, 2]), s(&[0, 1, 2]), s(&[1, 2, 3]), s(&[0, 1, 2, 3])];
        assert_eq!(intersect_accepted(family), Some(s(&[1, 2])));
        assert_eq!(intersect_accepted(Vec::<Subset>::new()), None);
    }

    #[test]
    fn enumerates_every_subset_and_recovers_parent() {
        let ds = dataset(10, 40, 1);
        let res = discover(&ds, &TestConfig::default(), &DiscoveryOptions::default()).unwrap();
        assert_eq!(res.subsets_tested, 8);
        assert_eq!(res.reports.len(), 8);
        assert!(!res.early_stopped);
        assert_eq!(res.status, DiscoveryStatus::Estimated);
        assert_eq!(res.estimated_parents, [0].into_iter().collect());
        for acc in res.accepted() {
            assert!(res.estimated_parents.is_subset_of(acc.subset));
        }
    }

    #[test]
    fn zero_alpha_accepts_everything() {
        let ds = dataset(4, 30, 2);
        let cfg = TestConfig { alpha: 0.0, ..TestConfig::default() };
        let res = discover(&ds, &cfg, &DiscoveryOptions::default()).unwrap();
        assert!(res.reports.iter().all(|r| !r.rejected));
        assert_eq!(res.estimated_parents, Subset::EMPTY);
    }

    #[test]
    fn all_rejected_is_flagged() {
        // α just below one rejects whenever p ≤ α, i.e. unless no draw falls
        // below the statistic (p = 1 needs all B draws below T).
        let ds = dataset(4, 30, 3);
        let cfg = TestConfig { alpha: 0.999, mc_samples: 1, ..TestConfig::default() };
        let res = discover(&ds, &cfg, &DiscoveryOptions::default()).unwrap();
        if res.reports.iter().all(|r| r.rejected) {
            assert_eq!(res.status, DiscoveryStatus::ModelRejected);
            assert_eq!(res.estimated_parents, Subset::EMPTY);
        }
    }

    #[test]
    fn capacity_and_environment_errors() {
        let ds = dataset(4, 20, 4);
        let opts = DiscoveryOptions { max_dim: 2, ..Default::default() };
        assert!(matches!(
            discover(&ds, &TestConfig::default(), &opts),
            Err(Error::Capacity { dim: 3, limit: 2 })
        ));
        let single = MultiEnvDataset::new(vec![ds.environments()[0].clone()]).unwrap();
        assert!(matches!(
            discover(&single, &TestConfig::default(), &DiscoveryOptions::default()),
            Err(Error::InsufficientEnvironments { found: 1 })
        ));
    }

    #[test]
    fn early_stop_agrees_with_full_enumeration() {
        for seed in 0..20 {
            let ds = dataset(6, 12, 100 + seed);
            let cfg = TestConfig { seed, ..TestConfig::default() };
            let full = discover(&ds, &cfg, &DiscoveryOptions::default()).unwrap();
            let quick = discover(&ds, &cfg, &DiscoveryOptions { early_stop: true, ..Default::default() }).unwrap();
            assert_eq!(full.estimated_parents, quick.estimated_parents);
            assert_eq!(full.status, quick.status);
            assert_eq!(&full.reports[..quick.reports.len()], &quick.reports[..]);
        }
    }
}
