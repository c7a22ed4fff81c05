use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::binomial_test_greater;
use super::trials::MAX_RETRIES;
use crate::datagen::{gen_lorenz, split_environments, LorenzGenConfig, LORENZ_DIM};
use crate::discovery::{discover, DiscoveryOptions};
use crate::error::{Error, Result};
use crate::invariance::TestConfig;
use crate::seed;
use crate::subset::Subset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub lorenz: LorenzGenConfig,
    /// Time points per environment.
    pub window: usize,
    pub num_envs: usize,
    pub warmup: usize,
    pub runs: usize,
    pub test: TestConfig,
    pub intercept: bool,
    /// Null rate of the one-sided binomial edge test.
    pub null_rate: f64,
    pub edge_level: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            lorenz: LorenzGenConfig::default(),
            window: 20,
            num_envs: 300,
            warmup: 500,
            runs: 500,
            test: TestConfig::default(),
            intercept: true,
            null_rate: 0.1,
            edge_level: 0.05,
        }
    }
}

impl NetworkConfig {
    /// Rows the series must have: warm-up, every window and one look-ahead.
    pub fn required_length(&self) -> usize {
        self.warmup + self.num_envs * self.window + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.window == 0 || self.num_envs == 0 {
            return Err(Error::config("runs, window and number of environments must be positive"));
        }
        if !(self.null_rate > 0.0 && self.null_rate < 1.0) {
            return Err(Error::config("null rate must lie in (0, 1)"));
        }
        if !(self.edge_level > 0.0 && self.edge_level < 1.0) {
            return Err(Error::config("edge level must lie in (0, 1)"));
        }
        let available = self.lorenz.horizon + 1;
        if available < self.required_length() {
            return Err(Error::shape(format!(
                "horizon {} yields {available} time points but warm-up {} + {} windows of {} \
                 + 1 look-ahead need {}",
                self.lorenz.horizon,
                self.warmup,
                self.num_envs,
                self.window,
                self.required_length()
            )));
        }
        self.test.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    /// 1-based coordinate.
    pub parent: usize,
    /// 1-based coordinate.
    pub target: usize,
    pub count: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRunRecord {
    pub run: usize,
    pub attempts: u32,
    /// Estimated parents per target, `None` when the run failed.
    pub estimates: Option<Vec<Subset>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    /// `counts[i][j]`: completed runs reporting coordinate `i` as a parent
    /// of target `j` (0-based).
    pub counts: Vec<Vec<usize>>,
    pub edges: Vec<NetworkEdge>,
    pub runs: usize,
    pub failures: usize,
    pub window: usize,
    pub num_envs: usize,
    pub records: Vec<NetworkRunRecord>,
}

fn run_once(config: &NetworkConfig, run_seed: u64) -> Result<Vec<Subset>> {
    let series = gen_lorenz(&config.lorenz, run_seed)?;
    let options = DiscoveryOptions {
        early_stop: true,
        ..Default::default()
    };
    (0..LORENZ_DIM)
        .map(|target| {
            let data = split_environments(&series, target, config.window, config.warmup, config.num_envs)?
                .intercept(config.intercept);
            let test = TestConfig {
                seed: seed::derive(run_seed, &[seed::TAG_TEST, target as u64]),
                ..config.test
            };
            Ok(discover(&data, &test, &options)?.estimated_parents)
        })
        .collect()
}

/// Counts how often each coordinate is found as a parent of each next-step
/// coordinate over independent trajectories, and declares an edge where the
/// count exceeds the null rate and the exact binomial p-value is at most
/// the edge level.
pub fn network_detect(config: &NetworkConfig, seed: u64) -> Result<NetworkResult> {
    config.validate()?;
    let records: Vec<NetworkRunRecord> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut attempt = 0;
            loop {
                let s = seed::derive(seed, &[seed::TAG_RUN, run as u64, attempt as u64]);
                match run_once(config, s) {
                    Ok(est) => {
                        return NetworkRunRecord { run, attempts: attempt + 1, estimates: Some(est), error: None }
                    }
                    Err(e) if attempt >= MAX_RETRIES => {
                        return NetworkRunRecord {
                            run,
                            attempts: attempt + 1,
                            estimates: None,
                            error: Some(e.to_string()),
                        }
                    }
                    Err(_) => attempt += 1,
                }
            }
        })
        .collect();

    let mut counts = vec![vec![0usize; LORENZ_DIM]; LORENZ_DIM];
    let mut done = 0usize;
    for est in records.iter().filter_map(|r| r.estimates.as_ref()) {
        done += 1;
        for (j, s) in est.iter().enumerate() {
            for i in s.iter() {
                counts[i][j] += 1;
            }
        }
    }
    if done == 0 {
        return Err(Error::invalid("every network run failed"));
    }
    let mut edges = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let p_value = binomial_test_greater(count as u64, done as u64, config.null_rate)?;
            if count as f64 > config.null_rate * done as f64 && p_value <= config.edge_level {
                edges.push(NetworkEdge { parent: i + 1, target: j + 1, count, p_value });
            }
        }
    }
    Ok(NetworkResult {
        counts,
        edges,
        runs: done,
        failures: records.len() - done,
        window: config.window,
        num_envs: config.num_envs,
        records,
    })
}
