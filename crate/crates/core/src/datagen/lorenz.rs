use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{EnvironmentData, MultiEnvDataset};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::seed;

pub const LORENZ_DIM: usize = 6;

pub const DEFAULT_INITIAL_STATE: [f64; LORENZ_DIM] = [2.0, 0.97, 0.99, 1.0, 0.97, 1.0];

const DIVERGENCE_BOUND: f64 = 1e15;

/// Noisy five-dimensional Lorenz map plus an independent random walk in
/// coordinate 6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LorenzGenConfig {
    /// Number of steps `T`; the series has `T + 1` rows.
    pub horizon: usize,
    pub initial_state: [f64; LORENZ_DIM],
    pub noise_std: f64,
}

impl Default for LorenzGenConfig {
    fn default() -> Self {
        LorenzGenConfig {
            horizon: 8500,
            initial_state: DEFAULT_INITIAL_STATE,
            noise_std: 1.0,
        }
    }
}

/// One step of the map given the noise vector.
pub fn lorenz_step(x: &[f64; LORENZ_DIM], noise: &[f64; LORENZ_DIM]) -> [f64; LORENZ_DIM] {
    let [x1, x2, x3, x4, x5, x6] = *x;
    [
        0.9 * x1 + 0.1 * x2 + noise[0],
        0.28 * x1 - 0.01 * x1 * x3 + 0.99 * x2 + noise[1],
        0.01 * x1 * (x2 - x4) + 0.9733 * x3 + noise[2],
        0.01 * x1 * (x3 - 2.0 * x5) + 0.9366 * x4 + noise[3],
        0.02 * x1 * x4 + 0.96 * x5 + noise[4],
        x6 + noise[5],
    ]
}

/// Iterates the map for `horizon` steps with i.i.d. normal noise, returning
/// a `(T + 1) × 6` matrix whose first row is the initial state.
pub fn gen_lorenz(config: &LorenzGenConfig, seed: u64) -> Result<Matrix> {
    if config.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if !(config.noise_std.is_finite() && config.noise_std >= 0.0) {
        return Err(Error::config("noise std must be finite and non-negative"));
    }
    if !config.initial_state.iter().all(|v| v.is_finite()) {
        return Err(Error::config("initial state must be finite"));
    }
    let mut rng = seed::stream(seed, &[seed::TAG_ENV]);
    let mut out = Matrix::zeros(config.horizon + 1, LORENZ_DIM);
    let mut state = config.initial_state;
    out.row_mut(0).copy_from_slice(&state);
    for step in 1..=config.horizon {
        let noise: [f64; LORENZ_DIM] =
            std::array::from_fn(|_| config.noise_std * rng.sample::<f64, _>(StandardNormal));
        state = lorenz_step(&state, &noise);
        if state.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence {
                step,
                bound: DIVERGENCE_BOUND,
            });
        }
        out.row_mut(step).copy_from_slice(&state);
    }
    Ok(out)
}

/// Cuts a series into `num_envs` consecutive disjoint windows of `window`
/// time points after discarding `warmup` rows. Within a window the
/// covariates are the full state at `t` and the target is coordinate
/// `target` at `t + 1`.
pub fn split_environments(
    series: &Matrix,
    target: usize,
    window: usize,
    warmup: usize,
    num_envs: usize,
) -> Result<MultiEnvDataset> {
    if target >= series.ncols() {
        return Err(Error::invalid(format!(
            "target coordinate {} outside a {}-dimensional series",
            target + 1,
            series.ncols()
        )));
    }
    if window == 0 || num_envs == 0 {
        return Err(Error::invalid("window and number of environments must be positive"));
    }
    let required = warmup + num_envs * window + 1;
    if series.nrows() < required {
        return Err(Error::shape(format!(
            "series has {} time points but warm-up {warmup} + {num_envs} windows of {window} \
             + 1 look-ahead need {required}",
            series.nrows()
        )));
    }
    let envs = (0..num_envs)
        .map(|e| {
            let start = warmup + e * window;
            let x = series.rows(start, window).into_owned();
            let y = Vector::from_fn(window, |i, _| series[(start + i + 1, target)]);
            EnvironmentData::new(x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..num_envs)
        .map(|e| format!("t{}", warmup + e * window))
        .collect();
    MultiEnvDataset::with_labels(envs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_step_from_initial_state() {
        let x = DEFAULT_INITIAL_STATE;
        let next = lorenz_step(&x, &[0.0; 6]);
        let expect = [
            0.9 * 2.0 + 0.1 * 0.97,
            0.28 * 2.0 - 0.01 * 2.0 * 0.99 + 0.99 * 0.97,
            0.01 * 2.0 * (0.97 - 1.0) + 0.9733 * 0.99,
            0.01 * 2.0 * (0.99 - 2.0 * 0.97) + 0.9366 * 1.0,
            0.02 * 2.0 * 1.0 + 0.96 * 0.97,
            1.0,
        ];
        assert_eq!(next, expect);
        assert!((next[0] - 1.897).abs() < 1e-15);
        // Hand-evaluated: 1.5005, 0.962967, 0.9176, 0.9712.
        assert!((next[1] - 1.5005).abs() < 1e-12);
        assert!((next[2] - 0.962_967).abs() < 1e-12);
        assert!((next[3] - 0.9176).abs() < 1e-12);
        assert!((next[4] - 0.9712).abs() < 1e-12);
    }

    #[test]
    fn noiseless_trajectory_via_config() {
        let cfg = LorenzGenConfig { horizon: 1, noise_std: 0.0, ..Default::default() };
        let s = gen_lorenz(&cfg, 0).unwrap();
        assert_eq!(s.nrows(), 2);
        assert!((s[(1, 0)] - 1.897).abs() < 1e-15);
    }

    #[test]
    fn random_walk_increments_have_unit_variance() {
        let cfg = LorenzGenConfig { horizon: 10_000, ..Default::default() };
        let s = gen_lorenz(&cfg, 42).unwrap();
        let diffs: Vec<f64> = (1..s.nrows()).map(|t| s[(t, 5)] - s[(t - 1, 5)]).collect();
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let v = diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = LorenzGenConfig {
            horizon: 100,
            initial_state: [1e8, 1e8, 1e8, 1e8, 1e8, 0.0],
            noise_std: 0.0,
        };
        assert!(matches!(gen_lorenz(&cfg, 0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn long_run_split_fits() {
        let s = gen_lorenz(&LorenzGenConfig::default(), 1).unwrap();
        for n in [20, 25] {
            let ds = split_environments(&s, 0, n, 500, 300).unwrap();
            assert_eq!(ds.num_envs(), 300);
            assert!(ds.environments().iter().all(|e| e.len() == n));
        }
    }

    #[test]
    fn windows_reconstruct_the_series() {
        let s = gen_lorenz(&LorenzGenConfig { horizon: 200, ..Default::default() }, 3).unwrap();
        let (n, warm, e) = (7, 11, 20);
        let ds = split_environments(&s, 2, n, warm, e).unwrap();
        let stacked: Vec<f64> = ds
            .environments()
            .iter()
            .flat_map(|env| env.covariates.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
            .collect();
        let source: Vec<f64> = (warm..warm + n * e)
            .flat_map(|t| s.row(t).iter().copied().collect::<Vec<_>>())
            .collect();
        assert_eq!(stacked, source);
        for (k, env) in ds.environments().iter().enumerate() {
            for i in 0..n {
                assert_eq!(env.target[i], s[(warm + k * n + i + 1, 2)]);
            }
        }
    }

    #[test]
    fn single_environment_takes_the_whole_tail() {
        let s = gen_lorenz(&LorenzGenConfig { horizon: 60, ..Default::default() }, 3).unwrap();
        let ds = split_environments(&s, 0, 61 - 10 - 1, 10, 1).unwrap();
        assert_eq!(ds.num_envs(), 1);
        assert_eq!(ds.environments()[0].len(), 50);
    }

    #[test]
    fn short_series_reports_required_length() {
        let s = gen_lorenz(&LorenzGenConfig { horizon: 50, ..Default::default() }, 3).unwrap();
        let err = split_environments(&s, 0, 20, 10, 3).unwrap_err();
        assert!(err.to_string().contains("need 71"), "{err}");
    }
}
