use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{Interval, RateEstimate};
use crate::datagen::{
    gen_independent, gen_sem, gen_two_type, IndependentGenConfig, SemGenConfig, TwoTypeGenConfig,
};
use crate::dataset::{GroundTruth, MultiEnvDataset};
use crate::discovery::{discover, DiscoveryOptions, DiscoveryStatus};
use crate::error::{Error, Result};
use crate::invariance::TestConfig;
use crate::seed;
use crate::subset::Subset;

/// Failed runs are redrawn with a fresh seed this many times.
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Independent(IndependentGenConfig),
    Sem(SemGenConfig),
    TwoType(TwoTypeGenConfig),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Independent(IndependentGenConfig::default())
    }
}

impl GeneratorConfig {
    pub fn generate(&self, seed: u64) -> Result<(MultiEnvDataset, GroundTruth)> {
        match self {
            GeneratorConfig::Independent(c) => gen_independent(c, seed),
            GeneratorConfig::Sem(c) => gen_sem(c, seed),
            GeneratorConfig::TwoType(c) => gen_two_type(c, seed),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            GeneratorConfig::Independent(c) => c.validate(),
            GeneratorConfig::Sem(c) => c.validate(),
            GeneratorConfig::TwoType(c) => c.validate(),
        }
    }

    /// Copy of the config with the sweep variable set to `value`.
    pub fn with_sweep_value(&self, variable: SweepVariable, value: f64) -> Result<Self> {
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("{variable:?} needs whole numbers, got {value}")))
            }
        };
        let mut out = self.clone();
        match (&mut out, variable) {
            (GeneratorConfig::Independent(c), SweepVariable::SamplesPerEnv) => c.samples_per_env = count()?,
            (GeneratorConfig::Sem(c), SweepVariable::SamplesPerEnv) => c.samples_per_env = count()?,
            (GeneratorConfig::TwoType(c), SweepVariable::SamplesPerEnv) => c.samples_per_env = count()?,
            (GeneratorConfig::Independent(c), SweepVariable::NumEnvs) => c.num_envs = count()?,
            (GeneratorConfig::Sem(c), SweepVariable::NumEnvs) => c.num_envs = count()?,
            (GeneratorConfig::TwoType(c), SweepVariable::NumEnvs) => c.num_envs = count()?,
            (GeneratorConfig::Sem(c), SweepVariable::Heterogeneity) => c.heterogeneity = Some(value),
            (_, SweepVariable::Heterogeneity) => {
                return Err(Error::config("heterogeneity sweeps need the sem generator"))
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SamplesPerEnv,
    NumEnvs,
    Heterogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// A generator, a test configuration and a grid of settings, each run
/// `runs` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub generator: GeneratorConfig,
    pub test: TestConfig,
    /// Without a sweep the generator config is run as is.
    pub sweep: Option<Sweep>,
    pub runs: usize,
    pub seed: Option<u64>,
    pub intercept: bool,
    pub max_dim: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            generator: GeneratorConfig::default(),
            test: TestConfig::default(),
            sweep: None,
            runs: 300,
            seed: None,
            intercept: true,
            max_dim: crate::discovery::DEFAULT_MAX_DIM,
        }
    }
}

impl Scenario {
    /// Grid values paired with the generator config for each.
    pub fn grid(&self) -> Result<Vec<(f64, GeneratorConfig)>> {
        match &self.sweep {
            None => Ok(vec![(f64::NAN, self.generator.clone())]),
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(Error::config("sweep grid is empty"));
                }
                sweep
                    .values
                    .iter()
                    .map(|&v| Ok((v, self.generator.with_sweep_value(sweep.variable, v)?)))
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        self.test.validate()?;
        for (_, g) in self.grid()? {
            g.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed {
        estimate: Subset,
        truth: Subset,
        status: DiscoveryStatus,
        false_negative: bool,
        false_positive: bool,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub attempts: u32,
    #[serde(flatten)]
    pub outcome: RunOutcome,
}

/// Error rates at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// Sweep value, `null` without a sweep.
    pub sweep_value: Option<f64>,
    pub fnr: f64,
    pub fnr_ci: Interval,
    pub fpr: f64,
    pub fpr_ci: Interval,
    /// Completed runs, the denominator of both rates.
    pub runs: usize,
    pub failures: usize,
    pub records: Vec<RunRecord>,
}

impl TrialMetrics {
    fn from_records(sweep_value: Option<f64>, records: Vec<RunRecord>) -> Result<Self> {
        let (mut done, mut fneg, mut fpos) = (0u64, 0u64, 0u64);
        for r in &records {
            if let RunOutcome::Completed { false_negative, false_positive, .. } = r.outcome {
                done += 1;
                fneg += false_negative as u64;
                fpos += false_positive as u64;
            }
        }
        if done == 0 {
            return Err(Error::invalid(format!(
                "every run failed at grid point {}",
                sweep_value.map_or("-".into(), |v| v.to_string())
            )));
        }
        let fnr = RateEstimate::new(fneg, done)?;
        let fpr = RateEstimate::new(fpos, done)?;
        Ok(TrialMetrics {
            sweep_value,
            fnr: fnr.rate,
            fnr_ci: fnr.ci,
            fpr: fpr.rate,
            fpr_ci: fpr.ci,
            runs: done as usize,
            failures: records.len() - done as usize,
            records,
        })
    }
}

fn run_once(
    generator: &GeneratorConfig,
    scenario: &Scenario,
    run_seed: u64,
) -> Result<RunOutcome> {
    let (data, truth) = generator.generate(run_seed)?;
    let data = data.intercept(scenario.intercept);
    let test = TestConfig {
        seed: seed::derive(run_seed, &[seed::TAG_TEST]),
        ..scenario.test
    };
    // Only the estimate is kept, which early stopping leaves unchanged.
    let options = DiscoveryOptions {
        max_dim: scenario.max_dim,
        early_stop: true,
    };
    let result = discover(&data, &test, &options)?;
    let estimate = result.estimated_parents;
    Ok(RunOutcome::Completed {
        estimate,
        truth: truth.parents,
        status: result.status,
        false_negative: !truth.parents.difference(estimate).is_empty(),
        false_positive: !estimate.difference(truth.parents).is_empty(),
    })
}

/// Seed of attempt `attempt` of run `run` at grid point `grid`.
pub fn run_seed(seed: u64, grid: usize, run: usize, attempt: u32) -> u64 {
    seed::derive(seed, &[seed::TAG_RUN, grid as u64, run as u64, attempt as u64])
}

/// Runs the scenario, one [`TrialMetrics`] per grid point.
///
/// Runs execute in parallel; results are collected in run order so the
/// output does not depend on the thread count.
pub fn run_trials(scenario: &Scenario, seed: u64) -> Result<Vec<TrialMetrics>> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    grid.iter()
        .enumerate()
        .map(|(g, (value, generator))| {
            let records = (0..scenario.runs)
                .into_par_iter()
                .map(|run| {
                    let mut attempt = 0;
                    loop {
                        match run_once(generator, scenario, run_seed(seed, g, run, attempt)) {
                            Ok(outcome) => {
                                return RunRecord { run, attempts: attempt + 1, outcome };
                            }
                            Err(e) if attempt >= MAX_RETRIES => {
                                return RunRecord {
                                    run,
                                    attempts: attempt + 1,
                                    outcome: RunOutcome::Failed { error: e.to_string() },
                                };
                            }
                            Err(_) => attempt += 1,
                        }
                    }
                })
                .collect::<Vec<_>>();
            let value = scenario.sweep.as_ref().map(|_| *value);
            TrialMetrics::from_records(value, records)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CsvRow {
    sweep_value: Option<f64>,
    fnr: f64,
    fnr_lo: f64,
    fnr_hi: f64,
    fpr: f64,
    fpr_lo: f64,
    fpr_hi: f64,
    runs: usize,
    failures: usize,
}

/// One CSV row per grid point.
pub fn write_metrics_csv<W: std::io::Write>(metrics: &[TrialMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in metrics {
        w.serialize(CsvRow {
            sweep_value: m.sweep_value,
            fnr: m.fnr,
            fnr_lo: m.fnr_ci.lo,
            fnr_hi: m.fnr_ci.hi,
            fpr: m.fpr,
            fpr_lo: m.fpr_ci.lo,
            fpr_hi: m.fpr_ci.hi,
            runs: m.runs,
            failures: m.failures,
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: usize) -> Scenario {
        Scenario {
            generator: GeneratorConfig::Independent(IndependentGenConfig {
                num_envs: 6,
                samples_per_env: 30,
                dimension: 3,
                parents: [0].into_iter().collect(),
                ..Default::default()
            }),
            runs,
            ..Default::default()
        }
    }

    #[test]
    fn alpha_zero_accepts_everything() {
        let s = Scenario {
            test: TestConfig { alpha: 0.0, ..Default::default() },
            ..small(10)
        };
        let m = &run_trials(&s, 1).unwrap()[0];
        assert_eq!(m.fnr, 1.0);
        assert_eq!(m.fpr, 0.0);
        assert_eq!(m.runs, 10);
        for r in &m.records {
            assert!(matches!(
                r.outcome,
                RunOutcome::Completed { estimate, status: DiscoveryStatus::Estimated, .. }
                if estimate.is_empty()
            ));
        }
    }

    #[test]
    fn rates_are_means_of_stored_indicators() {
        let m = &run_trials(&small(40), 5).unwrap()[0];
        let (mut fneg, mut fpos) = (0, 0);
        for r in &m.records {
            let RunOutcome::Completed { estimate, truth, false_negative, false_positive, .. } =
                r.outcome
            else {
                panic!("unexpected failure");
            };
            assert_eq!(false_negative, !truth.difference(estimate).is_empty());
            assert_eq!(false_positive, !estimate.difference(truth).is_empty());
            fneg += false_negative as usize;
            fpos += false_positive as usize;
        }
        assert_eq!(m.fnr, fneg as f64 / 40.0);
        assert_eq!(m.fpr, fpos as f64 / 40.0);
        assert!(m.fnr_ci.contains(m.fnr) && m.fpr_ci.contains(m.fpr));
    }

    #[test]
    fn sweep_yields_one_point_per_value() {
        let s = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::SamplesPerEnv, values: vec![10.0, 20.0, 40.0] }),
            ..small(3)
        };
        let m = run_trials(&s, 0).unwrap();
        assert_eq!(m.iter().map(|m| m.sweep_value.unwrap()).collect::<Vec<_>>(), [10.0, 20.0, 40.0]);
        let mut buf = Vec::new();
        write_metrics_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("sweep_value,fnr,fnr_lo,fnr_hi,fpr,fpr_lo,fpr_hi,runs,failures"));
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        assert!(run_trials(&small(0), 0).is_err());
        let empty = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::NumEnvs, values: vec![] }),
            ..small(1)
        };
        assert!(run_trials(&empty, 0).is_err());
        let frac = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::NumEnvs, values: vec![2.5] }),
            ..small(1)
        };
        assert!(run_trials(&frac, 0).is_err());
        let het = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::Heterogeneity, values: vec![1.0] }),
            ..small(1)
        };
        assert!(run_trials(&het, 0).is_err());
    }

    #[test]
    fn failing_runs_are_recorded_not_counted() {
        // One environment per run: discovery fails every attempt.
        let s = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::NumEnvs, values: vec![1.0, 4.0] }),
            ..small(3)
        };
        let err = run_trials(&s, 0).unwrap_err();
        assert!(err.to_string().contains("every run failed"));
        let ok = Scenario {
            sweep: Some(Sweep { variable: SweepVariable::NumEnvs, values: vec![4.0] }),
            ..small(3)
        };
        let m = &run_trials(&ok, 0).unwrap()[0];
        assert_eq!((m.runs, m.failures), (3, 0));
        assert!(m.records.iter().all(|r| r.attempts == 1));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = small(12);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| serde_json::to_string(&run_trials(&s, 9).unwrap()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario {
            generator: GeneratorConfig::Sem(SemGenConfig::with_heterogeneity(2.0)),
            sweep: Some(Sweep { variable: SweepVariable::Heterogeneity, values: vec![0.0, 4.0] }),
            seed: Some(3),
            ..Default::default()
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), s);
        let minimal: Scenario =
            serde_json::from_str(r#"{"generator": {"kind": "independent"}, "runs": 5}"#).unwrap();
        assert_eq!(minimal.generator, GeneratorConfig::default());
        assert_eq!(minimal.runs, 5);
    }
}
