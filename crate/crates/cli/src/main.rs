//! `lolicap`: causal parent discovery from multi-environment data.
//!
//! Exit codes: 0 success, 1 self-check failure, 2 input error, 3 capacity
//! error. Results go to standard output (or `--output`), diagnostics to
//! standard error.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use lolicap_core::datagen::{LorenzGenConfig, SemGenConfig};
use lolicap_core::discovery::DEFAULT_MAX_DIM;
use lolicap_core::experiments::{
    network_detect, run_calibration, run_trials, write_metrics_csv, CalibrationConfig,
    CalibrationReport, GeneratorConfig, NetworkConfig, NetworkResult, Scenario, TrialMetrics,
};
use lolicap_core::io::{read_dataset, write_csv_dataset, write_json, DatasetDocument, Envelope};
use lolicap_core::{discover, DiscoveryOptions, DiscoveryResult, Error, TestConfig};

#[derive(Debug, Parser)]
#[command(name = "lolicap", version, about = "Causal parent discovery from multi-environment data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the causal parents of `y` in a CSV or JSON dataset.
    Discover {
        /// Dataset file, `-` for standard input.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a simulation scenario and report error rates.
    Simulate {
        /// Scenario JSON file.
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Detect the interaction network of the noisy Lorenz system.
    Network {
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 300)]
        num_envs: usize,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 8500)]
        horizon: usize,
        #[arg(long, default_value_t = 500)]
        warmup: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Check the calibration of the invariance test and the residual law.
    Calibrate {
        #[arg(long, default_value_t = 2000)]
        replications: usize,
        #[arg(long, default_value_t = 10_000)]
        ks_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic dataset.
    Generate {
        /// Generator config JSON (`{"kind": "independent", ...}`).
        #[arg(long, conflicts_with = "kind")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Kind::Independent)]
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Independent,
    Sem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Test level in [0, 1) [default: 0.1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Monte-Carlo null draws per test [default: 100]
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    workers: Option<usize>,
    /// Do not add an intercept to the regressions.
    #[arg(long)]
    no_intercept: bool,
    /// Relative singular-value cutoff for ranks and pseudo-inverses.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Largest number of candidate covariates accepted [default: 20]
    #[arg(long)]
    max_dim: Option<usize>,
    /// Output file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    /// Applies the flags on top of `base`.
    fn test_config(&self, base: TestConfig) -> TestConfig {
        TestConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            mc_samples: self.mc_samples.unwrap_or(base.mc_samples),
            seed: self.seed.unwrap_or(base.seed),
            rank_tol: self.rank_tol.or(base.rank_tol),
        }
    }

    fn intercept(&self, base: bool) -> bool {
        base && !self.no_intercept
    }
}

enum Failure {
    SelfCheck(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_input(path: &Path) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    if path == Path::new("-") {
        io::stdin().read_to_end(&mut buf)?;
    } else {
        File::open(path)?.read_to_end(&mut buf)?;
    }
    Ok(buf)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    })
}

fn emit_json<T: Serialize>(common: &Common, command: &str, body: T) -> Outcome {
    let mut out = open_output(common.output.as_deref())?;
    write_json(&Envelope::new(command, body), &mut out)?;
    out.flush()?;
    Ok(())
}

fn csv_writer(common: &Common) -> io::Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(open_output(common.output.as_deref())?))
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Core(Error::InvalidInput(e.to_string()))
}

#[derive(Serialize)]
struct DiscoverBody<'a> {
    environment_labels: &'a [String],
    num_covariates: usize,
    intercept: bool,
    config: TestConfig,
    result: DiscoveryResult,
}

fn cmd_discover(input: &Path, common: &Common) -> Outcome {
    let (data, _) = read_dataset(read_input(input)?.as_slice())?;
    info!(
        "read {} environments with {} covariates",
        data.num_envs(),
        data.num_covariates()
    );
    let intercept = common.intercept(true);
    let data = data.intercept(intercept);
    let config = common.test_config(TestConfig::default());
    let options = DiscoveryOptions {
        max_dim: common.max_dim.unwrap_or(DEFAULT_MAX_DIM),
        early_stop: false,
    };
    let result = discover(&data, &config, &options)?;
    info!("estimated parents {:?}", result.estimated_parents.to_one_based());
    match common.format {
        Format::Json => emit_json(
            common,
            "discover",
            DiscoverBody {
                environment_labels: data.labels(),
                num_covariates: data.num_covariates(),
                intercept,
                config,
                result,
            },
        ),
        Format::Csv => {
            let mut w = csv_writer(common)?;
            w.write_record(["subset", "statistic", "p_value", "rejected"]).map_err(csv_err)?;
            for r in &result.reports {
                let subset = r
                    .subset
                    .to_one_based()
                    .iter()
                    .map(|j| format!("x{j}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                w.write_record([subset, r.statistic.to_string(), r.p_value.to_string(), r.rejected.to_string()])
                    .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateBody {
    seed: u64,
    scenario: Scenario,
    metrics: Vec<TrialMetrics>,
}

fn cmd_simulate(path: &Path, common: &Common) -> Outcome {
    let file: Scenario = read_json(path)?;
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let scenario = Scenario {
        test: common.test_config(file.test),
        intercept: common.intercept(file.intercept),
        max_dim: common.max_dim.unwrap_or(file.max_dim),
        seed: Some(seed),
        ..file
    };
    info!("running {} runs per grid point", scenario.runs);
    let metrics = run_trials(&scenario, seed)?;
    match common.format {
        Format::Json => emit_json(common, "simulate", SimulateBody { seed, scenario, metrics }),
        Format::Csv => {
            let mut out = open_output(common.output.as_deref())?;
            write_metrics_csv(&metrics, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct NetworkBody {
    seed: u64,
    config: NetworkConfig,
    result: NetworkResult,
}

fn cmd_network(config: NetworkConfig, common: &Common) -> Outcome {
    let seed = common.seed.unwrap_or(0);
    let config = NetworkConfig {
        test: common.test_config(config.test),
        intercept: common.intercept(config.intercept),
        ..config
    };
    info!("network detection over {} runs", config.runs);
    let result = network_detect(&config, seed)?;
    match common.format {
        Format::Json => emit_json(common, "network", NetworkBody { seed, config, result }),
        Format::Csv => {
            let mut w = csv_writer(common)?;
            let mut header = vec!["parent".to_string()];
            header.extend((1..=result.counts.len()).map(|j| format!("x{j}")));
            w.write_record(&header).map_err(csv_err)?;
            for (i, row) in result.counts.iter().enumerate() {
                let mut rec = vec![format!("x{}", i + 1)];
                rec.extend(row.iter().map(usize::to_string));
                w.write_record(&rec).map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct CalibrateBody {
    seed: u64,
    config: CalibrationConfig,
    report: CalibrationReport,
}

fn cmd_calibrate(replications: usize, ks_samples: usize, common: &Common) -> Outcome {
    let seed = common.seed.unwrap_or(0);
    let defaults = CalibrationConfig::default();
    let config = CalibrationConfig {
        alphas: common.alpha.map_or(defaults.alphas.clone(), |a| vec![a]),
        mc_samples: common.mc_samples.unwrap_or(defaults.mc_samples),
        intercept: common.intercept(defaults.intercept),
        replications,
        ks_samples,
        ..defaults
    };
    let report = run_calibration(&config, seed)?;
    for c in &report.checks {
        info!(
            "{}: {} {:.6} in [{:.6}, {:.6}]",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.measured,
            c.lower,
            c.upper
        );
    }
    let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    match common.format {
        Format::Json => emit_json(common, "calibrate", CalibrateBody { seed, config, report })?,
        Format::Csv => {
            let mut w = csv_writer(common)?;
            w.write_record(["check", "measured", "lower", "upper", "passed"]).map_err(csv_err)?;
            for c in &report.checks {
                w.write_record([
                    c.name.clone(),
                    c.measured.to_string(),
                    c.lower.to_string(),
                    c.upper.to_string(),
                    c.passed.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::SelfCheck(format!("failed: {}", failed.join("; "))))
    }
}

fn cmd_generate(config: Option<&Path>, kind: Kind, common: &Common) -> Outcome {
    let generator = match config {
        Some(p) => read_json(p)?,
        None => match kind {
            Kind::Independent => GeneratorConfig::default(),
            Kind::Sem => GeneratorConfig::Sem(SemGenConfig::default()),
        },
    };
    let seed = common.seed.unwrap_or(0);
    let (data, truth) = generator.generate(seed)?;
    let mut out = open_output(common.output.as_deref())?;
    match common.format {
        Format::Json => write_json(&DatasetDocument::from_dataset(&data, Some(&truth), Some(seed)), &mut out)?,
        Format::Csv => write_csv_dataset(&data, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Discover { input, common } => cmd_discover(input, common),
        Command::Simulate { scenario, common } => cmd_simulate(scenario, common),
        Command::Network { window, num_envs, runs, horizon, warmup, common } => cmd_network(
            NetworkConfig {
                lorenz: LorenzGenConfig { horizon: *horizon, ..Default::default() },
                window: *window,
                num_envs: *num_envs,
                warmup: *warmup,
                runs: *runs,
                ..Default::default()
            },
            common,
        ),
        Command::Calibrate { replications, ks_samples, common } => {
            cmd_calibrate(*replications, *ks_samples, common)
        }
        Command::Generate { config, kind, common } => cmd_generate(config.as_deref(), *kind, common),
    }
}

fn workers(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::Discover { common, .. }
        | Command::Simulate { common, .. }
        | Command::Network { common, .. }
        | Command::Calibrate { common, .. }
        | Command::Generate { common, .. } => common.workers,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = workers(&cli) {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SelfCheck(msg)) => {
            eprintln!("self-check {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Capacity { .. } => 3,
                _ => 2,
            })
        }
    }
}
