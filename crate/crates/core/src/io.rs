//! Dataset import/export and versioned JSON documents.
//!
//! CSV layout: header `env,x1,...,xD,y`, one observation per row. The `env`
//! column holds arbitrary labels, mapped to environments in order of first
//! appearance. JSON layout: [`DatasetDocument`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{EnvironmentData, GroundTruth, MultiEnvDataset};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

pub const SCHEMA_VERSION: u32 = 1;

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            column: 0,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        kind => Error::Parse { line, column: 0, message: format!("{kind:?}") },
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let bad = |column: usize, message: String| Error::Parse { line: 1, column, message };
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 {
        return Err(bad(0, "header must read env,x1,...,xD,y with D ≥ 1".into()));
    }
    if fields[0] != "env" {
        return Err(bad(1, format!("first column must be `env`, found `{}`", fields[0])));
    }
    let d = fields.len() - 2;
    for (j, name) in fields[1..=d].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(bad(j + 2, format!("expected `x{}`, found `{name}`", j + 1)));
        }
    }
    if fields[d + 1] != "y" {
        return Err(bad(d + 2, format!("last column must be `y`, found `{}`", fields[d + 1])));
    }
    Ok(d)
}

/// Parses the CSV layout.
pub fn read_csv_dataset<R: Read>(reader: R) -> Result<MultiEnvDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let d = check_header(rdr.headers().map_err(csv_error)?)?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let label = &record[0];
        let g = *index.entry(label.to_string()).or_insert_with(|| {
            groups.push((label.to_string(), Vec::new(), Vec::new()));
            groups.len() - 1
        });
        for (j, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, column: j + 1, message: "value is not finite".into() });
            }
            if j <= d {
                groups[g].1.push(v);
            } else {
                groups[g].2.push(v);
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid("dataset has no observations"));
    }
    let mut labels = Vec::with_capacity(groups.len());
    let mut envs = Vec::with_capacity(groups.len());
    for (label, x, y) in groups {
        envs.push(EnvironmentData::new(
            Matrix::from_row_slice(y.len(), d, &x),
            Vector::from_vec(y),
        )?);
        labels.push(label);
    }
    MultiEnvDataset::with_labels(envs, labels)
}

/// Writes the CSV layout (without any intercept column).
pub fn write_csv_dataset<W: Write>(data: &MultiEnvDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = data.num_covariates();
    let mut header = vec!["env".to_string()];
    header.extend((1..=d).map(|j| format!("x{j}")));
    header.push("y".into());
    w.write_record(&header).map_err(csv_error)?;
    for (e, env) in data.environments().iter().enumerate() {
        let x = data.raw_covariates(e);
        for i in 0..env.len() {
            let mut row = vec![data.labels()[e].clone()];
            row.extend(x.row(i).iter().map(|v| v.to_string()));
            row.push(env.target[i].to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentDocument {
    pub label: String,
    /// Rows of covariates.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// JSON layout of a dataset with optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub generator: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub ground_truth: Option<GroundTruth>,
    pub environments: Vec<EnvironmentDocument>,
}

impl DatasetDocument {
    pub fn from_dataset(data: &MultiEnvDataset, truth: Option<&GroundTruth>, seed: Option<u64>) -> Self {
        let environments = data
            .environments()
            .iter()
            .enumerate()
            .map(|(e, env)| {
                let x = data.raw_covariates(e);
                EnvironmentDocument {
                    label: data.labels()[e].clone(),
                    x: x.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    y: env.target.iter().copied().collect(),
                }
            })
            .collect();
        DatasetDocument {
            schema_version: SCHEMA_VERSION,
            generator: truth.map(|t| t.generator.clone()),
            seed,
            ground_truth: truth.cloned(),
            environments,
        }
    }

    pub fn to_dataset(&self) -> Result<MultiEnvDataset> {
        check_version(self.schema_version)?;
        let d = self
            .environments
            .first()
            .and_then(|e| e.x.first())
            .map_or(0, Vec::len);
        let mut envs = Vec::with_capacity(self.environments.len());
        for (k, env) in self.environments.iter().enumerate() {
            if let Some(row) = env.x.iter().position(|r| r.len() != d) {
                return Err(Error::shape(format!(
                    "environment {} row {} has {} covariates, expected {d}",
                    k + 1,
                    row + 1,
                    env.x[row].len()
                )));
            }
            let flat: Vec<f64> = env.x.iter().flatten().copied().collect();
            envs.push(EnvironmentData::new(
                Matrix::from_row_slice(env.x.len(), d, &flat),
                Vector::from_column_slice(&env.y),
            )?);
        }
        let labels = self.environments.iter().map(|e| e.label.clone()).collect();
        MultiEnvDataset::with_labels(envs, labels)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported schema version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Reads either layout; JSON is recognised by a leading `{`.
pub fn read_dataset<R: Read>(mut reader: R) -> Result<(MultiEnvDataset, Option<GroundTruth>)> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    if text.trim_start().starts_with('{') {
        let doc: DatasetDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok((doc.to_dataset()?, doc.ground_truth))
    } else {
        Ok((read_csv_dataset(text.as_bytes())?, None))
    }
}

pub fn read_dataset_file(path: &Path) -> Result<(MultiEnvDataset, Option<GroundTruth>)> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// A result wrapped with the schema version and the producing command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub command: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(command: &str, body: T) -> Self {
        Envelope { schema_version: SCHEMA_VERSION, command: command.into(), body }
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}
