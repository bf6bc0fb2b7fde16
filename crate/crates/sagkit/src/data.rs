//! CSV dataset loading and the bundled toy datasets.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sagkit_core::mlmodels::{Dataset, Targets};

use crate::error::{io_err, HarnessError, Result};

/// How target columns are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// One column of non-negative integer class labels.
    Class,
    /// One or more real-valued columns.
    Real,
}

/// Which columns of a CSV file are targets. Every other column is a
/// feature, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub targets: Vec<String>,
    pub kind: TargetKind,
}

impl CsvSchema {
    pub fn class(target: &str) -> Self {
        Self { targets: vec![target.to_string()], kind: TargetKind::Class }
    }

    pub fn real(targets: &[&str]) -> Self {
        Self { targets: targets.iter().map(|t| t.to_string()).collect(), kind: TargetKind::Real }
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    parse_csv(name, &text, schema)
}

/// Parses CSV text with a header row. LF and CRLF line endings are
/// accepted. Errors name the 1-based line of the file.
pub fn parse_csv(name: &str, text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if schema.targets.is_empty() {
        return Err(HarnessError::Schema("no target column declared".into()));
    }
    if schema.kind == TargetKind::Class && schema.targets.len() != 1 {
        return Err(HarnessError::Schema("class targets use exactly one column".into()));
    }
    let mut target_cols = Vec::new();
    for t in &schema.targets {
        let col = header
            .iter()
            .position(|h| h == t)
            .ok_or_else(|| HarnessError::Schema(format!("missing column `{t}`")))?;
        target_cols.push(col);
    }
    let target_set: HashSet<usize> = target_cols.iter().copied().collect();
    let feature_cols: Vec<usize> = (0..header.len()).filter(|c| !target_set.contains(c)).collect();
    if feature_cols.is_empty() {
        return Err(HarnessError::Schema("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut reals = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            HarnessError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(HarnessError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = record[c].trim();
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| HarnessError::Parse {
                line,
                message: format!("column `{}`: `{raw}` is not a number", header[c]),
            })
        };
        for &c in &feature_cols {
            features.push(cell(c)?);
        }
        match schema.kind {
            TargetKind::Real => {
                for &c in &target_cols {
                    reals.push(cell(c)?);
                }
            }
            TargetKind::Class => {
                let raw = record[target_cols[0]].trim();
                let label = raw.parse::<usize>().map_err(|_| HarnessError::Parse {
                    line,
                    message: format!("column `{}`: `{raw}` is not a class index", header[target_cols[0]]),
                })?;
                labels.push(label);
            }
        }
    }
    if features.is_empty() {
        return Err(HarnessError::Schema("no data rows".into()));
    }
    let targets = match schema.kind {
        TargetKind::Real => Targets::Real { values: reals, outputs: target_cols.len() },
        TargetKind::Class => {
            let classes = labels.iter().max().map_or(0, |m| m + 1);
            Targets::Classes { labels, classes }
        }
    };
    Ok(Dataset::new(name, features, feature_cols.len(), targets)?)
}

/// Names of the datasets shipped with the crate.
pub const BUNDLED: [&str; 5] = ["iris", "wine", "digits", "diabetes", "linnerud"];

/// One of the bundled scikit-learn toy datasets.
pub fn bundled(name: &str) -> Result<Dataset> {
    let (text, schema) = match name {
        "iris" => (include_str!("../data/iris.csv"), CsvSchema::class("target")),
        "wine" => (include_str!("../data/wine.csv"), CsvSchema::class("target")),
        "digits" => (include_str!("../data/digits.csv"), CsvSchema::class("target")),
        "diabetes" => (include_str!("../data/diabetes.csv"), CsvSchema::real(&["target"])),
        "linnerud" => (include_str!("../data/linnerud.csv"), CsvSchema::real(&["weight", "waist", "pulse"])),
        other => return Err(HarnessError::Config(format!("unknown bundled dataset `{other}`"))),
    };
    parse_csv(name, text, &schema)
}
