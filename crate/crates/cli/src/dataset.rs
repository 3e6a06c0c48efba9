//! CSV ingestion and emission.
//!
//! Lines starting with `#` are provenance comments and are skipped on input.
//! Floats are written with 17 significant digits so values round-trip
//! exactly.

use std::path::{Path, PathBuf};

use compolicy_core::datamodel::{Action, ObsDataset};
use compolicy_core::numcore::Matrix;

use crate::error::{CliError, CliResult};

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    /// `None` selects every column that is neither the action nor an outcome.
    pub covariates: Option<Vec<String>>,
    pub action: String,
    pub outcomes: Vec<String>,
    /// Outcomes where lower values are better; they are negated on ingestion.
    pub negate: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionCoding {
    Signed,
    /// `{0, 1}` recoded to `{−1, 1}`.
    Recoded,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: ObsDataset,
    pub covariate_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub negated: Vec<String>,
    pub coding: ActionCoding,
}

fn column_index(headers: &[String], name: &str, path: &Path) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Config(format!("unknown column '{name}' in {}", path.display())))
}

pub fn read_dataset(path: &Path, spec: &ColumnSpec) -> CliResult<LoadedData> {
    let csv_err = |source| CliError::Csv { path: PathBuf::from(path), source };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();

    if spec.outcomes.is_empty() {
        return Err(CliError::Config("at least one outcome column is required".into()));
    }
    let action = column_index(&headers, &spec.action, path)?;
    let outcomes = spec
        .outcomes
        .iter()
        .map(|name| column_index(&headers, name, path))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(name) = spec.negate.iter().find(|n| !spec.outcomes.contains(n)) {
        return Err(CliError::Config(format!("negated column '{name}' is not an outcome")));
    }
    let covariate_names: Vec<String> = match &spec.covariates {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .filter(|h| **h != spec.action && !spec.outcomes.contains(h))
            .cloned()
            .collect(),
    };
    let covariates = covariate_names
        .iter()
        .map(|name| column_index(&headers, name, path))
        .collect::<CliResult<Vec<_>>>()?;

    let mut xs = Vec::new();
    let mut raw_actions = Vec::new();
    let mut ys = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let cell = |j: usize| -> CliResult<f64> {
            let text = record.get(j).unwrap_or("");
            text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Config(format!(
                    "{} row {}: column '{}' has non-numeric value '{text}'",
                    path.display(),
                    r + 1,
                    headers[j]
                ))
            })
        };
        for &j in &covariates {
            xs.push(cell(j)?);
        }
        raw_actions.push(cell(action)?);
        for (name, &j) in spec.outcomes.iter().zip(&outcomes) {
            let v = cell(j)?;
            ys.push(if spec.negate.contains(name) { -v } else { v });
        }
    }
    let n = raw_actions.len();
    let (actions, coding) = decode_actions(&raw_actions, &spec.action)?;
    let data = ObsDataset::new(
        Matrix::from_row_major(n, covariates.len(), xs)?,
        actions,
        Matrix::from_row_major(n, outcomes.len(), ys)?,
    )?;
    Ok(LoadedData {
        data,
        covariate_names,
        outcome_names: spec.outcomes.clone(),
        negated: spec.negate.clone(),
        coding,
    })
}

fn decode_actions(raw: &[f64], name: &str) -> CliResult<(Vec<Action>, ActionCoding)> {
    let signed = raw.iter().all(|&v| v == -1.0 || v == 1.0);
    let binary = raw.iter().all(|&v| v == 0.0 || v == 1.0);
    let (coding, negative) = if signed {
        (ActionCoding::Signed, -1.0)
    } else if binary {
        (ActionCoding::Recoded, 0.0)
    } else {
        return Err(CliError::Config(format!("action column '{name}' must take values in {{-1, 1}} or {{0, 1}}")));
    };
    let actions = raw.iter().map(|&v| if v == negative { Action::Negative } else { Action::Positive }).collect();
    Ok((actions, coding))
}

/// CSV text with `#` provenance lines ahead of the header row.
pub fn csv_text(provenance: &[String], header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let err = |source| CliError::Csv { path: PathBuf::from("<output>"), source };
    writer.write_record(header).map_err(err)?;
    for row in rows {
        writer.write_record(row).map_err(err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Config(format!("csv buffer: {e}")))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
