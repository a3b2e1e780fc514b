//! CSV tables with a JSON sidecar describing how they were produced.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{PolicyArtifact, Representation, ValueDataset};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub columns: Vec<String>,
    pub rows: usize,
    pub producer: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_table(path: &Path, table: &Table, metadata: serde_json::Value) -> Result<(), TableError> {
    let io_err = |source| TableError::Io {
        path: path.to_path_buf(),
        source,
    };
    let csv_err = |source| TableError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(io_err)?));
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| format!("{x}"))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    let sidecar = Sidecar {
        columns: table.columns.clone(),
        rows: table.rows.len(),
        producer: format!("araps {}", env!("CARGO_PKG_VERSION")),
        metadata,
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(path), text + "\n").map_err(|source| TableError::Io {
        path: sidecar_path(path),
        source,
    })
}

pub fn read_table(path: &Path) -> Result<Table, TableError> {
    let csv_err = |source| TableError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let columns: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TableError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Rows of a policy: conditioning values, then the decision, then the
/// optimal value or draw index.
pub fn policy_table(policy: &PolicyArtifact) -> Table {
    let mut columns: Vec<String> = policy.conditioning.iter().map(|c| c.to_string()).collect();
    columns.push(policy.decision.to_string());
    let mut rows = Vec::new();
    match (&policy.representation, &policy.value_dataset) {
        (Representation::LookupGrid { points, values }, vals) => {
            let scalar = match vals {
                Some(ValueDataset::Scalar(v)) => Some(v),
                _ => None,
            };
            if scalar.is_some() {
                columns.push("value".into());
            }
            for (i, (p, d)) in points.iter().zip(values).enumerate() {
                let mut row = p.clone();
                row.push(*d);
                if let Some(v) = scalar {
                    row.push(v[i]);
                }
                rows.push(row);
            }
        }
        (Representation::SampleGrid { points, draws }, vals) => {
            columns.push("value".into());
            columns.push("draw".into());
            for (i, (p, ds)) in points.iter().zip(draws).enumerate() {
                for (k, a) in ds.iter().enumerate() {
                    let value = match vals {
                        Some(ValueDataset::PerDraw(v)) => v[i][k],
                        _ => f64::NAN,
                    };
                    let mut row = p.clone();
                    row.extend([*a, value, k as f64]);
                    rows.push(row);
                }
            }
        }
        (Representation::FittedModel { .. }, _) => {}
    }
    Table { columns, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.rows.push(vec![0.1, 2.0]);
        t.rows.push(vec![1.0 / 3.0, -4.5e-7]);
        write_table(&path, &t, serde_json::json!({"seed": 3})).unwrap();
        assert_eq!(read_table(&path).unwrap(), t);
        let side: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side.rows, 2);
        assert_eq!(side.metadata["seed"], 3);
    }
}
