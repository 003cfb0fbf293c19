//! JSON instance files.
//!
//! ```json
//! {
//!   "n": 3,
//!   "couplings": { "format": "edges", "edges": [[0, 1, -0.5], [1, 2, 0.25]] },
//!   "h": [0.0, 0.1, 0.0],
//!   "provenance": { "generator": "sk", "seed": 7 }
//! }
//! ```
//!
//! `couplings` may instead be `{ "format": "dense", "rows": [[...], ...] }`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::DenseIsingModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingsFile {
    Dense { rows: Vec<Vec<f64>> },
    Edges { edges: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub couplings: CouplingsFile,
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl InstanceFile {
    pub fn from_model(model: &DenseIsingModel, provenance: BTreeMap<String, serde_json::Value>) -> Self {
        Self {
            n: model.n(),
            couplings: CouplingsFile::Edges {
                edges: model.edges().collect(),
            },
            h: model.biases().to_vec(),
            provenance,
        }
    }

    pub fn to_model(&self) -> Result<DenseIsingModel> {
        match &self.couplings {
            CouplingsFile::Dense { rows } => {
                if rows.len() != self.n || rows.iter().any(|r| r.len() != self.n) {
                    return Err(Error::Schema(format!(
                        "dense couplings must be {0} rows of {0} values",
                        self.n
                    )));
                }
                DenseIsingModel::new(self.n, rows.concat(), self.h.clone())
            }
            CouplingsFile::Edges { edges } => {
                let upper: Vec<_> = edges
                    .iter()
                    .map(|&(i, j, w)| if i < j { (i, j, w) } else { (j, i, w) })
                    .collect();
                DenseIsingModel::from_edges(self.n, &upper, self.h.clone())
            }
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
