//! Tabular benchmark ingestion: a JSON file mapping every architecture in a
//! space to accuracy-by-epoch curves, cumulative train seconds and cost
//! metrics. Lookups are pure; a missing architecture or epoch is an error,
//! never an interpolation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalOracle, EvalRequest, EvalResult, OracleError};
use crate::space::{Architecture, SearchSpace};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularRow<F: Real> {
    pub val_acc: BTreeMap<u32, F>,
    #[serde(default = "BTreeMap::new")]
    pub test_acc: BTreeMap<u32, F>,
    pub train_seconds: BTreeMap<u32, F>,
    #[serde(default = "BTreeMap::new")]
    pub cost: BTreeMap<String, F>,
}

#[derive(Debug, Deserialize)]
struct TabularFile<F: Real> {
    #[allow(dead_code)]
    space_name: String,
    #[serde(default)]
    #[allow(dead_code)]
    metrics: Vec<String>,
    rows: Vec<RowFile<F>>,
}

#[derive(Debug, Deserialize)]
struct RowFile<F: Real> {
    choices: Vec<usize>,
    val_acc: BTreeMap<u32, F>,
    #[serde(default = "BTreeMap::new")]
    test_acc: BTreeMap<u32, F>,
    train_seconds: BTreeMap<u32, F>,
    #[serde(default = "BTreeMap::new")]
    cost: BTreeMap<String, F>,
}

impl<F: Real> RowFile<F> {
    fn into_parts(self) -> (Vec<usize>, TabularRow<F>) {
        (
            self.choices,
            TabularRow {
                val_acc: self.val_acc,
                test_acc: self.test_acc,
                train_seconds: self.train_seconds,
                cost: self.cost,
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct TabularBenchmark<F: Real> {
    space: SearchSpace,
    rows: HashMap<Architecture, TabularRow<F>>,
}

impl<F: Real> TabularBenchmark<F> {
    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, arch: &Architecture) -> Option<&TabularRow<F>> {
        self.rows.get(arch)
    }
}

impl<F: Real + serde::de::DeserializeOwned> TabularBenchmark<F> {
    pub fn from_json_str(text: &str, space: &SearchSpace) -> Result<Self, OracleError> {
        let file: TabularFile<F> =
            serde_json::from_str(text).map_err(|e| OracleError::Parse(e.to_string()))?;
        let mut rows = HashMap::with_capacity(file.rows.len());
        for (index, entry) in file.rows.into_iter().enumerate() {
            let (choices, row) = entry.into_parts();
            let arch = Architecture::new(choices);
            space
                .validate_architecture(&arch)
                .map_err(|e| OracleError::ArchMismatch {
                    row: index,
                    reason: e.to_string(),
                })?;
            validate_row(index, &row)?;
            if rows.insert(arch, row).is_some() {
                return Err(OracleError::ArchMismatch {
                    row: index,
                    reason: "duplicate architecture".into(),
                });
            }
        }
        Ok(TabularBenchmark {
            space: space.clone(),
            rows,
        })
    }
}

fn validate_row<F: Real>(index: usize, row: &TabularRow<F>) -> Result<(), OracleError> {
    if row.val_acc.is_empty() || row.train_seconds.is_empty() {
        return Err(OracleError::ArchMismatch {
            row: index,
            reason: "empty accuracy or train_seconds curve".into(),
        });
    }
    for (&epoch, &acc) in row.val_acc.iter().chain(row.test_acc.iter()) {
        if acc < F::zero() || acc > F::one() {
            return Err(OracleError::ArchMismatch {
                row: index,
                reason: format!("accuracy at epoch {epoch} outside [0, 1]"),
            });
        }
    }
    let mut prev: Option<F> = None;
    for (&epoch, &seconds) in &row.train_seconds {
        if seconds < F::zero() {
            return Err(OracleError::ArchMismatch {
                row: index,
                reason: format!("negative train_seconds at epoch {epoch}"),
            });
        }
        if let Some(p) = prev {
            if seconds < p {
                return Err(OracleError::ArchMismatch {
                    row: index,
                    reason: "train_seconds must be non-decreasing in epoch".into(),
                });
            }
        }
        prev = Some(seconds);
    }
    Ok(())
}

/// Loads a tabular benchmark file and checks every row against the space.
pub fn load_tabular<F: Real + serde::de::DeserializeOwned>(
    path: impl AsRef<Path>,
    space: &SearchSpace,
) -> Result<TabularBenchmark<F>, OracleError> {
    let text = std::fs::read_to_string(path)?;
    TabularBenchmark::from_json_str(&text, space)
}

impl<F: Real> EvalOracle<F> for TabularBenchmark<F> {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult<F>, OracleError> {
        self.space.validate_architecture(&req.arch)?;
        let row = self
            .rows
            .get(&req.arch)
            .ok_or_else(|| OracleError::MissingRow {
                arch: req.arch.to_string(),
            })?;
        let epoch = req.epoch_budget;
        let unavailable = || OracleError::BudgetEpochUnavailable {
            epoch,
            arch: req.arch.to_string(),
        };
        let validation = *row.val_acc.get(&epoch).ok_or_else(unavailable)?;
        let train_seconds = *row.train_seconds.get(&epoch).ok_or_else(unavailable)?;
        Ok(EvalResult {
            validation_accuracy: validation,
            test_accuracy: row.test_acc.get(&epoch).copied(),
            train_seconds,
            cost_metrics: row.cost.clone(),
        })
    }
}
