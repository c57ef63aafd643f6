//! Evaluation oracles behind the `Accuracy(.)` abstraction: tabular benchmark
//! lookup, a decomposable synthetic oracle with deterministic training noise,
//! and a brute-force enumerator used as the correctness reference.

mod brute;
mod synthetic;
mod tabular;

pub use brute::{brute_force_optimum, DEFAULT_ENUMERATION_CAP};
pub use synthetic::{CouplingTerm, SyntheticOracle, SyntheticOracleSpec};
pub use tabular::{load_tabular, TabularBenchmark, TabularRow};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Architecture, SpaceError};
use crate::Real;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("tabular file: {0}")]
    Parse(String),
    #[error("row {row}: architecture incompatible with space: {reason}")]
    ArchMismatch { row: usize, reason: String },
    #[error("no stored row for architecture {arch}")]
    MissingRow { arch: String },
    #[error("epoch budget {epoch} not stored for architecture {arch}")]
    BudgetEpochUnavailable { epoch: u32, arch: String },
    #[error("space has {models:.1e} candidates, enumeration cap is {cap:.1e}")]
    SpaceTooLarge { models: f64, cap: f64 },
    #[error("no architecture satisfies the cost bounds")]
    NoFeasibleArchitecture,
    #[error("oracle spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One evaluation request: the candidate, the proxy-training depth and the
/// seed that fixes any stochastic part of the evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub arch: Architecture,
    pub epoch_budget: u32,
    pub seed: u64,
}

/// What an evaluation reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult<F: Real> {
    pub validation_accuracy: F,
    pub test_accuracy: Option<F>,
    /// Training time consumed, charged against the search budget.
    pub train_seconds: F,
    #[serde(default = "BTreeMap::new")]
    pub cost_metrics: BTreeMap<String, F>,
}

/// An accuracy-and-cost evaluator. Implementations are read-only after
/// construction and safe to call concurrently; budget accounting is the
/// caller's responsibility.
pub trait EvalOracle<F: Real>: Send + Sync {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult<F>, OracleError>;
}
