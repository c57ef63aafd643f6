//! Experiment configuration: a JSON document naming the space file, the
//! oracle, one search algorithm, the cost target, budgets and seeds.
//! Validation reports the offending field as a JSON-pointer-style path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use layernas::baselines::RegularizedEvolutionConfig;
use layernas::engine::{LayerNasConfig, PassMode};
use layernas::oracle::{load_tabular, EvalOracle, SyntheticOracle, SyntheticOracleSpec};
use layernas::space::{Cost, PhiMode, SearchSpace};

#[derive(Debug, Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub space_file: Option<PathBuf>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub algorithm: Option<AlgorithmConfig>,
    #[serde(default)]
    pub cost_metric: Option<String>,
    #[serde(default)]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub epoch_budget: Option<u32>,
    #[serde(default)]
    pub total_train_seconds_budget: Option<f64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleConfig {
    /// Path to a tabular benchmark file, relative to the config file.
    Tabular(PathBuf),
    Synthetic(SyntheticOracleSpec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Layernas(LayerNasParams),
    LayernasDp(LayerNasParams),
    Random(EmptyParams),
    RegularizedEvolution(ReParams),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptyParams {}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerNasParams {
    /// Cost buckets per layer; 100 when omitted.
    #[serde(default)]
    pub h: Option<usize>,
    /// Replicas per bucket; 3 when omitted.
    #[serde(default)]
    pub k: Option<usize>,
    /// Selections per layer pass; k * h when omitted.
    #[serde(default)]
    pub r: Option<usize>,
    /// Children per selection; the widest layer when omitted.
    #[serde(default)]
    pub t: Option<usize>,
    #[serde(default)]
    pub pass_mode: Option<PassMode>,
    #[serde(default)]
    pub mode: Option<PhiMode>,
    #[serde(default)]
    pub allow_reeval: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReParams {
    #[serde(default)]
    pub population_size: Option<usize>,
    #[serde(default)]
    pub tournament_size: Option<usize>,
    #[serde(default)]
    pub mnas_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetConfig {
    /// Explicit bounds in original cost units.
    Bounds { low: f64, high: f64 },
    /// `high = fraction * cost(all-max architecture)`, `low = 0`.
    FractionOfMax { fraction_of_max: f64 },
}

/// Everything resolved and loaded: the runnable form of a config.
pub struct ResolvedExperiment {
    pub space: SearchSpace,
    pub oracle: Box<dyn EvalOracle<f64>>,
    pub algorithm: ResolvedAlgorithm,
    pub cost_metric: String,
    pub target_low: Cost,
    pub target_high: Cost,
    pub epoch_budget: u32,
    pub budget_seconds: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

pub enum ResolvedAlgorithm {
    LayerNas(LayerNasConfig<f64>),
    LayerNasDp(LayerNasConfig<f64>),
    Random,
    RegularizedEvolution {
        config: RegularizedEvolutionConfig,
        mnas_exponent: f64,
    },
}

impl ResolvedAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedAlgorithm::LayerNas(_) => "layernas",
            ResolvedAlgorithm::LayerNasDp(_) => "layernas_dp",
            ResolvedAlgorithm::Random => "random",
            ResolvedAlgorithm::RegularizedEvolution { .. } => "regularized_evolution",
        }
    }

    /// Nominal trial bound `k * H * sum(|S_i|)` for the sampling search.
    pub fn max_trial_bound(&self, space: &SearchSpace) -> Option<u64> {
        match self {
            ResolvedAlgorithm::LayerNas(cfg) => {
                Some(cfg.replicas as u64 * cfg.bucket_count as u64 * space.option_sum())
            }
            _ => None,
        }
    }
}

/// Reads and parses a config file; returns the config and its directory,
/// which relative paths inside the config resolve against.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("/", format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| ConfigError::at("/", e))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, base))
}

/// Checks the schema, loads the space and oracle, resolves the target and
/// algorithm parameters.
pub fn validate_config(
    cfg: &ExperimentConfig,
    base: &Path,
) -> Result<ResolvedExperiment, ConfigError> {
    let space_file = cfg
        .space_file
        .as_ref()
        .ok_or_else(|| ConfigError::at("/space_file", "missing"))?;
    let space = SearchSpace::load(resolve(base, space_file))
        .map_err(|e| ConfigError::at("/space_file", e))?;

    let oracle: Box<dyn EvalOracle<f64>> = match cfg
        .oracle
        .as_ref()
        .ok_or_else(|| ConfigError::at("/oracle", "missing"))?
    {
        OracleConfig::Tabular(path) => Box::new(
            load_tabular::<f64>(resolve(base, path), &space)
                .map_err(|e| ConfigError::at("/oracle/tabular", e))?,
        ),
        OracleConfig::Synthetic(spec) => Box::new(
            SyntheticOracle::new(space.clone(), spec.clone())
                .map_err(|e| ConfigError::at("/oracle/synthetic", e))?,
        ),
    };

    let cost_metric = cfg
        .cost_metric
        .clone()
        .unwrap_or_else(|| space.cost_unit().to_string());
    if cost_metric != space.cost_unit() {
        return Err(ConfigError::at(
            "/cost_metric",
            format!(
                "'{cost_metric}' does not match the space cost unit '{}'",
                space.cost_unit()
            ),
        ));
    }

    let (target_low, target_high) = match cfg
        .target
        .as_ref()
        .ok_or_else(|| ConfigError::at("/target", "missing"))?
    {
        TargetConfig::Bounds { low, high } => {
            if !(low.is_finite() && high.is_finite()) || low > high || *low < 0.0 {
                return Err(ConfigError::at(
                    "/target",
                    "bounds must satisfy 0 <= low <= high",
                ));
            }
            (space.units_to_cost(*low), space.units_to_cost(*high))
        }
        TargetConfig::FractionOfMax { fraction_of_max } => {
            let f = *fraction_of_max;
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::at(
                    "/target/fraction_of_max",
                    "must lie in (0, 1]",
                ));
            }
            let all_max = space.max_cost_architecture();
            let max_cost = space
                .architecture_cost(&all_max)
                .map_err(|e| ConfigError::at("/target", e))?;
            (Cost::ZERO, Cost((max_cost.0 as f64 * f).round() as i64))
        }
    };

    let epoch_budget = cfg
        .epoch_budget
        .ok_or_else(|| ConfigError::at("/epoch_budget", "missing"))?;
    if epoch_budget == 0 {
        return Err(ConfigError::at("/epoch_budget", "must be at least 1"));
    }
    let budget_seconds = cfg
        .total_train_seconds_budget
        .ok_or_else(|| ConfigError::at("/total_train_seconds_budget", "missing"))?;
    if !budget_seconds.is_finite() || budget_seconds <= 0.0 {
        return Err(ConfigError::at(
            "/total_train_seconds_budget",
            "must be positive and finite",
        ));
    }
    let seeds = cfg
        .seeds
        .clone()
        .ok_or_else(|| ConfigError::at("/seeds", "missing"))?;
    if seeds.is_empty() {
        return Err(ConfigError::at("/seeds", "must not be empty"));
    }
    let output_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| ConfigError::at("/output_dir", "missing"))?;

    let algorithm = match cfg
        .algorithm
        .as_ref()
        .ok_or_else(|| ConfigError::at("/algorithm", "missing"))?
    {
        AlgorithmConfig::Layernas(params) => ResolvedAlgorithm::LayerNas(layernas_config(
            params,
            &space,
            target_low,
            target_high,
            epoch_budget,
            budget_seconds,
        )),
        AlgorithmConfig::LayernasDp(params) => ResolvedAlgorithm::LayerNasDp(layernas_config(
            params,
            &space,
            target_low,
            target_high,
            epoch_budget,
            budget_seconds,
        )),
        AlgorithmConfig::Random(_) => ResolvedAlgorithm::Random,
        AlgorithmConfig::RegularizedEvolution(params) => {
            let config = RegularizedEvolutionConfig {
                population_size: params.population_size.unwrap_or(50),
                tournament_size: params.tournament_size.unwrap_or(10),
            };
            if config.tournament_size > config.population_size
                || config.population_size == 0
                || config.tournament_size == 0
            {
                return Err(ConfigError::at(
                    "/algorithm/regularized_evolution",
                    "need 1 <= tournament_size <= population_size",
                ));
            }
            if target_high.0 <= 0 {
                return Err(ConfigError::at(
                    "/target",
                    "the combined objective needs a positive target cost",
                ));
            }
            ResolvedAlgorithm::RegularizedEvolution {
                config,
                mnas_exponent: params.mnas_exponent.unwrap_or(-0.07),
            }
        }
    };
    if let ResolvedAlgorithm::LayerNas(cfg) | ResolvedAlgorithm::LayerNasDp(cfg) = &algorithm {
        cfg.validate()
            .map_err(|e| ConfigError::at("/algorithm", e))?;
    }

    Ok(ResolvedExperiment {
        space,
        oracle,
        algorithm,
        cost_metric,
        target_low,
        target_high,
        epoch_budget,
        budget_seconds,
        seeds,
        output_dir,
    })
}

fn layernas_config(
    params: &LayerNasParams,
    space: &SearchSpace,
    target_low: Cost,
    target_high: Cost,
    epoch_budget: u32,
    budget_seconds: f64,
) -> LayerNasConfig<f64> {
    let mut cfg = LayerNasConfig::for_space(space, target_high);
    cfg.target_low = target_low;
    cfg.epoch_budget = epoch_budget;
    cfg.train_seconds_budget = budget_seconds;
    if let Some(h) = params.h {
        cfg.bucket_count = h;
    }
    if let Some(k) = params.k {
        cfg.replicas = k;
    }
    cfg.selections_per_layer = params.r.unwrap_or(cfg.replicas * cfg.bucket_count);
    if let Some(t) = params.t {
        cfg.children_per_selection = t;
    }
    if let Some(pass_mode) = params.pass_mode {
        cfg.pass_mode = pass_mode;
    }
    if let Some(mode) = params.mode {
        cfg.mode = mode;
    }
    if let Some(allow) = params.allow_reeval {
        cfg.allow_reeval = allow;
    }
    cfg
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
