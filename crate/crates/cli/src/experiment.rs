//! Runs one experiment: one search per seed under a shared budget, written
//! out as per-seed trajectory CSVs, a best-so-far summary at log-spaced
//! checkpoints, and a manifest. Files are written atomically and partial
//! artifacts are removed when a run fails.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use layernas::analysis::{log_spaced_checkpoints, summarize, SummaryRow, TrajectoryBundle};
use layernas::baselines::{
    run_random_search, run_regularized_evolution, BaselineError, MnasObjectiveSpec, SearchBudget,
};
use layernas::engine::{run_layernas, run_layernas_dp, EngineError, SearchResult};
use layernas::space::SearchSpace;

use crate::config::{validate_config, ConfigError, ExperimentConfig, ResolvedAlgorithm};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("search failed: {0}")]
    Search(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Search(e.to_string())
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Search(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed_override: Option<Vec<u64>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    algorithm: &'a str,
    space: ManifestSpace,
    target: ManifestTarget,
    checkpoints: Vec<f64>,
    max_trial_bound: Option<u64>,
    runs: Vec<ManifestRun>,
    files: ManifestFiles,
}

#[derive(Serialize)]
struct ManifestSpace {
    name: String,
    cost_unit: String,
    layers: usize,
    option_sum: u64,
    unique_models: f64,
    unique_models_2sf: String,
}

#[derive(Serialize)]
struct ManifestTarget {
    low: f64,
    high: f64,
    low_scaled: i64,
    high_scaled: i64,
}

#[derive(Serialize)]
struct ManifestRun {
    seed: u64,
    evals_used: usize,
    best: Option<ManifestBest>,
}

#[derive(Serialize)]
struct ManifestBest {
    choices: Vec<usize>,
    validation_accuracy: f64,
    test_accuracy: Option<f64>,
    cost: f64,
}

#[derive(Serialize)]
struct ManifestFiles {
    trajectories: Vec<String>,
    summary: String,
    manifest: String,
}

/// Executes the experiment and returns the manifest path.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base: &Path,
    options: &RunOptions,
) -> Result<PathBuf, CliError> {
    let mut resolved = validate_config(cfg, base)?;
    if let Some(seeds) = &options.seed_override {
        if seeds.is_empty() {
            return Err(ConfigError {
                path: "/seeds".into(),
                message: "seed override must not be empty".into(),
            }
            .into());
        }
        resolved.seeds = seeds.clone();
    }
    let out_dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| resolved.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;

    let mut written: Vec<PathBuf> = vec![];
    let outcome = (|| -> Result<PathBuf, CliError> {
        let results: Result<Vec<SearchResult<f64>>, CliError> = resolved
            .seeds
            .par_iter()
            .map(|&seed| run_one(&resolved, seed))
            .collect();
        let results = results?;

        let mut trajectory_files = vec![];
        for (seed, result) in resolved.seeds.iter().zip(&results) {
            let name = format!("trajectory_seed_{seed}.csv");
            let path = out_dir.join(&name);
            write_atomic(&path, &trajectory_csv(&resolved.space, result))?;
            written.push(path);
            trajectory_files.push(name);
        }

        let checkpoints = log_spaced_checkpoints(resolved.budget_seconds, 20);
        let bundle = TrajectoryBundle::new(
            results.iter().map(|r| r.trajectory.as_slice()).collect(),
            checkpoints.clone(),
        )
        .map_err(|e| CliError::Search(e.to_string()))?;
        let summary_path = out_dir.join("summary.csv");
        write_atomic(&summary_path, &summary_csv(&summarize(&bundle)))?;
        written.push(summary_path);

        let manifest = Manifest {
            config: cfg,
            algorithm: resolved.algorithm.name(),
            space: ManifestSpace {
                name: resolved.space.name().to_string(),
                cost_unit: resolved.space.cost_unit().to_string(),
                layers: resolved.space.num_layers(),
                option_sum: resolved.space.option_sum(),
                unique_models: resolved.space.unique_models(),
                unique_models_2sf: layernas::space::two_sig_figs(resolved.space.unique_models()),
            },
            target: ManifestTarget {
                low: resolved.space.cost_in_units(resolved.target_low),
                high: resolved.space.cost_in_units(resolved.target_high),
                low_scaled: resolved.target_low.0,
                high_scaled: resolved.target_high.0,
            },
            checkpoints,
            max_trial_bound: resolved.algorithm.max_trial_bound(&resolved.space),
            runs: resolved
                .seeds
                .iter()
                .zip(&results)
                .map(|(&seed, result)| ManifestRun {
                    seed,
                    evals_used: result.evals_used,
                    best: result.best_by_validation.as_ref().map(|best| ManifestBest {
                        choices: best.arch_evaluated.choices.clone(),
                        validation_accuracy: best.validation_accuracy,
                        test_accuracy: result.best_test_accuracy,
                        cost: resolved.space.cost_in_units(best.cost),
                    }),
                })
                .collect(),
            files: ManifestFiles {
                trajectories: trajectory_files,
                summary: "summary.csv".into(),
                manifest: "manifest.json".into(),
            },
        };
        let manifest_path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&manifest_path, &text)?;
        written.push(manifest_path.clone());
        Ok(manifest_path)
    })();

    if outcome.is_err() {
        for path in written {
            let _ = std::fs::remove_file(path);
        }
    }
    outcome
}

fn run_one(
    resolved: &crate::config::ResolvedExperiment,
    seed: u64,
) -> Result<SearchResult<f64>, CliError> {
    let budget = SearchBudget {
        target_low: resolved.target_low,
        target_high: resolved.target_high,
        epoch_budget: resolved.epoch_budget,
        train_seconds_budget: resolved.budget_seconds,
    };
    let result = match &resolved.algorithm {
        ResolvedAlgorithm::LayerNas(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            run_layernas(&resolved.space, resolved.oracle.as_ref(), &cfg)?
        }
        ResolvedAlgorithm::LayerNasDp(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            run_layernas_dp(&resolved.space, resolved.oracle.as_ref(), &cfg)?
        }
        ResolvedAlgorithm::Random => {
            run_random_search(&resolved.space, resolved.oracle.as_ref(), &budget, seed)?
        }
        ResolvedAlgorithm::RegularizedEvolution {
            config,
            mnas_exponent,
        } => {
            let mut objective = MnasObjectiveSpec::new(resolved.target_high);
            objective.exponent = *mnas_exponent;
            run_regularized_evolution(
                &resolved.space,
                resolved.oracle.as_ref(),
                config,
                &objective,
                &budget,
                seed,
            )?
        }
    };
    Ok(result)
}

fn trajectory_csv(space: &SearchSpace, result: &SearchResult<f64>) -> String {
    let mut out = String::from(
        "cumulative_train_seconds,trial_index,layer,choices,cost,validation_accuracy,feasible,best_so_far_validation\n",
    );
    let mut best: Option<f64> = None;
    for p in &result.trajectory {
        if p.feasible && best.is_none_or(|b| p.validation_accuracy > b) {
            best = Some(p.validation_accuracy);
        }
        let best_str = best.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.cumulative_train_seconds,
            p.trial_index,
            p.layer,
            p.arch,
            space.cost_in_units(p.cost),
            p.validation_accuracy,
            u8::from(p.feasible),
            best_str,
        )
        .expect("write to string");
    }
    out
}

fn summary_csv(rows: &[SummaryRow<f64>]) -> String {
    let mut out = String::from("checkpoint_seconds,mean,std,n\n");
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.checkpoint_seconds, row.mean, row.std, row.runs_with_data
        )
        .expect("write to string");
    }
    out
}

fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

/// Rebuilds `summary.csv` from the trajectory CSVs in `dir` and returns the
/// rows. The checkpoint grid comes from `manifest.json` when present and
/// otherwise spans the largest observed time.
pub fn analyze_dir(dir: &Path) -> Result<Vec<SummaryRow<f64>>, CliError> {
    let mut trajectories: Vec<Vec<layernas::engine::TrajectoryPoint<f64>>> = vec![];
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trajectory_") && n.ends_with(".csv"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Search(format!(
            "no trajectory CSVs found in {}",
            dir.display()
        )));
    }
    for path in &names {
        trajectories.push(parse_trajectory_csv(&std::fs::read_to_string(path)?)?);
    }

    let manifest_path = dir.join("manifest.json");
    let checkpoints: Vec<f64> = if manifest_path.exists() {
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
                .map_err(|e| CliError::Search(format!("manifest.json: {e}")))?;
        value["checkpoints"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
            .unwrap_or_default()
    } else {
        vec![]
    };
    let checkpoints = if checkpoints.is_empty() {
        let horizon = trajectories
            .iter()
            .filter_map(|t| t.last().map(|p| p.cumulative_train_seconds))
            .fold(0.0f64, f64::max);
        log_spaced_checkpoints(horizon.max(1.0), 20)
    } else {
        checkpoints
    };

    let bundle = TrajectoryBundle::new(
        trajectories.iter().map(|t| t.as_slice()).collect(),
        checkpoints,
    )
    .map_err(|e| CliError::Search(e.to_string()))?;
    let rows = summarize(&bundle);
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows))?;
    Ok(rows)
}

fn parse_trajectory_csv(
    text: &str,
) -> Result<Vec<layernas::engine::TrajectoryPoint<f64>>, CliError> {
    let mut points = vec![];
    for (number, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 8 {
            return Err(CliError::Search(format!(
                "trajectory line {} has {} fields, expected 8",
                number + 1,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|e| CliError::Search(format!("line {}: {what}: {e}", number + 1)))
        };
        let choices = fields[3]
            .split('-')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| CliError::Search(format!("line {}: choices: {e}", number + 1)))
            })
            .collect::<Result<Vec<usize>, CliError>>()?;
        points.push(layernas::engine::TrajectoryPoint {
            cumulative_train_seconds: parse_f(fields[0], "seconds")?,
            trial_index: fields[1]
                .parse()
                .map_err(|e| CliError::Search(format!("line {}: trial: {e}", number + 1)))?,
            layer: fields[2]
                .parse()
                .map_err(|e| CliError::Search(format!("line {}: layer: {e}", number + 1)))?,
            arch: layernas::space::Architecture::new(choices),
            cost: layernas::space::Cost(parse_f(fields[4], "cost")?.round() as i64),
            validation_accuracy: parse_f(fields[5], "accuracy")?,
            test_accuracy: None,
            feasible: fields[6] == "1",
        });
    }
    Ok(points)
}
