//! The layer-wise search engine: the sampling algorithm over bucketized
//! per-layer candidate stores, and the exhaustive dynamic-programming variant
//! with exact cost keys used for exactness checks.
//!
//! Both runs share one driver: every evaluation is charged against the
//! train-seconds budget before its candidate is inserted, appended to the
//! trajectory with the post-charge cumulative time, and considered for the
//! global best among architectures whose full cost lies in the target band.

mod store;

pub use store::{BucketKey, CandidateRecord, InsertOutcome, LayerStore};

use std::collections::HashSet;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{EvalOracle, EvalRequest, OracleError};
use crate::seeds;
use crate::space::{validate_space, Architecture, Cost, PhiMode, Prefix, SearchSpace, SpaceError};
use crate::Real;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(
        "no architecture can satisfy cost bounds [{low}, {high}]; space range is [{min}, {max}]"
    )]
    InfeasibleTarget {
        low: Cost,
        high: Cost,
        min: Cost,
        max: Cost,
    },
    #[error("no feasible candidates available to select from")]
    NoAvailableCandidates,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// How layer passes repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassMode {
    /// One sweep over layers `1..L-1`.
    SinglePass,
    /// Wrap back to layer 1 after the last layer, up to `max_passes` sweeps.
    Cyclic { max_passes: usize },
}

impl Default for PassMode {
    fn default() -> Self {
        PassMode::Cyclic { max_passes: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerNasConfig<F: Real> {
    /// Number of cost buckets per layer (H).
    pub bucket_count: usize,
    /// Best candidates kept per bucket (k).
    pub replicas: usize,
    /// Selections per layer pass (R).
    pub selections_per_layer: usize,
    /// Children generated per selection (T).
    pub children_per_selection: usize,
    pub target_low: Cost,
    pub target_high: Cost,
    pub epoch_budget: u32,
    pub train_seconds_budget: F,
    pub seed: u64,
    pub pass_mode: PassMode,
    pub mode: PhiMode,
    /// When set, a child already evaluated is evaluated again (spending
    /// budget and extending the trajectory); the store keeps the first
    /// result. Off by default: repeats are skipped without cost.
    pub allow_reeval: bool,
}

impl<F: Real> LayerNasConfig<F> {
    /// Defaults sized for `space`: H = 100, k = 3, R = k * H, T = the widest
    /// layer, unbounded budget, one cyclic wrap.
    pub fn for_space(space: &SearchSpace, target_high: Cost) -> Self {
        let widest = space.layers().iter().map(|l| l.len()).max().unwrap_or(1);
        LayerNasConfig {
            bucket_count: 100,
            replicas: 3,
            selections_per_layer: 300,
            children_per_selection: widest,
            target_low: Cost::ZERO,
            target_high,
            epoch_budget: 1,
            train_seconds_budget: F::infinity(),
            seed: 0,
            pass_mode: PassMode::default(),
            mode: space.mode(),
            allow_reeval: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.bucket_count == 0
            || self.replicas == 0
            || self.selections_per_layer == 0
            || self.children_per_selection == 0
        {
            return Err(EngineError::InvalidConfig(
                "H, k, R and T must all be at least 1".into(),
            ));
        }
        if self.target_low > self.target_high {
            return Err(EngineError::InvalidConfig(
                "target_low must not exceed target_high".into(),
            ));
        }
        if self.epoch_budget == 0 {
            return Err(EngineError::InvalidConfig(
                "epoch_budget must be >= 1".into(),
            ));
        }
        if self.train_seconds_budget.is_nan() || self.train_seconds_budget <= F::zero() {
            return Err(EngineError::InvalidConfig(
                "train_seconds_budget must be positive".into(),
            ));
        }
        if let PassMode::Cyclic { max_passes } = self.pass_mode {
            if max_passes == 0 {
                return Err(EngineError::InvalidConfig("max_passes must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// One evaluated candidate on the search timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<F: Real> {
    pub cumulative_train_seconds: F,
    /// 1-based evaluation counter.
    pub trial_index: usize,
    /// Depth of the prefix the candidate was stored under.
    pub layer: usize,
    pub arch: Architecture,
    pub cost: Cost,
    pub validation_accuracy: F,
    pub test_accuracy: Option<F>,
    /// Whether the full architecture cost lies in the target band.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<F: Real> {
    pub trajectory: Vec<TrajectoryPoint<F>>,
    /// Global argmax among evaluated architectures with feasible full cost.
    pub best_by_validation: Option<CandidateRecord<F>>,
    /// Test accuracy of the best-by-validation candidate, when reported.
    pub best_test_accuracy: Option<F>,
    pub evals_used: usize,
}

impl<F: Real> SearchResult<F> {
    /// Best feasible validation accuracy seen up to and including `seconds`.
    pub fn best_so_far_at(&self, seconds: F) -> Option<F> {
        let mut best = None;
        for p in &self.trajectory {
            if p.cumulative_train_seconds > seconds {
                break;
            }
            if p.feasible && best.is_none_or(|b| p.validation_accuracy > b) {
                best = Some(p.validation_accuracy);
            }
        }
        best
    }
}

/// Maps a candidate to its bucket key on `layer` (1-based depth).
pub fn phi(
    space: &SearchSpace,
    mode: PhiMode,
    layer: usize,
    arch: &Architecture,
    bucket_count: usize,
) -> Result<BucketKey, SpaceError> {
    match mode {
        PhiMode::CostBucket => {
            let cost = space.architecture_cost(arch)?;
            Ok(BucketKey::Bucket(space.bucket_of(
                layer,
                cost,
                bucket_count,
            )?))
        }
        PhiMode::UniqueId => {
            if layer > arch.len() {
                return Err(SpaceError::DepthOutOfRange {
                    depth: layer,
                    layers: arch.len(),
                });
            }
            Ok(BucketKey::Unique(arch.choices[..layer].to_vec()))
        }
    }
}

/// True iff some completion of `prefix` can land in `[low, high]`.
///
/// The prefix must be valid for the space; the engine only ever builds valid
/// prefixes.
pub fn feasible(space: &SearchSpace, prefix: &Prefix, low: Cost, high: Cost) -> bool {
    let (min, max) = space
        .cost_completion_interval(prefix)
        .expect("prefix valid for space");
    min <= high && max >= low
}

/// Uniform pick among stored candidates that are still feasible; infeasible
/// records are evicted on the way.
pub fn select<F: Real>(
    store: &mut LayerStore<F>,
    rng: &mut StdRng,
    space: &SearchSpace,
    low: Cost,
    high: Cost,
) -> Result<CandidateRecord<F>, EngineError> {
    store.retain_feasible(space, low, high);
    let n = store.len();
    if n == 0 {
        return Err(EngineError::NoAvailableCandidates);
    }
    let index = rng.gen_range(0..n);
    Ok(store
        .records()
        .nth(index)
        .expect("index within store length")
        .clone())
}

/// Shared evaluation/accounting path for the engine and the baselines.
pub(crate) struct Driver<'a, F: Real> {
    space: &'a SearchSpace,
    oracle: &'a dyn EvalOracle<F>,
    epoch_budget: u32,
    seed: u64,
    budget: F,
    target_low: Cost,
    target_high: Cost,
    cumulative: F,
    trials: usize,
    halted: bool,
    trajectory: Vec<TrajectoryPoint<F>>,
    best: Option<CandidateRecord<F>>,
    best_test: Option<F>,
}

impl<'a, F: Real> Driver<'a, F> {
    pub(crate) fn new(
        space: &'a SearchSpace,
        oracle: &'a dyn EvalOracle<F>,
        epoch_budget: u32,
        seed: u64,
        budget: F,
        target_low: Cost,
        target_high: Cost,
    ) -> Self {
        Driver {
            space,
            oracle,
            epoch_budget,
            seed,
            budget,
            target_low,
            target_high,
            cumulative: F::zero(),
            trials: 0,
            halted: false,
            trajectory: vec![],
            best: None,
            best_test: None,
        }
    }

    pub(crate) fn halted(&self) -> bool {
        self.halted
    }

    /// Requires the root completion interval to intersect the target band.
    pub(crate) fn check_target_reachable(&self) -> Result<(), EngineError> {
        let (min, max) = self.space.cost_completion_interval(&Prefix::empty())?;
        if max < self.target_low || min > self.target_high {
            return Err(EngineError::InfeasibleTarget {
                low: self.target_low,
                high: self.target_high,
                min,
                max,
            });
        }
        Ok(())
    }

    /// Evaluates the default completion of `prefix`, charges the budget and
    /// records the trajectory point. Returns the candidate (bucket key still
    /// unset) for the caller to store.
    pub(crate) fn evaluate_prefix(
        &mut self,
        prefix: Prefix,
        bucket: BucketKey,
    ) -> Result<CandidateRecord<F>, EngineError> {
        let arch = self.space.complete_with_defaults(&prefix)?;
        let cost = self.space.architecture_cost(&arch)?;
        let result = self.oracle.evaluate(&EvalRequest {
            arch: arch.clone(),
            epoch_budget: self.epoch_budget,
            seed: seeds::derive(self.seed, self.trials as u64),
        })?;
        self.trials += 1;
        self.cumulative = self.cumulative + result.train_seconds;
        if self.cumulative >= self.budget {
            self.halted = true;
        }
        let feasible_full = cost >= self.target_low && cost <= self.target_high;
        let record = CandidateRecord {
            prefix,
            arch_evaluated: arch.clone(),
            validation_accuracy: result.validation_accuracy,
            cost,
            bucket,
        };
        self.trajectory.push(TrajectoryPoint {
            cumulative_train_seconds: self.cumulative,
            trial_index: self.trials,
            layer: record.prefix.depth(),
            arch,
            cost,
            validation_accuracy: result.validation_accuracy,
            test_accuracy: result.test_accuracy,
            feasible: feasible_full,
        });
        if feasible_full {
            let better = match &self.best {
                None => true,
                Some(b) => {
                    store::candidate_order(
                        (
                            record.validation_accuracy,
                            record.cost,
                            record.arch_evaluated.choices.as_slice(),
                        ),
                        (
                            b.validation_accuracy,
                            b.cost,
                            b.arch_evaluated.choices.as_slice(),
                        ),
                    ) == std::cmp::Ordering::Less
                }
            };
            if better {
                self.best = Some(record.clone());
                self.best_test = result.test_accuracy;
            }
        }
        Ok(record)
    }

    pub(crate) fn finish(self) -> SearchResult<F> {
        SearchResult {
            trajectory: self.trajectory,
            best_by_validation: self.best,
            best_test_accuracy: self.best_test,
            evals_used: self.trials,
        }
    }
}

/// The sampling search: seed the first layer with all of its options, then
/// per layer select stored candidates and extend them with random options of
/// the next layer, keeping the best `k` per cost bucket.
pub fn run_layernas<F: Real>(
    space: &SearchSpace,
    oracle: &dyn EvalOracle<F>,
    cfg: &LayerNasConfig<F>,
) -> Result<SearchResult<F>, EngineError> {
    validate_space(space)?;
    cfg.validate()?;
    let layer_count = space.num_layers();
    let mut driver = Driver::new(
        space,
        oracle,
        cfg.epoch_budget,
        cfg.seed,
        cfg.train_seconds_budget,
        cfg.target_low,
        cfg.target_high,
    );
    driver.check_target_reachable()?;
    let mut rng = StdRng::seed_from_u64(seeds::derive(cfg.seed, u64::MAX));
    let mut evaluated: HashSet<Vec<usize>> = HashSet::new();
    let mut stores: Vec<LayerStore<F>> = (1..=layer_count)
        .map(|depth| LayerStore::new(depth, cfg.replicas, cfg.bucket_count, cfg.mode))
        .collect();

    let spawn = |driver: &mut Driver<'_, F>,
                 stores: &mut Vec<LayerStore<F>>,
                 evaluated: &mut HashSet<Vec<usize>>,
                 prefix: Prefix|
     -> Result<(), EngineError> {
        if !evaluated.insert(prefix.choices.clone()) && !cfg.allow_reeval {
            return Ok(());
        }
        let depth = prefix.depth();
        let arch = space.complete_with_defaults(&prefix)?;
        let bucket = phi(space, cfg.mode, depth, &arch, cfg.bucket_count)?;
        let record = driver.evaluate_prefix(prefix, bucket)?;
        stores[depth - 1].insert(record);
        Ok(())
    };

    for option in 0..space.layer(0).len() {
        if driver.halted() {
            break;
        }
        spawn(
            &mut driver,
            &mut stores,
            &mut evaluated,
            Prefix::new(vec![option]),
        )?;
    }

    if layer_count > 1 {
        let mut passes = 0usize;
        'passes: loop {
            passes += 1;
            let mut any_selected = false;
            for layer in 1..layer_count {
                if driver.halted() {
                    break 'passes;
                }
                'layer_pass: for _ in 0..cfg.selections_per_layer {
                    if driver.halted() {
                        break 'passes;
                    }
                    let parent = match select(
                        &mut stores[layer - 1],
                        &mut rng,
                        space,
                        cfg.target_low,
                        cfg.target_high,
                    ) {
                        Ok(parent) => parent,
                        Err(EngineError::NoAvailableCandidates) => break 'layer_pass,
                        Err(e) => return Err(e),
                    };
                    any_selected = true;
                    for _ in 0..cfg.children_per_selection {
                        if driver.halted() {
                            break 'passes;
                        }
                        let option = rng.gen_range(0..space.layer(layer).len());
                        spawn(
                            &mut driver,
                            &mut stores,
                            &mut evaluated,
                            parent.prefix.child(option),
                        )?;
                    }
                }
            }
            match cfg.pass_mode {
                PassMode::SinglePass => break,
                PassMode::Cyclic { max_passes } => {
                    if passes >= max_passes || !any_selected {
                        break;
                    }
                }
            }
        }
    }
    Ok(driver.finish())
}

/// The exhaustive dynamic-programming form: every stored candidate of layer
/// `l` is extended with every option of layer `l + 1`, keyed by exact cost
/// with a single replica. Intended for noise-free oracles, where the result
/// matches brute-force enumeration for every reachable target.
pub fn run_layernas_dp<F: Real>(
    space: &SearchSpace,
    oracle: &dyn EvalOracle<F>,
    cfg: &LayerNasConfig<F>,
) -> Result<SearchResult<F>, EngineError> {
    validate_space(space)?;
    cfg.validate()?;
    let layer_count = space.num_layers();
    let mut driver = Driver::new(
        space,
        oracle,
        cfg.epoch_budget,
        cfg.seed,
        cfg.train_seconds_budget,
        cfg.target_low,
        cfg.target_high,
    );
    driver.check_target_reachable()?;
    let mut stores: Vec<LayerStore<F>> = (1..=layer_count)
        .map(|depth| LayerStore::new(depth, 1, cfg.bucket_count, cfg.mode))
        .collect();

    let spawn = |driver: &mut Driver<'_, F>,
                 stores: &mut Vec<LayerStore<F>>,
                 prefix: Prefix|
     -> Result<(), EngineError> {
        let depth = prefix.depth();
        let arch = space.complete_with_defaults(&prefix)?;
        let cost = space.architecture_cost(&arch)?;
        let record = driver.evaluate_prefix(prefix, BucketKey::ExactCost(cost))?;
        stores[depth - 1].insert(record);
        Ok(())
    };

    for option in 0..space.layer(0).len() {
        if driver.halted() {
            break;
        }
        spawn(&mut driver, &mut stores, Prefix::new(vec![option]))?;
    }
    for layer in 1..layer_count {
        if driver.halted() {
            break;
        }
        let parents: Vec<Prefix> = stores[layer - 1]
            .records()
            .map(|r| r.prefix.clone())
            .collect();
        for parent in parents {
            if driver.halted() {
                break;
            }
            if !feasible(space, &parent, cfg.target_low, cfg.target_high) {
                continue;
            }
            for option in 0..space.layer(layer).len() {
                if driver.halted() {
                    break;
                }
                spawn(&mut driver, &mut stores, parent.child(option))?;
            }
        }
    }
    Ok(driver.finish())
}
