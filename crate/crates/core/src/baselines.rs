//! Baseline searchers sharing the engine's oracle and budget accounting:
//! uniform random search, and regularized (aging) evolution driven by the
//! MNAS combined objective `accuracy * (cost / target)^w`.

use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{BucketKey, Driver, EngineError, SearchResult};
use crate::oracle::EvalOracle;
use crate::real::rf;
use crate::seeds;
use crate::space::{validate_space, Architecture, Cost, Prefix, SearchSpace};
use crate::Real;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cost must be positive for the combined objective")]
    NonPositiveCost,
}

/// Scalarization used by single-objective baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnasObjectiveSpec<F: Real> {
    pub target_cost: Cost,
    pub exponent: F,
}

impl<F: Real> MnasObjectiveSpec<F> {
    /// The customary exponent is -0.07.
    pub fn new(target_cost: Cost) -> Self {
        MnasObjectiveSpec {
            target_cost,
            exponent: rf(-0.07),
        }
    }
}

/// `accuracy * (cost / target)^exponent`. Scale-invariant in (cost, target)
/// and strictly decreasing in cost for positive accuracy and a negative
/// exponent.
pub fn mnas_objective<F: Real>(
    accuracy: F,
    cost: Cost,
    spec: &MnasObjectiveSpec<F>,
) -> Result<F, BaselineError> {
    if cost.0 <= 0 || spec.target_cost.0 <= 0 {
        return Err(BaselineError::NonPositiveCost);
    }
    let ratio: F = rf(cost.0 as f64 / spec.target_cost.0 as f64);
    Ok(accuracy * ratio.powf(spec.exponent))
}

/// Target band, proxy-training depth and train-seconds budget shared by all
/// searchers so their trajectories are comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget<F: Real> {
    pub target_low: Cost,
    pub target_high: Cost,
    pub epoch_budget: u32,
    pub train_seconds_budget: F,
}

impl<F: Real> SearchBudget<F> {
    pub fn new(target_high: Cost, train_seconds_budget: F) -> Self {
        SearchBudget {
            target_low: Cost::ZERO,
            target_high,
            epoch_budget: 1,
            train_seconds_budget,
        }
    }
}

/// Uniform random search: every trial draws each layer's option uniformly,
/// with replacement. The feasible best is tracked post hoc; sampling itself
/// ignores the cost bounds.
pub fn run_random_search<F: Real>(
    space: &SearchSpace,
    oracle: &dyn EvalOracle<F>,
    budget: &SearchBudget<F>,
    seed: u64,
) -> Result<SearchResult<F>, EngineError> {
    validate_space(space)?;
    let mut driver = new_driver(space, oracle, budget, seed);
    driver.check_target_reachable()?;
    let mut rng = StdRng::seed_from_u64(seeds::derive(seed, u64::MAX));
    while !driver.halted() {
        let arch = random_architecture(space, &mut rng);
        evaluate_full(&mut driver, arch)?;
    }
    Ok(driver.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularizedEvolutionConfig {
    pub population_size: usize,
    pub tournament_size: usize,
}

impl Default for RegularizedEvolutionConfig {
    fn default() -> Self {
        RegularizedEvolutionConfig {
            population_size: 50,
            tournament_size: 10,
        }
    }
}

impl RegularizedEvolutionConfig {
    fn validate(&self) -> Result<(), EngineError> {
        if self.population_size == 0 || self.tournament_size == 0 {
            return Err(EngineError::InvalidConfig(
                "population and tournament sizes must be >= 1".into(),
            ));
        }
        if self.tournament_size > self.population_size {
            return Err(EngineError::InvalidConfig(
                "tournament_size must not exceed population_size".into(),
            ));
        }
        Ok(())
    }
}

/// Aging evolution: seed a random population, then repeatedly pick the best
/// of a random tournament under the combined objective, mutate one layer to
/// a different option, evaluate the child, append it and retire the oldest
/// member. The reported best is by feasible validation accuracy, not by the
/// objective.
pub fn run_regularized_evolution<F: Real>(
    space: &SearchSpace,
    oracle: &dyn EvalOracle<F>,
    cfg: &RegularizedEvolutionConfig,
    objective: &MnasObjectiveSpec<F>,
    budget: &SearchBudget<F>,
    seed: u64,
) -> Result<SearchResult<F>, BaselineError> {
    validate_space(space).map_err(EngineError::from)?;
    cfg.validate()?;
    let mut driver = new_driver(space, oracle, budget, seed);
    driver.check_target_reachable()?;
    let mut rng = StdRng::seed_from_u64(seeds::derive(seed, u64::MAX));

    let mut population: VecDeque<(Architecture, F, Cost)> =
        VecDeque::with_capacity(cfg.population_size);
    while population.len() < cfg.population_size && !driver.halted() {
        let arch = random_architecture(space, &mut rng);
        let (acc, cost) = evaluate_full(&mut driver, arch.clone())?;
        population.push_back((arch, acc, cost));
    }
    while !driver.halted() {
        let parent = {
            let mut best: Option<(&(Architecture, F, Cost), F)> = None;
            for _ in 0..cfg.tournament_size {
                let member = &population[rng.gen_range(0..population.len())];
                let score = mnas_objective(member.1, member.2, objective)?;
                let wins = match &best {
                    None => true,
                    Some((current, current_score)) => {
                        match score.partial_cmp(current_score).expect("scores not NaN") {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => {
                                (member.2, &member.0.choices) < (current.2, &current.0.choices)
                            }
                        }
                    }
                };
                if wins {
                    best = Some((member, score));
                }
            }
            best.expect("tournament_size >= 1").0 .0.clone()
        };
        let child = mutate_one_layer(&parent, space, &mut rng);
        let (acc, cost) = evaluate_full(&mut driver, child.clone())?;
        population.push_back((child, acc, cost));
        population.pop_front();
    }
    Ok(driver.finish())
}

fn new_driver<'a, F: Real>(
    space: &'a SearchSpace,
    oracle: &'a dyn EvalOracle<F>,
    budget: &SearchBudget<F>,
    seed: u64,
) -> Driver<'a, F> {
    Driver::new(
        space,
        oracle,
        budget.epoch_budget,
        seed,
        budget.train_seconds_budget,
        budget.target_low,
        budget.target_high,
    )
}

fn evaluate_full<F: Real>(
    driver: &mut Driver<'_, F>,
    arch: Architecture,
) -> Result<(F, Cost), EngineError> {
    let bucket = BucketKey::Unique(arch.choices.clone());
    let record = driver.evaluate_prefix(Prefix::new(arch.choices), bucket)?;
    Ok((record.validation_accuracy, record.cost))
}

fn random_architecture(space: &SearchSpace, rng: &mut StdRng) -> Architecture {
    let choices = (0..space.num_layers())
        .map(|layer| rng.gen_range(0..space.layer(layer).len()))
        .collect();
    Architecture::new(choices)
}

/// Reassigns one uniformly chosen layer to a uniformly chosen different
/// option. A single-option layer leaves the parent unchanged.
fn mutate_one_layer(parent: &Architecture, space: &SearchSpace, rng: &mut StdRng) -> Architecture {
    let mut choices = parent.choices.clone();
    let layer = rng.gen_range(0..space.num_layers());
    let n = space.layer(layer).len();
    if n > 1 {
        let mut replacement = rng.gen_range(0..n - 1);
        if replacement >= choices[layer] {
            replacement += 1;
        }
        choices[layer] = replacement;
    }
    Architecture::new(choices)
}
