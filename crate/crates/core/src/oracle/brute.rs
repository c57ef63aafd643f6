//! Exhaustive enumeration of a search space, used as the reference optimum
//! for the engine's exactness tests. Intended for noise-free oracles; the
//! evaluation seed is fixed so the result is a pure function of the inputs.

use super::{EvalOracle, EvalRequest, EvalResult, OracleError};
use crate::space::{Architecture, Cost, SearchSpace};
use crate::Real;

pub const DEFAULT_ENUMERATION_CAP: f64 = 1e6;

/// Enumerates every architecture, keeps those with total cost in
/// `[target_low, target_high]` and returns the validation-accuracy argmax.
/// Ties break toward lower cost, then lexicographically smaller choices, so
/// the result does not depend on enumeration order.
pub fn brute_force_optimum<F: Real>(
    space: &SearchSpace,
    oracle: &dyn EvalOracle<F>,
    target_low: Cost,
    target_high: Cost,
    epoch_budget: u32,
    cap: Option<f64>,
) -> Result<(Architecture, EvalResult<F>), OracleError> {
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let models = space.unique_models();
    if models > cap {
        return Err(OracleError::SpaceTooLarge { models, cap });
    }
    let mut best: Option<(Architecture, EvalResult<F>, Cost)> = None;
    let mut counter = vec![0usize; space.num_layers()];
    loop {
        let arch = Architecture::new(counter.clone());
        let cost = space.architecture_cost(&arch)?;
        if cost >= target_low && cost <= target_high {
            let result = oracle.evaluate(&EvalRequest {
                arch: arch.clone(),
                epoch_budget,
                seed: 0,
            })?;
            let better = match &best {
                None => true,
                Some((b_arch, b_res, b_cost)) => {
                    match result
                        .validation_accuracy
                        .partial_cmp(&b_res.validation_accuracy)
                        .expect("accuracies are not NaN")
                    {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => {
                            (cost, &arch.choices) < (*b_cost, &b_arch.choices)
                        }
                    }
                }
            };
            if better {
                best = Some((arch, result, cost));
            }
        }
        if !advance(&mut counter, space) {
            break;
        }
    }
    best.map(|(arch, res, _)| (arch, res))
        .ok_or(OracleError::NoFeasibleArchitecture)
}

/// Mixed-radix increment; false once every architecture has been visited.
fn advance(counter: &mut [usize], space: &SearchSpace) -> bool {
    for (layer, digit) in counter.iter_mut().enumerate().rev() {
        *digit += 1;
        if *digit < space.layer(layer).len() {
            return true;
        }
        *digit = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{SyntheticOracle, SyntheticOracleSpec};
    use crate::space::SearchSpace;

    fn toy_oracle() -> (SearchSpace, SyntheticOracle<f64>) {
        let space = SearchSpace::from_costs("toy", &[vec![3, 1], vec![2, 1]], 0).unwrap();
        let spec =
            SyntheticOracleSpec::decomposable(vec![vec![0.3, 0.1], vec![0.2, 0.0]], 0.0, 1.0);
        let oracle = SyntheticOracle::new(space.clone(), spec).unwrap();
        (space, oracle)
    }

    #[test]
    fn budgeted_optimum_excludes_the_expensive_argmax() {
        // Feasible under 4: (0,1) cost 4 acc 0.3, (1,0) cost 3 acc 0.3, (1,1) cost 2 acc 0.1.
        let (space, oracle) = toy_oracle();
        let (arch, res) = brute_force_optimum(&space, &oracle, Cost(0), Cost(4), 1, None).unwrap();
        assert_eq!(arch.choices, vec![1, 0]);
        assert!((res.validation_accuracy - 0.3).abs() < 1e-12);
        assert_eq!(space.architecture_cost(&arch).unwrap(), Cost(3));
    }

    #[test]
    fn exact_accuracy_ties_break_toward_lower_cost() {
        // equal integer-valued qualities make the tie exact in floats
        let space = SearchSpace::from_costs("tie", &[vec![3, 1], vec![2, 1]], 0).unwrap();
        let spec =
            SyntheticOracleSpec::decomposable(vec![vec![0.25, 0.25], vec![0.25, 0.25]], 0.0, 1.0);
        let oracle = SyntheticOracle::new(space.clone(), spec).unwrap();
        let (arch, _) = brute_force_optimum(&space, &oracle, Cost(0), Cost(5), 1, None).unwrap();
        assert_eq!(arch.choices, vec![1, 1]);
    }

    #[test]
    fn unconstrained_optimum_is_the_global_argmax() {
        let (space, oracle) = toy_oracle();
        let (arch, res) = brute_force_optimum(&space, &oracle, Cost(0), Cost(5), 1, None).unwrap();
        assert_eq!(arch.choices, vec![0, 0]);
        assert_eq!(res.validation_accuracy, 0.5);
    }

    #[test]
    fn infeasible_target_reports_no_architecture() {
        let (space, oracle) = toy_oracle();
        assert!(matches!(
            brute_force_optimum(&space, &oracle, Cost(0), Cost(1), 1, None),
            Err(OracleError::NoFeasibleArchitecture)
        ));
    }

    #[test]
    fn cap_guards_enumeration() {
        let (space, oracle) = toy_oracle();
        assert!(matches!(
            brute_force_optimum(&space, &oracle, Cost(0), Cost(5), 1, Some(3.0)),
            Err(OracleError::SpaceTooLarge { .. })
        ));
    }
}
