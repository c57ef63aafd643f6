//! Replica-count probability analysis and trajectory statistics.
//!
//! The replica model: two candidates share a cost bucket, the inferior one
//! trails the superior by `|mu_diff|` in expected accuracy, and evaluations
//! carry independent Gaussian noise. `inversion_probability` is the chance a
//! single noisy evaluation ranks them backwards; `keep_all_probability` is
//! the chance that, with `k` replicas per bucket, every one of `L` layer
//! searches still retains the superior candidate. `monte_carlo_retention`
//! measures the same quantity empirically by running the full engine.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_layernas, EngineError, LayerNasConfig, TrajectoryPoint};
use crate::oracle::{brute_force_optimum, OracleError, SyntheticOracle, SyntheticOracleSpec};
use crate::real::{as_f64, rf};
use crate::seeds;
use crate::space::SearchSpace;
use crate::Real;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("both noise deviations are zero")]
    DegenerateDistribution,
    #[error("trajectory bundle has no runs")]
    EmptyBundle,
    #[error("checkpoint grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Parameters of the two-candidate inversion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaAnalysisSpec<F: Real> {
    /// Inferior-minus-superior mean accuracy (negative when truly inferior).
    pub mu_diff: F,
    pub sigma_x: F,
    pub sigma_y: F,
    pub replicas: u32,
    pub layers: u32,
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probability that one noisy evaluation scores the inferior candidate above
/// the superior one: `P(x - y > 0)` with
/// `x - y ~ N(mu_diff, sigma_x^2 + sigma_y^2)`.
pub fn inversion_probability<F: Real>(spec: &ReplicaAnalysisSpec<F>) -> Result<F, AnalysisError> {
    let sx = as_f64(spec.sigma_x);
    let sy = as_f64(spec.sigma_y);
    let variance = sx * sx + sy * sy;
    if variance <= 0.0 {
        return Err(AnalysisError::DegenerateDistribution);
    }
    let z = as_f64(spec.mu_diff) / variance.sqrt();
    Ok(rf(normal_cdf(z)))
}

/// `(1 - p^k)^L`: the probability that every one of `L` layer searches keeps
/// the superior candidate when `k` replicas are stored per bucket and a
/// single inversion happens with probability `p`.
pub fn keep_all_probability<F: Real>(p: F, replicas: u32, layers: u32) -> F {
    debug_assert!(p >= F::zero() && p <= F::one());
    let survive = F::one() - p.powi(replicas as i32);
    survive.powi(layers as i32)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Outcome of a paired Monte-Carlo retention run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub trials: u64,
    pub matches: u64,
    pub rate: f64,
    /// 95% Wilson interval around the empirical rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl RetentionReport {
    pub fn contains(&self, p: f64) -> bool {
        self.wilson_low <= p && p <= self.wilson_high
    }
}

/// Runs `trials` seeded searches against the noisy oracle and reports how
/// often the search returns the space's true (noise-free) optimum. Trial `t`
/// uses seed `derive(cfg.seed, t)`; trials run concurrently.
pub fn monte_carlo_retention<F: Real>(
    space: &SearchSpace,
    oracle_spec: &SyntheticOracleSpec<F>,
    cfg: &LayerNasConfig<F>,
    trials: u64,
) -> Result<RetentionReport, AnalysisError> {
    let reference = SyntheticOracle::new(space.clone(), oracle_spec.noise_free())?;
    // the reference optimum is found once by enumeration; 4e6 covers a
    // 20-layer binary space with headroom
    let (optimum, _) = brute_force_optimum(
        space,
        &reference,
        cfg.target_low,
        cfg.target_high,
        cfg.epoch_budget,
        Some(4e6),
    )?;
    let oracle = SyntheticOracle::new(space.clone(), oracle_spec.clone())?;
    let outcomes: Result<Vec<bool>, EngineError> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut trial_cfg = cfg.clone();
            trial_cfg.seed = seeds::derive(cfg.seed, trial);
            let result = run_layernas(space, &oracle, &trial_cfg)?;
            Ok(result
                .best_by_validation
                .is_some_and(|best| best.arch_evaluated == optimum))
        })
        .collect();
    let outcomes = outcomes?;
    let matches = outcomes.iter().filter(|&&hit| hit).count() as u64;
    let (wilson_low, wilson_high) = wilson_interval(matches, trials, 1.959_963_984_540_054);
    Ok(RetentionReport {
        trials,
        matches,
        rate: matches as f64 / trials as f64,
        wilson_low,
        wilson_high,
    })
}

/// Several runs of one experiment plus the budget checkpoints to report at.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle<'a, F: Real> {
    runs: Vec<&'a [TrajectoryPoint<F>]>,
    grid: Vec<F>,
}

impl<'a, F: Real> TrajectoryBundle<'a, F> {
    pub fn new(runs: Vec<&'a [TrajectoryPoint<F>]>, grid: Vec<F>) -> Result<Self, AnalysisError> {
        if runs.is_empty() {
            return Err(AnalysisError::EmptyBundle);
        }
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AnalysisError::BadGrid);
        }
        Ok(TrajectoryBundle { runs, grid })
    }
}

/// One summary line: mean and sample standard deviation of the per-run best
/// feasible accuracy reached by the checkpoint, over the `n` runs that had
/// at least one feasible evaluation by then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow<F: Real> {
    pub checkpoint_seconds: F,
    pub mean: F,
    pub std: F,
    pub runs_with_data: usize,
}

/// Checkpoints with no data in any run are omitted, never extrapolated.
pub fn summarize<F: Real>(bundle: &TrajectoryBundle<'_, F>) -> Vec<SummaryRow<F>> {
    let mut rows = Vec::with_capacity(bundle.grid.len());
    for &checkpoint in &bundle.grid {
        let mut values: Vec<F> = vec![];
        for run in &bundle.runs {
            let mut best: Option<F> = None;
            for point in run.iter() {
                if point.cumulative_train_seconds > checkpoint {
                    break;
                }
                if point.feasible && best.is_none_or(|b| point.validation_accuracy > b) {
                    best = Some(point.validation_accuracy);
                }
            }
            if let Some(best) = best {
                values.push(best);
            }
        }
        if values.is_empty() {
            continue;
        }
        let n = values.len();
        let mean = values.iter().copied().sum::<F>() / rf(n as f64);
        let std = if n < 2 {
            F::zero()
        } else {
            let ss: F = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
            (ss / rf((n - 1) as f64)).sqrt()
        };
        rows.push(SummaryRow {
            checkpoint_seconds: checkpoint,
            mean,
            std,
            runs_with_data: n,
        });
    }
    rows
}

/// `count` geometrically spaced checkpoints ending at `budget`, spanning
/// three decades.
pub fn log_spaced_checkpoints<F: Real>(budget: F, count: usize) -> Vec<F> {
    assert!(count >= 2, "need at least two checkpoints");
    let end = as_f64(budget);
    assert!(
        end.is_finite() && end > 0.0,
        "budget must be finite and positive"
    );
    let start = end * 1e-3;
    let ratio = (end / start).powf(1.0 / (count - 1) as f64);
    (0..count)
        .map(|i| rf(start * ratio.powi(i as i32)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PassMode;
    use crate::space::{Architecture, Cost, Prefix};

    fn spec(mu: f64, sx: f64, sy: f64) -> ReplicaAnalysisSpec<f64> {
        ReplicaAnalysisSpec {
            mu_diff: mu,
            sigma_x: sx,
            sigma_y: sy,
            replicas: 3,
            layers: 20,
        }
    }

    /// Quadrature reference for the standard normal CDF: Simpson's rule on
    /// the density, independent of the erfc path.
    fn cdf_by_quadrature(z: f64) -> f64 {
        let lo = -10.0f64;
        let steps = 40_000usize;
        let h = (z - lo) / steps as f64;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(lo) + pdf(z);
        for i in 1..steps {
            let x = lo + h * i as f64;
            acc += pdf(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn cdf_matches_quadrature_to_1e9() {
        for z in [-3.0, -std::f64::consts::SQRT_2, -0.5, 0.0, 0.7, 2.2] {
            assert!(
                (normal_cdf(z) - cdf_by_quadrature(z)).abs() < 1e-9,
                "z = {z}"
            );
        }
    }

    #[test]
    fn equal_means_invert_half_the_time() {
        let p = inversion_probability(&spec(0.0, 0.001, 0.001)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inversion_probability_example_values() {
        // mu = -0.002, sigma_x = sigma_y = 0.001: z = -sqrt(2)
        let p = inversion_probability(&spec(-0.002, 0.001, 0.001)).unwrap();
        assert!((p - cdf_by_quadrature(-std::f64::consts::SQRT_2)).abs() < 1e-9);
        assert!((p - 0.078_649_603_525_143).abs() < 1e-9);

        // combined sigma 0.0015 reproduces the quoted 9.2% inversion rate
        let sy = (0.0015f64 * 0.0015 - 0.001 * 0.001).sqrt();
        let p = inversion_probability(&spec(-0.002, 0.001, sy)).unwrap();
        assert!((p - 0.091_211_219_725_867_8).abs() < 1e-9);
        assert!((p - 0.0912).abs() < 1e-4);
    }

    #[test]
    fn degenerate_distribution_is_an_error() {
        assert!(matches!(
            inversion_probability(&spec(-0.002, 0.0, 0.0)),
            Err(AnalysisError::DegenerateDistribution)
        ));
    }

    #[test]
    fn inversion_probability_is_antisymmetric() {
        for mu in [0.0, 0.0005, 0.002, 0.01] {
            let plus = inversion_probability(&spec(mu, 0.001, 0.002)).unwrap();
            let minus = inversion_probability(&spec(-mu, 0.001, 0.002)).unwrap();
            assert!((plus + minus - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn keep_all_probability_reference_values() {
        // direct power: (1 - 0.092^3)^20
        let direct = (1.0 - 0.092f64.powi(3)).powi(20);
        let got = keep_all_probability(0.092, 3, 20);
        assert!((got - direct).abs() < 1e-15);
        assert!((got - 0.984_541).abs() < 1e-6);

        // k = 1: 0.908^20 by direct power
        let direct = 0.908f64.powi(20);
        let got = keep_all_probability(0.092, 1, 20);
        assert!((got - direct).abs() < 1e-15);
        assert!((got - 0.145_115_6).abs() < 1e-6);

        assert_eq!(keep_all_probability(0.0, 3, 20), 1.0);
        assert_eq!(keep_all_probability(0.0, 1, 1), 1.0);
    }

    #[test]
    fn keep_all_probability_monotonicity() {
        let p = 0.1f64;
        assert!(keep_all_probability(p, 3, 20) > keep_all_probability(p, 1, 20));
        assert!(keep_all_probability(p, 3, 40) < keep_all_probability(p, 3, 20));
        assert!(keep_all_probability(0.2, 3, 20) < keep_all_probability(0.1, 3, 20));
    }

    #[test]
    fn wilson_interval_brackets_the_rate() {
        let (lo, hi) = wilson_interval(90, 100, 1.96);
        assert!(lo < 0.9 && 0.9 < hi);
        assert!(lo > 0.8 && hi < 0.96);
        let (lo, hi) = wilson_interval(100, 100, 1.96);
        assert!(lo > 0.95 && hi > 1.0 - 1e-9);
    }

    fn point(seconds: f64, acc: f64, feasible: bool) -> TrajectoryPoint<f64> {
        TrajectoryPoint {
            cumulative_train_seconds: seconds,
            trial_index: 1,
            layer: 1,
            arch: Architecture::new(vec![0]),
            cost: Cost(1),
            validation_accuracy: acc,
            test_accuracy: None,
            feasible,
        }
    }

    #[test]
    fn summarize_single_run_has_zero_std() {
        let run = vec![point(1.0, 0.8, true), point(2.0, 0.85, true)];
        let bundle = TrajectoryBundle::new(vec![&run], vec![1.5, 2.5]).unwrap();
        let rows = summarize(&bundle);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean, 0.8);
        assert_eq!(rows[0].std, 0.0);
        assert_eq!(rows[1].mean, 0.85);
        assert_eq!(rows[1].runs_with_data, 1);
    }

    #[test]
    fn summarize_two_runs_mean_and_std() {
        let a = vec![point(1.0, 0.90, true)];
        let b = vec![point(1.0, 0.92, true)];
        let bundle = TrajectoryBundle::new(vec![&a, &b], vec![2.0]).unwrap();
        let rows = summarize(&bundle);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mean - 0.91).abs() < 1e-12);
        assert!((rows[0].std - 0.014_142_135_623_73).abs() < 1e-9);
        assert_eq!(rows[0].runs_with_data, 2);
    }

    #[test]
    fn summarize_omits_checkpoints_before_any_event() {
        let run = vec![point(5.0, 0.9, true)];
        let bundle = TrajectoryBundle::new(vec![&run], vec![1.0, 10.0]).unwrap();
        let rows = summarize(&bundle);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].checkpoint_seconds, 10.0);
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let a = vec![point(1.0, 0.90, true), point(3.0, 0.95, true)];
        let b = vec![point(2.0, 0.92, true)];
        let c = vec![point(1.5, 0.80, true)];
        let grid = vec![2.5, 4.0];
        let fwd = summarize(&TrajectoryBundle::new(vec![&a, &b, &c], grid.clone()).unwrap());
        let rev = summarize(&TrajectoryBundle::new(vec![&c, &b, &a], grid).unwrap());
        assert_eq!(fwd, rev);
    }

    #[test]
    fn infeasible_points_never_enter_the_summary() {
        let run = vec![point(1.0, 0.99, false), point(2.0, 0.5, true)];
        let bundle = TrajectoryBundle::new(vec![&run], vec![1.5, 3.0]).unwrap();
        let rows = summarize(&bundle);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean, 0.5);
    }

    #[test]
    fn log_checkpoints_end_at_the_budget() {
        let grid = log_spaced_checkpoints(1000.0f64, 20);
        assert_eq!(grid.len(), 20);
        assert!((grid[0] - 1.0).abs() < 1e-9);
        assert!((grid[19] - 1000.0).abs() < 1e-6);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn retention_is_exact_with_a_noise_free_oracle() {
        let space =
            SearchSpace::from_costs("ret", &[vec![3, 1], vec![3, 1], vec![3, 1]], 0).unwrap();
        let quality = vec![vec![0.05, 0.02], vec![0.06, 0.01], vec![0.07, 0.03]];
        let oracle_spec = SyntheticOracleSpec::decomposable(quality, 0.0, 1.0);
        let mut cfg = LayerNasConfig::for_space(&space, Cost(9));
        cfg.selections_per_layer = 200;
        cfg.pass_mode = PassMode::Cyclic { max_passes: 2 };
        let report = monte_carlo_retention(&space, &oracle_spec, &cfg, 25).unwrap();
        assert_eq!(report.matches, 25);
        assert_eq!(report.rate, 1.0);
    }

    #[test]
    fn feasible_helper_used_by_summary_tests() {
        // keep the Prefix import honest
        let space = SearchSpace::from_costs("p", &[vec![2, 1]], 0).unwrap();
        assert!(space.validate_prefix(&Prefix::empty()).is_ok());
    }
}
