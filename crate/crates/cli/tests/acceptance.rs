//! Acceptance suite. One test per criterion; each prints a single
//! `acceptance criterion N (...): PASS` line (visible with `--nocapture`)
//! and enforces its stated runtime limit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use layernas::analysis::{
    inversion_probability, keep_all_probability, monte_carlo_retention, normal_cdf,
    ReplicaAnalysisSpec,
};
use layernas::baselines::{
    run_random_search, run_regularized_evolution, MnasObjectiveSpec, RegularizedEvolutionConfig,
    SearchBudget,
};
use layernas::engine::{run_layernas, run_layernas_dp, LayerNasConfig, PassMode, SearchResult};
use layernas::oracle::{brute_force_optimum, SyntheticOracle, SyntheticOracleSpec};
use layernas::space::{bucket_index, two_sig_figs, Cost, LayerSpec, PhiMode, SearchSpace};

use layernas_cli::config::{
    AlgorithmConfig, EmptyParams, ExperimentConfig, LayerNasParams, OracleConfig, ReParams,
    TargetConfig,
};
use layernas_cli::{run_experiment, RunOptions};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Random space + decomposable noise-free oracle, as pinned by criterion 1:
/// L in [2, 6], |S_i| in [2, 5], integer costs in [1, 20].
fn random_space(rng: &mut StdRng) -> (SearchSpace, SyntheticOracle<f64>) {
    let layer_count = rng.gen_range(2..=6);
    let mut layers = Vec::with_capacity(layer_count);
    let mut quality = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let options = rng.gen_range(2..=5);
        let mut costs: Vec<i64> = (0..options).map(|_| rng.gen_range(1..=20)).collect();
        costs.sort_unstable_by(|a, b| b.cmp(a));
        let default = rng.gen_range(0..options);
        layers.push(LayerSpec::from_costs(&costs, default));
        quality.push((0..options).map(|_| rng.gen_range(0.0..0.02)).collect());
    }
    let space = SearchSpace::new("random", "units", PhiMode::CostBucket, layers).unwrap();
    let oracle = SyntheticOracle::new(
        space.clone(),
        SyntheticOracleSpec::decomposable(quality, 0.0, 1.0),
    )
    .unwrap();
    (space, oracle)
}

#[test]
fn criterion_1_dp_exactness() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    let mut cases = 0usize;
    for _ in 0..50 {
        let (space, oracle) = random_space(&mut rng);
        let (min, max) = space
            .cost_completion_interval(&layernas::space::Prefix::empty())
            .unwrap();
        for step in 0..10i64 {
            let high = Cost(min.0 + (max.0 - min.0) * step / 9);
            let mut cfg = LayerNasConfig::for_space(&space, high);
            cfg.seed = 1;
            let dp = run_layernas_dp(&space, &oracle, &cfg).unwrap();
            let (_, expect) = brute_force_optimum(&space, &oracle, Cost(0), high, 1, None).unwrap();
            let best = dp
                .best_by_validation
                .expect("a target at or above the space minimum is reachable");
            assert_eq!(
                best.validation_accuracy,
                expect.validation_accuracy,
                "space {}, target {high}",
                space.name()
            );
            assert!(best.cost <= high);
            cases += 1;
        }
    }
    assert_eq!(cases, 500);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 1 overran: {elapsed:?}");
    println!(
        "acceptance criterion 1 (dp exactness vs brute force): PASS — {cases}/500 targets matched in {elapsed:.2?}"
    );
}

#[test]
fn criterion_2_trial_count_bound() {
    // runtime bound on assorted sampling runs
    let mut rng = StdRng::seed_from_u64(202);
    for case in 0..10 {
        let (space, oracle) = random_space(&mut rng);
        let (min, max) = space
            .cost_completion_interval(&layernas::space::Prefix::empty())
            .unwrap();
        let mut cfg = LayerNasConfig::for_space(&space, Cost((min.0 + max.0) / 2 + 1));
        cfg.bucket_count = rng.gen_range(2..=100);
        cfg.replicas = rng.gen_range(1..=3);
        cfg.selections_per_layer = rng.gen_range(5..=200);
        cfg.children_per_selection = rng.gen_range(1..=6);
        let passes = rng.gen_range(1..=3);
        cfg.pass_mode = PassMode::Cyclic { max_passes: passes };
        cfg.seed = case;
        let result = run_layernas(&space, &oracle, &cfg).unwrap();
        let bound = passes * cfg.replicas * cfg.bucket_count * space.option_sum() as usize
            + space.layer(0).len();
        assert!(
            result.evals_used <= bound,
            "case {case}: {} > {bound}",
            result.evals_used
        );
    }

    // the bundled 60M-MAdds space file: manifest numbers vs the table values,
    // cross-checked by independent recomputation over the raw file
    let space_path = data_dir().join("spaces/mobilenet_v3_small_60m.json");
    let raw: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&space_path).unwrap()).unwrap();
    let sizes: Vec<usize> = raw["layers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["options"].as_array().unwrap().len())
        .collect();
    let option_sum: usize = sizes.iter().sum();
    let unique: f64 = sizes.iter().map(|&s| s as f64).product();
    assert_eq!(option_sum, 393);
    assert_eq!(300 * option_sum, 117_900);
    assert_eq!(two_sig_figs(unique), "5.0e20");
    assert_eq!(two_sig_figs(117_900.0), "1.2e5");

    let space = SearchSpace::load(&space_path).unwrap();
    let quality: Vec<Vec<f64>> = space
        .layers()
        .iter()
        .map(|layer| {
            let top = layer.max_cost().0.max(1) as f64;
            layer
                .options
                .iter()
                .map(|o| o.cost.0 as f64 / top * 0.05)
                .collect()
        })
        .collect();
    let cfg = ExperimentConfig {
        space_file: Some(space_path),
        oracle: Some(OracleConfig::Synthetic(SyntheticOracleSpec::decomposable(
            quality, 0.0, 1.0,
        ))),
        algorithm: Some(AlgorithmConfig::Layernas(LayerNasParams {
            h: Some(100),
            k: Some(3),
            r: Some(50),
            ..Default::default()
        })),
        cost_metric: Some("madds_proxy".into()),
        target: Some(TargetConfig::FractionOfMax {
            fraction_of_max: 0.5,
        }),
        epoch_budget: Some(1),
        total_train_seconds_budget: Some(400.0),
        seeds: Some(vec![1]),
        output_dir: Some(PathBuf::from("out")),
    };
    let out = tempfile::tempdir().unwrap();
    let options = RunOptions {
        output_dir: Some(out.path().to_path_buf()),
        seed_override: None,
    };
    let manifest_path = run_experiment(&cfg, &data_dir(), &options).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["max_trial_bound"], 117_900);
    assert_eq!(manifest["space"]["option_sum"], 393);
    assert_eq!(manifest["space"]["unique_models_2sf"], "5.0e20");
    let evals = manifest["runs"][0]["evals_used"].as_u64().unwrap();
    assert!(evals <= 117_900);
    println!(
        "acceptance criterion 2 (trial-count bound): PASS — bound 117900 = 300 x 393, unique 5.0e20, run used {evals} evals"
    );
}

#[test]
fn criterion_3_bucketization() {
    // the pinned examples
    assert_eq!(bucket_index(Cost(10), Cost(20), Cost(15), 100).unwrap(), 50);
    assert_eq!(bucket_index(Cost(10), Cost(20), Cost(20), 100).unwrap(), 99);
    assert_eq!(bucket_index(Cost(7), Cost(7), Cost(7), 100).unwrap(), 0);

    let mut rng = StdRng::seed_from_u64(303);
    for _ in 0..20_000 {
        let min = rng.gen_range(0..10_000i64);
        let span = rng.gen_range(0..10_000i64);
        let max = min + span;
        let h = rng.gen_range(1..=500usize);
        let a = rng.gen_range(min..=max);
        let b = rng.gen_range(min..=max);
        let ba = bucket_index(Cost(min), Cost(max), Cost(a), h).unwrap();
        let bb = bucket_index(Cost(min), Cost(max), Cost(b), h).unwrap();
        assert!(ba < h && bb < h, "image within [0, H)");
        if a <= b {
            assert!(ba <= bb, "monotone: {a}->{ba}, {b}->{bb}, h {h}");
        } else {
            assert!(ba >= bb);
        }
        // interior values reproduce the raw floor formula un-clamped
        if span > 0 && a < max {
            let raw = ((a - min) as i128 * h as i128) / (span as i128);
            assert_eq!(ba as i128, raw);
        }
        if span == 0 {
            assert_eq!(ba, 0);
        }
    }
    println!("acceptance criterion 3 (bucketization properties): PASS — 20000 random tuples plus pinned examples");
}

/// The replica experiment: 20 binary layers with equal costs, superior option
/// 0.002 above the inferior default, evaluation noise 0.001.
fn retention_space() -> (SearchSpace, SyntheticOracleSpec<f64>) {
    let layers: Vec<LayerSpec> = (0..20).map(|_| LayerSpec::from_costs(&[1, 1], 1)).collect();
    let space = SearchSpace::new("retention", "units", PhiMode::CostBucket, layers).unwrap();
    let quality: Vec<Vec<f64>> = (0..20).map(|_| vec![0.027, 0.025]).collect();
    let spec = SyntheticOracleSpec::decomposable(quality, 0.001, 1.0);
    (space, spec)
}

#[test]
fn criterion_4_replica_analysis() {
    let start = Instant::now();

    let keep_all: f64 = keep_all_probability(0.092, 3, 20);
    assert!(
        (keep_all - 0.98446).abs() <= 1e-4,
        "keep_all_probability(0.092, 3, 20) = {keep_all}"
    );

    let spec = ReplicaAnalysisSpec {
        mu_diff: -0.002,
        sigma_x: 0.001,
        sigma_y: 0.001,
        replicas: 3,
        layers: 20,
    };
    let p: f64 = inversion_probability(&spec).unwrap();
    assert!((p - 0.07865).abs() <= 1e-4, "inversion probability = {p}");
    // the often-quoted 9.2% inversion rate for these means corresponds to a
    // combined sigma near 0.0015, not sqrt(2) * 0.001
    let quoted = 0.092f64;
    let implied_sigma = -0.002 / normal_cdf_inverse_checked(quoted);
    assert!((implied_sigma - 0.0015).abs() < 1e-4);

    let (space, oracle_spec) = retention_space();
    let mut reports = vec![];
    for k in [1usize, 3] {
        let mut cfg = LayerNasConfig::for_space(&space, Cost(20));
        cfg.replicas = k;
        cfg.selections_per_layer = 60;
        cfg.children_per_selection = 2;
        cfg.pass_mode = PassMode::Cyclic { max_passes: 2 };
        cfg.seed = 2024;
        reports.push(monte_carlo_retention(&space, &oracle_spec, &cfg, 200).unwrap());
    }
    let (k1, k3) = (&reports[0], &reports[1]);
    assert!(
        k3.rate >= k1.rate,
        "retention(k=3) = {} < retention(k=1) = {}",
        k3.rate,
        k1.rate
    );
    // the analytic model predicts k = 3 retains strictly more; the paired
    // runs must agree at Wilson-95% separation
    assert!(
        k3.wilson_low > k1.wilson_high,
        "k=3 CI [{:.3}, {:.3}] does not separate from k=1 CI [{:.3}, {:.3}]",
        k3.wilson_low,
        k3.wilson_high,
        k1.wilson_low,
        k1.wilson_high
    );
    // with one replica every layer search is a single fresh pairwise
    // comparison, which is exactly the analytic model; the prediction must
    // fall inside the empirical Wilson interval
    let analytic_k1 = keep_all_probability(p, 1, 20);
    assert!(
        k1.contains(analytic_k1),
        "analytic k=1 retention {analytic_k1:.4} outside [{:.4}, {:.4}]",
        k1.wilson_low,
        k1.wilson_high
    );
    let analytic_k3 = keep_all_probability(p, 3, 20);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "criterion 4 overran: {elapsed:?}");
    println!(
        "acceptance criterion 4 (replica analysis): PASS — keep_all {keep_all:.5}, inversion {p:.5} (9.2% implies combined sigma 0.0015), \
         retention k=1 {:.3} [{:.3}, {:.3}] vs analytic {analytic_k1:.3}, k=3 {:.3} [{:.3}, {:.3}] (independent-inversion model gives {analytic_k3:.3}), in {elapsed:.2?}",
        k1.rate, k1.wilson_low, k1.wilson_high, k3.rate, k3.wilson_low, k3.wilson_high
    );
}

/// Solves `normal_cdf(z) = p` by bisection; test-side helper.
fn normal_cdf_inverse_checked(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The fixed dominance benchmark: 8 layers, 6 options each, decomposable
/// quality with heterogeneous value-per-cost, sigma 0.001.
fn dominance_benchmark() -> (SearchSpace, SyntheticOracle<f64>) {
    let costs: [Vec<i64>; 8] = [
        vec![34, 21, 13, 8, 5, 3],
        vec![55, 34, 21, 13, 8, 5],
        vec![26, 19, 14, 9, 6, 4],
        vec![40, 30, 22, 15, 9, 4],
        vec![18, 14, 10, 7, 5, 3],
        vec![60, 45, 33, 24, 16, 8],
        vec![29, 22, 16, 11, 7, 4],
        vec![48, 36, 27, 18, 12, 6],
    ];
    let weights = [
        0.0065, 0.0020, 0.0070, 0.0015, 0.0052, 0.0024, 0.0060, 0.0018,
    ];
    let layers: Vec<LayerSpec> = costs.iter().map(|c| LayerSpec::from_costs(c, 0)).collect();
    let space = SearchSpace::new("dominance", "units", PhiMode::CostBucket, layers).unwrap();
    let quality: Vec<Vec<f64>> = costs
        .iter()
        .zip(weights)
        .map(|(layer, w)| layer.iter().map(|&c| (c as f64).powf(0.75) * w).collect())
        .collect();
    let oracle = SyntheticOracle::new(
        space.clone(),
        SyntheticOracleSpec::decomposable(quality, 0.001, 1.0),
    )
    .unwrap();
    (space, oracle)
}

fn final_accuracy(result: &SearchResult<f64>) -> f64 {
    result
        .best_by_validation
        .as_ref()
        .map(|b| b.validation_accuracy)
        .unwrap_or(0.0)
}

#[test]
fn criterion_5_search_quality_dominance() {
    let start = Instant::now();
    let (space, oracle) = dominance_benchmark();
    let max_cost: i64 = space.layers().iter().map(|l| l.max_cost().0).sum();
    let target = Cost(max_cost / 2);
    let budget_seconds = 4500.0;
    let budget = SearchBudget {
        target_low: Cost(0),
        target_high: target,
        epoch_budget: 1,
        train_seconds_budget: budget_seconds,
    };
    let mut wins = 0usize;
    let mut layernas_accs = vec![];
    let mut random_accs = vec![];
    let mut evolution_accs = vec![];
    for seed in 1..=20u64 {
        let mut cfg = LayerNasConfig::for_space(&space, target);
        cfg.bucket_count = 50;
        cfg.train_seconds_budget = budget_seconds;
        cfg.seed = seed;
        let layernas_best = final_accuracy(&run_layernas(&space, &oracle, &cfg).unwrap());
        let random_best =
            final_accuracy(&run_random_search(&space, &oracle, &budget, seed).unwrap());
        let evolution_best = final_accuracy(
            &run_regularized_evolution(
                &space,
                &oracle,
                &RegularizedEvolutionConfig::default(),
                &MnasObjectiveSpec::new(target),
                &budget,
                seed,
            )
            .unwrap(),
        );
        if layernas_best >= random_best {
            wins += 1;
        }
        layernas_accs.push(layernas_best);
        random_accs.push(random_best);
        evolution_accs.push(evolution_best);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m_ln, m_rs, m_re) = (
        mean(&layernas_accs),
        mean(&random_accs),
        mean(&evolution_accs),
    );
    assert!(
        wins * 100 >= 80 * 20,
        "layernas beat random search in only {wins}/20 pairs"
    );
    assert!(
        m_ln >= m_re - 0.002,
        "mean layernas {m_ln:.5} below RE mean - 0.002 = {:.5}",
        m_re - 0.002
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "criterion 5 overran: {elapsed:?}");
    println!(
        "acceptance criterion 5 (search dominance at equal budget): PASS — {wins}/20 pairwise wins over RS, means layernas {m_ln:.4} / rs {m_rs:.4} / re {m_re:.4}, in {elapsed:.2?}"
    );
}

#[test]
fn criterion_6_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let space_text = r#"{
        "name": "det",
        "cost_unit": "units",
        "cost_resolution": 1.0,
        "layers": [
            {"default": 0, "options": [{"label": "a", "cost": 5}, {"label": "b", "cost": 3}, {"label": "c", "cost": 1}]},
            {"default": 0, "options": [{"label": "a", "cost": 6}, {"label": "b", "cost": 2}, {"label": "c", "cost": 1}]},
            {"default": 0, "options": [{"label": "a", "cost": 4}, {"label": "b", "cost": 3}, {"label": "c", "cost": 2}]}
        ]
    }"#;
    std::fs::write(dir.path().join("space.json"), space_text).unwrap();
    let quality = vec![
        vec![0.05, 0.03, 0.01],
        vec![0.06, 0.02, 0.01],
        vec![0.04, 0.035, 0.02],
    ];
    let algorithms: Vec<(&str, AlgorithmConfig)> = vec![
        (
            "layernas",
            AlgorithmConfig::Layernas(LayerNasParams::default()),
        ),
        (
            "layernas_dp",
            AlgorithmConfig::LayernasDp(LayerNasParams::default()),
        ),
        ("random", AlgorithmConfig::Random(EmptyParams {})),
        (
            "regularized_evolution",
            AlgorithmConfig::RegularizedEvolution(ReParams {
                population_size: Some(8),
                tournament_size: Some(3),
                mnas_exponent: None,
            }),
        ),
    ];
    for (name, algorithm) in algorithms {
        let cfg = ExperimentConfig {
            space_file: Some(PathBuf::from("space.json")),
            oracle: Some(OracleConfig::Synthetic(SyntheticOracleSpec::decomposable(
                quality.clone(),
                0.002,
                1.0,
            ))),
            algorithm: Some(algorithm),
            cost_metric: Some("units".into()),
            target: Some(TargetConfig::Bounds {
                low: 0.0,
                high: 10.0,
            }),
            epoch_budget: Some(1),
            total_train_seconds_budget: Some(40.0),
            seeds: Some(vec![1, 2]),
            output_dir: Some(PathBuf::from("out")),
        };
        let out_a = dir.path().join(format!("{name}_a"));
        let out_b = dir.path().join(format!("{name}_b"));
        for out in [&out_a, &out_b] {
            let options = RunOptions {
                output_dir: Some(out.clone()),
                seed_override: None,
            };
            run_experiment(&cfg, dir.path(), &options).unwrap();
        }
        for seed in [1, 2] {
            let file = format!("trajectory_seed_{seed}.csv");
            let a = std::fs::read(out_a.join(&file)).unwrap();
            let b = std::fs::read(out_b.join(&file)).unwrap();
            assert_eq!(a, b, "{name}: {file} differs between reruns");
        }
    }
    println!("acceptance criterion 6 (byte-identical reruns): PASS — trajectory CSVs identical for all four algorithms");
}

/// Gated on user-supplied benchmark data: set `LAYERNAS_NATS_CONFIG` to an
/// experiment config whose tabular oracle points at a converted size-search
/// export. Skipped (not failed) when the variable is absent.
#[test]
fn criterion_7_nats_bench_size_search() {
    let Ok(config_path) = std::env::var("LAYERNAS_NATS_CONFIG") else {
        println!(
            "acceptance criterion 7 (size-search reproduction): SKIP — LAYERNAS_NATS_CONFIG not set"
        );
        return;
    };
    let config_path = PathBuf::from(config_path);
    let (cfg, base) = layernas_cli::load_config(&config_path).unwrap();
    let out = tempfile::tempdir().unwrap();
    let options = RunOptions {
        output_dir: Some(out.path().to_path_buf()),
        seed_override: None,
    };
    let manifest_path = run_experiment(&cfg, &base, &options).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest_path).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert!(runs.len() >= 5, "need at least 5 seeded runs");
    let test_accs: Vec<f64> = runs
        .iter()
        .map(|r| {
            r["best"]["test_accuracy"]
                .as_f64()
                .expect("tabular oracle reports test accuracy")
        })
        .collect();
    let mean = test_accs.iter().sum::<f64>() / test_accs.len() as f64;
    assert!(
        (mean - 0.9320).abs() <= 0.005,
        "mean test accuracy {mean:.4} outside 0.9320 +/- 0.005"
    );
    println!(
        "acceptance criterion 7 (size-search reproduction): PASS — mean test accuracy {mean:.4}"
    );
}
