mod common;

use polopt::exact::{brute_force_optimal, brute_force_with_mode};
use polopt::experiment::{run_experiment, Algorithm, ExperimentPlan};
use polopt::model::ranking_from_normalization;
use polopt::oracle::{run_rng, SampleOracle};
use polopt::sampling::{
    negative_sample_ban_smallest, negative_sample_random, sample_and_eliminate, sample_constant_k,
};
use polopt::{
    FrequencyDistribution, Mode, ModelOracle, Policy, PolicyModel, Rule, RuleBook, SamplingConfig,
};

use common::{instance_a, INSTANCE_A_P1};

fn true_value(
    model: &PolicyModel,
    book: &RuleBook,
    r: &polopt::OptimizationResult,
    k: usize,
) -> f64 {
    let policy = Policy::new(book, r.best.clone()).unwrap();
    model.p_k(&policy, k).unwrap()
}

#[test]
fn ranking_simulation_matches_sequential_probabilities() {
    let dist = FrequencyDistribution::from_pairs([("a", 0.9), ("b", 0.1)]).unwrap();
    let mut rng = run_rng(1, 0);
    let draws = 20_000;
    let first_a = (0..draws)
        .filter(|_| ranking_from_normalization(&dist, &mut rng).ids()[0].index() == 0)
        .count();
    // 5 standard deviations of a Bernoulli(0.9) mean
    let sd = (0.9f64 * 0.1 / draws as f64).sqrt();
    assert!((first_a as f64 / draws as f64 - 0.9).abs() < 5.0 * sd);

    let uniform = FrequencyDistribution::from_pairs([("a", 0.5), ("b", 0.5)]).unwrap();
    let first_a = (0..draws)
        .filter(|_| ranking_from_normalization(&uniform, &mut rng).ids()[0].index() == 0)
        .count();
    let sd = (0.25f64 / draws as f64).sqrt();
    assert!((first_a as f64 / draws as f64 - 0.5).abs() < 5.0 * sd);
}

#[test]
fn ranking_simulation_orders_three_passwords() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let probs = [0.5, 0.3, 0.2];
    let dist = FrequencyDistribution::from_pairs([("a", 0.5), ("b", 0.3), ("c", 0.2)]).unwrap();
    let orders = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let expected: Vec<f64> = orders
        .iter()
        .map(|o| probs[o[0]] * probs[o[1]] / (1.0 - probs[o[0]]))
        .collect();
    let draws = 30_000;
    let mut seen = [0u64; 6];
    let mut rng = run_rng(2, 0);
    for _ in 0..draws {
        let l = ranking_from_normalization(&dist, &mut rng);
        let key: Vec<usize> = l.ids().iter().map(|id| id.index()).collect();
        seen[orders.iter().position(|o| o[..] == key[..]).unwrap()] += 1;
    }
    let chi2: f64 = seen
        .iter()
        .zip(&expected)
        .map(|(&o, &p)| {
            let e = p * draws as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(5.0).unwrap().cdf(chi2);
    assert!(p_value > 0.001, "chi2 {chi2}, p {p_value}");
}

#[test]
fn constant_k_sampler_is_close_on_instance_a() {
    let (model, book) = instance_a();
    let cfg = SamplingConfig {
        k: 2,
        ..SamplingConfig::new(0.05, 0.1)
    };
    let best = brute_force_optimal(&model, &book, 2).unwrap().value;
    let hits = (0..200u64)
        .filter(|&seed| {
            let mut oracle = ModelOracle::new(&model, &book, run_rng(seed, 0)).unwrap();
            let r = sample_constant_k(&mut oracle, &book, &cfg).unwrap();
            true_value(&model, &book, &r, 2) <= best + cfg.epsilon
        })
        .count();
    assert!(hits >= 180, "{hits}/200");
}

#[test]
fn constant_k_at_one_behaves_like_sample_and_eliminate() {
    let (model, book) = instance_a();
    let cfg = SamplingConfig::new(0.05, 0.1);
    let mut means = [0.0; 2];
    for seed in 0..200u64 {
        let mut o = ModelOracle::new(&model, &book, run_rng(seed, 0)).unwrap();
        let a = sample_and_eliminate(&mut o, &book, &cfg).unwrap();
        let mut o = ModelOracle::new(&model, &book, run_rng(seed, 0)).unwrap();
        let b = sample_constant_k(&mut o, &book, &cfg).unwrap();
        means[0] += true_value(&model, &book, &a, 1) / 200.0;
        means[1] += true_value(&model, &book, &b, 1) / 200.0;
    }
    assert!(
        means.iter().all(|&m| m <= INSTANCE_A_P1 + 0.05),
        "{means:?}"
    );
    assert!((means[0] - means[1]).abs() < 0.025, "{means:?}");
}

#[test]
fn sample_budget_holds_on_random_instances() {
    for seed in 0..20u64 {
        let inst = polopt::generators::gen_random_instance(
            10,
            6,
            30,
            polopt::generators::ModelKind::Ranking,
            seed,
        )
        .unwrap();
        let cfg = SamplingConfig {
            sample_size: Some(300),
            early_exit: false,
            ..SamplingConfig::default()
        };
        let mut o = ModelOracle::new(&inst.model, &inst.book, run_rng(seed, 0)).unwrap();
        let r = sample_and_eliminate(&mut o, &inst.book, &cfg).unwrap();
        assert!(o.draws() <= 7 * 300);
        assert_eq!(o.draws(), r.samples_drawn);
        assert!(r.trace.len() <= 7);
    }
}

/// `x` sits in both negative rules. The lighter rule also holds ten small
/// passwords, the heavier one holds `u`. Banning the heavy rule alone is
/// optimal; banning the light rule first leaves `u` on top, and `u` can only
/// go by banning everything but `f`.
fn trap() -> (PolicyModel, RuleBook) {
    let mut pairs = vec![
        ("x".to_string(), 0.5),
        ("u".to_string(), 0.3),
        ("f".to_string(), 0.05),
    ];
    let light: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    pairs.extend(light.iter().map(|t| (t.clone(), 0.015)));
    let dist = FrequencyDistribution::from_pairs(pairs).unwrap();
    let space = dist.space().clone();
    let mut small = light.clone();
    small.push("x".into());
    let book = RuleBook::new(
        space,
        vec![Rule::explicit(1, small), Rule::explicit(2, ["x", "u"])],
        Mode::Negative,
    )
    .unwrap();
    (PolicyModel::Normalization(dist), book)
}

#[test]
fn ban_smallest_is_trapped_where_random_is_not() {
    let (model, book) = trap();
    let best = brute_force_with_mode(&model, &book, Mode::Negative, 1).unwrap();
    assert_eq!(best.best.ids(), vec![2]);
    assert!((best.value - 0.25).abs() < 1e-12);
    let cfg = SamplingConfig {
        sample_size: Some(1000),
        ..SamplingConfig::default()
    };
    let mut random_hits = 0;
    for seed in 0..100u64 {
        let mut o = ModelOracle::new(&model, &book, run_rng(seed, 0)).unwrap();
        let r = negative_sample_ban_smallest(&mut o, &book, &cfg).unwrap();
        assert!(
            true_value(&model, &book, &r, 1) > best.value + 1e-9,
            "seed {seed}"
        );
        let mut o = ModelOracle::new(&model, &book, run_rng(seed, 0)).unwrap();
        let r = negative_sample_random(&mut o, &book, &cfg, &mut run_rng(seed, 1)).unwrap();
        if (true_value(&model, &book, &r, 1) - best.value).abs() < 1e-9 {
            random_hits += 1;
        }
    }
    assert!(random_hits > 20, "{random_hits}");
}

#[test]
fn random_negative_decisions_do_no_better_than_positive_elimination() {
    let plan: ExperimentPlan = serde_json::from_value(serde_json::json!({
        "dataset": {"kind": "synthetic", "distinct": 5000, "seed": 4},
        "rules": {"mode": "positive", "rules": "standard"},
        "sample_sizes": [1000],
        "runs_per_size": 100,
        "seed": 8,
        "algorithms": ["sample-elim", "neg-random"]
    }))
    .unwrap();
    let report = run_experiment(&plan).unwrap();
    let mean = |a| {
        report
            .cells
            .iter()
            .find(|c| c.algorithm == a)
            .unwrap()
            .mean_p1
    };
    let (pos, neg) = (mean(Algorithm::SampleElim), mean(Algorithm::NegRandom));
    assert!(neg >= pos, "random negative {neg} vs positive {pos}");
}
