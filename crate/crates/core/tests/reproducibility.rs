//! Determinism and statistical-soundness guarantees: identical results for
//! identical (seed, lane) inputs regardless of worker count, exact coupling
//! across dataset sizes, seed-robust agreement with the closed-form oracle,
//! and honest interval coverage.

use nnlab_core::distributions::{DistributionSpec, QuerySpec};
use nnlab_core::metric::{Epsilon, PNorm};
use nnlab_core::montecarlo::{
    estimate_deviation_probability, estimate_expected_z_ratio, estimate_instability_probability,
    estimate_relative_contrast, estimate_relative_variance, estimate_stable_fraction,
    estimate_stable_fraction_shared_dataset, ExperimentConfig,
};
use nnlab_core::bounds::DatasetSizeRule;
use serde_json::json;

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

fn uniform_config(
    d: usize,
    n: u64,
    p: f64,
    epsilon: f64,
    query: QuerySpec,
    trials: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig::new(
        DistributionSpec::uniform_cube(d).unwrap(),
        DatasetSizeRule::constant(n).unwrap(),
        PNorm::new(p).unwrap(),
        Epsilon::new(epsilon).unwrap(),
        query,
        trials,
        seed,
    )
    .unwrap()
}

#[test]
fn every_estimator_is_bit_identical_across_worker_counts() {
    let instability_config =
        uniform_config(32, 64, 2.0, 0.3, QuerySpec::Center, 4000, 404);
    let query32 = vec![0.5; 32];
    let region_config =
        uniform_config(16, 32, 2.0, 0.3, QuerySpec::UniformRandom(20), 500, 405);
    let zratio_config = uniform_config(8, 100, 2.0, 0.1, QuerySpec::UniformRandom(1), 2000, 406);
    let contrast_config = uniform_config(16, 50, 2.0, 0.5, QuerySpec::Center, 500, 407);
    let spec16 = DistributionSpec::uniform_cube(16).unwrap();
    let query16 = vec![0.5; 16];
    let spec100 = DistributionSpec::uniform_cube(100).unwrap();
    let query100 = vec![0.5; 100];
    let p2 = PNorm::new(2.0).unwrap();

    let run_all = || {
        (
            estimate_instability_probability(&instability_config, &query32).unwrap(),
            estimate_stable_fraction(&region_config, 20).unwrap(),
            estimate_stable_fraction_shared_dataset(&region_config, 20).unwrap(),
            estimate_expected_z_ratio(&zratio_config).unwrap(),
            estimate_relative_contrast(&contrast_config, &query16).unwrap(),
            estimate_relative_variance(&spec16, &query16, p2, 5000, 408, 0.95).unwrap(),
            estimate_deviation_probability(&spec100, &query100, p2, 100.0 / 12.0, 0.2, 10_000, 409, 0.95)
                .unwrap(),
        )
    };

    let serial = pool(1).install(run_all);
    let parallel = pool(8).install(run_all);
    assert_eq!(serial, parallel, "worker count changed an aggregate output");
}

#[test]
fn coupled_runs_are_exactly_monotone_in_dataset_size() {
    // All size variants share one seed. Dataset draws are sequential on each
    // trial's stream, so the n-point dataset is a prefix of the 2n-point one
    // and the instability indicator can only switch off as n grows. The
    // estimates are therefore non-increasing exactly, not just in expectation.
    let query = vec![0.5; 16];
    let mut previous = f64::INFINITY;
    for n in [1u64, 2, 4, 8, 16] {
        let config = uniform_config(16, n, 2.0, 0.2, QuerySpec::Center, 3000, 1234);
        let estimate = estimate_instability_probability(&config, &query)
            .unwrap()
            .estimate;
        if n == 1 {
            assert_eq!(estimate, 1.0, "a single point is always within any band");
        }
        assert!(
            estimate <= previous,
            "estimate rose from {previous} to {estimate} at n={n} despite prefix coupling"
        );
        previous = estimate;
    }
    assert!(
        previous < 0.2,
        "n=16 at d=16 should break most ties, estimate {previous}"
    );
}

#[test]
fn closed_form_oracle_holds_across_seeds() {
    // d=1, n=2, q=0, p=1: instability probability is exactly ε/(1+ε).
    // With 10⁴ trials a 4-standard-error window fails a given seed with
    // probability ~6e−5; demand at most one exception in twenty seeds.
    let truth = 0.5;
    let window = 4.0 * (truth * (1.0 - truth) / 10_000f64).sqrt();
    let mut exceptions = 0;
    for seed in 0..20 {
        let config = uniform_config(1, 2, 1.0, 1.0, QuerySpec::Explicit(vec![vec![0.0]]), 10_000, seed);
        let estimate = estimate_instability_probability(&config, &[0.0])
            .unwrap()
            .estimate;
        if (estimate - truth).abs() > window {
            exceptions += 1;
        }
    }
    assert!(
        exceptions <= 1,
        "{exceptions}/20 seeds fell outside ±{window:.4} around {truth}"
    );
}

#[test]
fn wilson_intervals_cover_the_true_probability() {
    // Coverage audit through the public estimator: at d=1, n=2, q=0, p=1 the
    // success probability is exactly ε/(1+ε), so each estimate is a genuine
    // 100-draw binomial experiment with known truth. Wilson 95% intervals at
    // 100 draws keep coverage near nominal for central and fairly extreme p.
    for (eps_value, truth, floor) in [
        (1.0, 0.5, 0.93),
        (0.1, 1.0 / 11.0, 0.91),
        (9.0, 0.9, 0.91),
    ] {
        let experiments = 2000u32;
        let mut covered = 0u32;
        for experiment in 0..experiments {
            let config = uniform_config(
                1,
                2,
                1.0,
                eps_value,
                QuerySpec::Explicit(vec![vec![0.0]]),
                100,
                7000 + experiment as u64,
            );
            let estimate = estimate_instability_probability(&config, &[0.0]).unwrap();
            if estimate.ci_low <= truth && truth <= estimate.ci_high {
                covered += 1;
            }
        }
        let coverage = covered as f64 / experiments as f64;
        assert!(
            coverage >= floor,
            "coverage {coverage} below {floor} at true p = {truth}"
        );
        assert!(coverage <= 1.0);
    }
}

#[test]
fn estimates_serialize_with_stable_field_names() {
    let config = uniform_config(4, 8, 2.0, 0.5, QuerySpec::Center, 50, 99);
    let estimate = estimate_instability_probability(&config, &[0.5; 4]).unwrap();
    let value = serde_json::to_value(&estimate).unwrap();
    assert_eq!(value["trials"], json!(50));
    assert_eq!(value["seed"], json!(99));
    assert_eq!(value["method"], json!("wilson-score"));
    let estimate_field = value["estimate"].as_f64().unwrap();
    assert!((value["ci_low"].as_f64().unwrap()..=value["ci_high"].as_f64().unwrap())
        .contains(&estimate_field));
}
