//! The acceptance battery: nine release criteria covering the closed-form
//! oracle, bound validity, the dimension trend, exponential-n stability, the
//! asymptotic expected-separation floor, unit-ball arithmetic, the Gaussian
//! chain, determinism under parallelism, and volume spot values. Each test
//! prints exactly one PASS/FAIL line (visible with `--nocapture`; a FAIL also
//! panics so the suite goes red).

// Reference literals keep every digit of the external computation that
// produced them, beyond the shortest f64 round-trip form.
#![allow(clippy::excessive_precision)]

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nnlab_core::bounds::{
    ball_volume_limit_check, chebyshev_gaussian_deviation_bound, ez_ratio_lower_bound,
    gamma_uniform, hoeffding_deviation_bound, instability_probability_lower_bound, largeness_ratio,
    log_unit_ball_volume, stable_volume_lower_bound, DatasetSizeRule,
};
use nnlab_core::distributions::{
    gaussian_squared_norm_moments, DistributionSpec, QuerySpec,
};
use nnlab_core::metric::{delta, CompensatedSum, Epsilon, PNorm};
use nnlab_core::montecarlo::{
    estimate_deviation_probability, estimate_instability_probability, estimate_stable_fraction,
    stream, EstimateWithCI, ExperimentConfig, StableRegionEstimate,
};

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let satisfied: bool = $cond;
        if !satisfied {
            return Err(format!($($arg)+));
        }
    };
}

fn report(criterion: u8, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("acceptance criterion {criterion} [{name}]: PASS ({detail})"),
        Err(reason) => {
            println!("acceptance criterion {criterion} [{name}]: FAIL ({reason})");
            panic!("acceptance criterion {criterion} [{name}]: {reason}");
        }
    }
}

fn p_of(v: f64) -> PNorm {
    PNorm::new(v).unwrap()
}

fn eps_of(v: f64) -> Epsilon {
    Epsilon::new(v).unwrap()
}

fn binomial_se(p_hat: f64, trials: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

// ---------------------------------------------------------------------------
// Shared experiment batch for criteria 1–4; criterion 8 re-runs it serially
// and demands bit identity, so the batch must hold outputs only (no timings).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
struct DeviationRow {
    d: usize,
    bound: f64,
    estimate: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq)]
struct InstabilityRow {
    d: usize,
    n: u64,
    lower: f64,
    estimate: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq)]
struct CoreBatch {
    /// Criterion 1: d=1, n=2, q=0, p=1 estimates for ε ∈ {0.1, 1}.
    oracle: Vec<EstimateWithCI>,
    /// Criterion 2: deviation estimates vs Hoeffding bounds, d ∈ {100,200,400}.
    deviation: Vec<DeviationRow>,
    /// Criterion 2: instability estimates vs positive lower bounds.
    instability: Vec<InstabilityRow>,
    /// Criterion 3: instability estimates along d ∈ {2,16,128,1024}, n(d)=d.
    trend: Vec<EstimateWithCI>,
    /// Criterion 4: stable region at d=6, n=7256, ζ=0.995.
    region: StableRegionEstimate,
}

struct BatchTimings {
    oracle: Duration,
    grid: Duration,
    trend: Duration,
    region: Duration,
}

const ORACLE_TRIALS: usize = 100_000;
const DEVIATION_TRIALS: usize = 100_000;
const INSTABILITY_TRIALS: usize = 10_000;
const TREND_TRIALS: usize = 2000;
const REGION_TRIALS: usize = 2000;
const REGION_QUERIES: usize = 50;

fn run_core_batch() -> (CoreBatch, BatchTimings) {
    let start = Instant::now();
    let oracle = [0.1, 1.0]
        .into_iter()
        .map(|eps_value| {
            let config = ExperimentConfig::new(
                DistributionSpec::uniform_cube(1).unwrap(),
                DatasetSizeRule::constant(2).unwrap(),
                p_of(1.0),
                eps_of(eps_value),
                QuerySpec::Explicit(vec![vec![0.0]]),
                ORACLE_TRIALS,
                101,
            )
            .unwrap();
            estimate_instability_probability(&config, &[0.0]).unwrap()
        })
        .collect();
    let oracle_time = start.elapsed();

    let start = Instant::now();
    let (p, epsilon) = (p_of(1.0), eps_of(1.0));
    let deviation = [100usize, 200, 400]
        .into_iter()
        .map(|d| {
            let bound = hoeffding_deviation_bound(d, p, epsilon, 1.0).unwrap();
            let query = vec![0.5; d];
            let gamma = gamma_uniform(&query, p).unwrap();
            let estimate = estimate_deviation_probability(
                &DistributionSpec::uniform_cube(d).unwrap(),
                &query,
                p,
                gamma,
                delta(epsilon, p),
                DEVIATION_TRIALS,
                202,
                0.95,
            )
            .unwrap();
            DeviationRow { d, bound, estimate }
        })
        .collect();
    let instability = [(100usize, 2u64), (100, 10), (200, 10), (400, 100)]
        .into_iter()
        .map(|(d, n)| {
            let rule = DatasetSizeRule::constant(n).unwrap();
            let lower = instability_probability_lower_bound(d, &rule, p, epsilon, 1.0).unwrap();
            let config = ExperimentConfig::new(
                DistributionSpec::uniform_cube(d).unwrap(),
                rule,
                p,
                epsilon,
                QuerySpec::Center,
                INSTABILITY_TRIALS,
                303,
            )
            .unwrap();
            let estimate = estimate_instability_probability(&config, &vec![0.5; d]).unwrap();
            InstabilityRow {
                d,
                n,
                lower,
                estimate,
            }
        })
        .collect();
    let grid_time = start.elapsed();

    let start = Instant::now();
    let trend = [2usize, 16, 128, 1024]
        .into_iter()
        .enumerate()
        .map(|(index, d)| {
            let config = ExperimentConfig::new(
                DistributionSpec::uniform_cube(d).unwrap(),
                DatasetSizeRule::polynomial(1.0, 1.0).unwrap(),
                p_of(2.0),
                eps_of(0.2),
                QuerySpec::Center,
                TREND_TRIALS,
                404,
            )
            .unwrap()
            .with_sweep_index(index as u16);
            estimate_instability_probability(&config, &vec![0.5; d]).unwrap()
        })
        .collect();
    let trend_time = start.elapsed();

    let start = Instant::now();
    let config = ExperimentConfig::new(
        DistributionSpec::uniform_cube(6).unwrap(),
        DatasetSizeRule::constant(7256).unwrap(),
        p_of(2.0),
        eps_of(0.1),
        QuerySpec::UniformRandom(REGION_QUERIES),
        REGION_TRIALS,
        505,
    )
    .unwrap();
    let region = estimate_stable_fraction(&config, REGION_QUERIES).unwrap();
    let region_time = start.elapsed();

    (
        CoreBatch {
            oracle,
            deviation,
            instability,
            trend,
            region,
        },
        BatchTimings {
            oracle: oracle_time,
            grid: grid_time,
            trend: trend_time,
            region: region_time,
        },
    )
}

fn batch() -> &'static (CoreBatch, BatchTimings) {
    static BATCH: OnceLock<(CoreBatch, BatchTimings)> = OnceLock::new();
    BATCH.get_or_init(|| pool(8).install(run_core_batch))
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_closed_form_instability_oracle() {
    let outcome = (|| {
        let (batch, timings) = batch();
        let truths = [0.1 / 1.1, 0.5];
        for (estimate, truth) in batch.oracle.iter().zip(truths) {
            ensure!(
                (estimate.estimate - truth).abs() <= 0.01,
                "estimate {:.6} missed closed-form value {truth:.6} by more than 0.01",
                estimate.estimate
            );
        }
        ensure!(
            timings.oracle < Duration::from_secs(5),
            "oracle section took {:?}, budget 5 s",
            timings.oracle
        );
        Ok(format!(
            "{:.5} vs 1/11, {:.5} vs 1/2 at 10^5 trials in {:.2?}",
            batch.oracle[0].estimate, batch.oracle[1].estimate, timings.oracle
        ))
    })();
    report(1, "closed-form instability oracle", outcome);
}

#[test]
fn criterion_2_bound_validity_grid() {
    let outcome = (|| {
        let (batch, timings) = batch();
        let d200 = batch
            .deviation
            .iter()
            .find(|row| row.d == 200)
            .expect("grid contains d=200");
        ensure!(
            (d200.bound - 0.124_353_048_044_232_62).abs() <= 1e-12 * d200.bound,
            "d=200 Hoeffding bound drifted: {}",
            d200.bound
        );
        for row in &batch.deviation {
            ensure!(row.bound < 1.0, "d={}: bound saturated", row.d);
            let slack = 4.0 * binomial_se(row.estimate.estimate, DEVIATION_TRIALS);
            ensure!(
                row.estimate.estimate <= row.bound + slack,
                "d={}: deviation frequency {:.6} exceeds bound {:.6} + 4se",
                row.d,
                row.estimate.estimate,
                row.bound
            );
        }
        for row in &batch.instability {
            ensure!(
                row.lower > 0.0,
                "d={}, n={}: grid must keep the lower bound positive",
                row.d,
                row.n
            );
            let slack = 4.0 * binomial_se(row.estimate.estimate, INSTABILITY_TRIALS);
            ensure!(
                row.estimate.estimate >= row.lower - slack,
                "d={}, n={}: estimate {:.6} fell below lower bound {:.6} − 4se",
                row.d,
                row.n,
                row.estimate.estimate,
                row.lower
            );
        }
        ensure!(
            timings.grid < Duration::from_secs(120),
            "bound grid took {:?}, budget 2 min",
            timings.grid
        );
        Ok(format!(
            "{} deviation and {} instability comparisons all honored in {:.2?}",
            batch.deviation.len(),
            batch.instability.len(),
            timings.grid
        ))
    })();
    report(2, "deviation/instability bound validity", outcome);
}

#[test]
fn criterion_3_instability_trend_in_dimension() {
    // Known-red criterion: the measured sequence is ≈ [0.276, 0.001, 0.152,
    // 1.000]. The d=2 point is a single pairwise tie (compare the d=1 closed
    // form ε/(1+ε) = 0.167), the d=16 point needs all sixteen points to tie
    // at once, and concentration only overtakes extreme-order-statistic
    // growth around d ≈ 128 — so the sequence dips by ~0.275 (about 90
    // standard errors) before rising. The endpoint clause (d=1024 ≥ 0.9) and
    // monotonicity from d=16 onward both hold; the full-grid monotonicity
    // clause does not, and this test reports that honestly rather than
    // weakening the check.
    let outcome = (|| {
        let (batch, timings) = batch();
        let rendered: Vec<String> = batch
            .trend
            .iter()
            .map(|e| format!("{:.3}", e.estimate))
            .collect();
        let sequence = rendered.join(", ");
        for pair in batch.trend.windows(2) {
            let slack = 2.0
                * (binomial_se(pair[0].estimate, TREND_TRIALS).powi(2)
                    + binomial_se(pair[1].estimate, TREND_TRIALS).powi(2))
                .sqrt();
            ensure!(
                pair[1].estimate >= pair[0].estimate - slack,
                "sequence [{sequence}] along d = 2,16,128,1024 is not non-decreasing: \
                 {:.4} falls to {:.4} against slack {:.4} (the pair-tie probability at \
                 d=2,n=2 exceeds the all-points-tie probability at d=16,n=16; the rise \
                 resumes from d=16 and d=1024 reaches {:.3})",
                pair[0].estimate,
                pair[1].estimate,
                slack,
                batch.trend.last().unwrap().estimate
            );
        }
        let last = batch.trend.last().unwrap().estimate;
        ensure!(last >= 0.9, "d=1024 estimate {last:.4} below 0.9");
        ensure!(
            timings.trend < Duration::from_secs(600),
            "trend section took {:?}, budget 10 min",
            timings.trend
        );
        Ok(format!(
            "estimates [{sequence}] along d = 2,16,128,1024 in {:.2?}",
            timings.trend
        ))
    })();
    report(3, "instability grows with dimension", outcome);
}

#[test]
fn criterion_4_exponential_n_stability() {
    let outcome = (|| {
        // The dataset-size law behind n = 7256: the base-4.4 exponential rule
        // realized at d=6.
        let realized = DatasetSizeRule::exponential(4.4).unwrap().realize(6).unwrap();
        ensure!(realized == 7256, "4.4^6 realized as {realized}, expected 7256");
        let (batch, timings) = batch();
        let region = &batch.region;
        ensure!(
            region.n_indeterminate * 10 <= REGION_QUERIES,
            "{} of {REGION_QUERIES} queries indeterminate (budget 10%)",
            region.n_indeterminate
        );
        let decisive = REGION_QUERIES - region.n_indeterminate;
        ensure!(decisive > 0, "every query came back indeterminate");
        let fraction = region.n_stable as f64 / decisive as f64;
        ensure!(
            fraction >= 0.98,
            "stable fraction {fraction:.4} among decisive queries below 0.98"
        );
        ensure!(
            timings.region < Duration::from_secs(1800),
            "stable-region section took {:?}, budget 30 min",
            timings.region
        );
        Ok(format!(
            "{}/{decisive} decisive queries stable, {} indeterminate, in {:.2?}",
            region.n_stable, region.n_indeterminate, timings.region
        ))
    })();
    report(4, "exponential dataset size keeps queries stable", outcome);
}

#[test]
fn criterion_5_expected_separation_floor() {
    let outcome = (|| {
        let start = Instant::now();
        let epsilon = eps_of(0.1);
        let log_growth = (4.0 * epsilon.factor()).ln();
        let mut rendered = Vec::new();
        for d in [500usize, 1000, 2000] {
            for p_value in [1.0, 2.0] {
                let value =
                    ez_ratio_lower_bound(d, p_of(p_value), epsilon, d as f64 * log_growth, 1.0)
                        .map_err(|e| e.to_string())?;
                ensure!(
                    value >= 0.01,
                    "E[Z]/d^(1/p) lower bound {value:.6} under 1/100 at d={d}, p={p_value}"
                );
                rendered.push(format!("{value:.4}"));
            }
        }
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1 s");
        Ok(format!(
            "lower bounds [{}] all ≥ 0.01 in {:.2?}",
            rendered.join(", "),
            elapsed
        ))
    })();
    report(5, "expected-separation floor of 1/100", outcome);
}

/// ln k! by direct accumulation — an oracle independent of the library's
/// log-gamma machinery.
fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// ln Γ(1 + d/2) from the half-integer recurrence Γ(1/2 + m) = √π·Π(j + 1/2).
fn ln_gamma_one_plus_half(d: u64) -> f64 {
    if d.is_multiple_of(2) {
        ln_factorial(d / 2)
    } else {
        let m = d.div_ceil(2);
        0.5 * std::f64::consts::PI.ln()
            + (0..m).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

#[test]
fn criterion_6_unit_ball_volume_machinery() {
    let outcome = (|| {
        let start = Instant::now();
        for d in 1..=50usize {
            let implementation = log_unit_ball_volume(d, p_of(2.0));
            let oracle =
                d as f64 / 2.0 * std::f64::consts::PI.ln() - ln_gamma_one_plus_half(d as u64);
            ensure!(
                (implementation - oracle).abs() <= 1e-10,
                "p=2, d={d}: log volume {implementation} vs half-integer oracle {oracle}"
            );
        }
        for d in 1..=20usize {
            let implementation = log_unit_ball_volume(d, p_of(1.0));
            let oracle = d as f64 * std::f64::consts::LN_2 - ln_factorial(d as u64);
            ensure!(
                (implementation - oracle).abs() <= 1e-10,
                "p=1, d={d}: log volume {implementation} vs factorial oracle {oracle}"
            );
        }
        let mut rendered = Vec::new();
        for p_value in [1.0, 2.0, 3.0] {
            let (value, limit) =
                ball_volume_limit_check(10_000, p_of(p_value)).map_err(|e| e.to_string())?;
            ensure!(
                value <= limit,
                "p={p_value}: d^(1/p)·V^(1/d) = {value:.6} exceeds limit {limit:.6}"
            );
            rendered.push(format!("{value:.4} ≤ {limit:.4}"));
        }
        let (value, limit) = ball_volume_limit_check(10_000, p_of(2.0)).unwrap();
        ensure!(
            (value - 4.130_592_164_894_113_8).abs() <= 1e-12 * value,
            "p=2 limit-check value drifted: {value}"
        );
        ensure!(
            (limit - 4.663_287_963_194_248_4).abs() <= 1e-12 * limit,
            "p=2 limit drifted: {limit}"
        );
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1 s");
        Ok(format!(
            "70 volume identities and limits [{}] in {:.2?}",
            rendered.join("; "),
            elapsed
        ))
    })();
    report(6, "unit-ball volume and Stirling limit", outcome);
}

/// Reference moments of ‖Y‖² computed directly from the spectrum with plain
/// sums, independent of the library helper.
fn spectrum_reference(stddevs: &[f64]) -> (f64, f64, f64) {
    let sum_l2: f64 = stddevs.iter().map(|l| l * l).sum();
    let sum_l4: f64 = stddevs.iter().map(|l| l.powi(4)).sum();
    let sum_l8: f64 = stddevs.iter().map(|l| l.powi(8)).sum();
    (sum_l2, sum_l4, sum_l8)
}

/// Sample mean and variance of ‖Y‖², centered at the analytic mean so the
/// accumulations stay at the scale of the fluctuations.
fn sampled_norm_moments(stddevs: &[f64], unit: u16, trials: usize) -> (f64, f64) {
    let d = stddevs.len();
    let spec = DistributionSpec::gaussian_ellipsoid(vec![0.0; d], stddevs.to_vec()).unwrap();
    let (center, _, _) = spectrum_reference(stddevs);
    let mut rng = stream::derive_stream(
        777,
        stream::LaneKey::new(0, stream::StreamRole::Distance, unit, 0),
    );
    let mut point = vec![0.0; d];
    let mut shifted = CompensatedSum::new();
    let mut shifted_sq = CompensatedSum::new();
    for _ in 0..trials {
        spec.sample_into(&mut rng, &mut point);
        let mut norm_sq = CompensatedSum::new();
        for value in &point {
            norm_sq.add(value * value);
        }
        let excess = norm_sq.value() - center;
        shifted.add(excess);
        shifted_sq.add(excess * excess);
    }
    let t = trials as f64;
    let mean_excess = shifted.value() / t;
    let variance = (shifted_sq.value() - t * mean_excess * mean_excess) / (t - 1.0);
    (center + mean_excess, variance)
}

#[test]
fn criterion_7_gaussian_bound_and_moments() {
    let outcome = (|| {
        let start = Instant::now();
        let ones = vec![1.0; 1000];
        let epsilon = eps_of(0.5);
        let bound = chebyshev_gaussian_deviation_bound(&ones, epsilon).map_err(|e| e.to_string())?;
        // 2·Σλ⁴/(δ²(Σλ²)²) with δ(0.5, 2) = 5/13 gives exactly 0.01352.
        ensure!(
            (bound - 0.013_52).abs() <= 1e-12 * bound,
            "identity-spectrum Chebyshev bound drifted: {bound}"
        );
        let trials = 100_000;
        let estimate = estimate_deviation_probability(
            &DistributionSpec::gaussian_ellipsoid(vec![0.0; 1000], ones.clone()).unwrap(),
            &vec![0.0; 1000],
            p_of(2.0),
            1000.0,
            delta(epsilon, p_of(2.0)),
            trials,
            606,
            0.95,
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            estimate.estimate <= bound + 4.0 * binomial_se(estimate.estimate, trials),
            "empirical band-violation frequency {:.6} exceeds Chebyshev bound {bound:.6}",
            estimate.estimate
        );

        let decaying: Vec<f64> = (1..=1000).map(|j| 1.0 / (j as f64).sqrt()).collect();
        let geometric: Vec<f64> = (1..=500).map(|j| 2.0 * 0.99f64.powi(j)).collect();
        let moment_trials = 20_000;
        for (index, spectrum) in [&ones, &decaying, &geometric].into_iter().enumerate() {
            let (sum_l2, sum_l4, sum_l8) = spectrum_reference(spectrum);
            let (helper_mean, helper_var) = gaussian_squared_norm_moments(spectrum);
            ensure!(
                (helper_mean - sum_l2).abs() <= 1e-12 * sum_l2
                    && (helper_var - 2.0 * sum_l4).abs() <= 1e-12 * 2.0 * sum_l4,
                "spectrum {index}: helper moments disagree with direct sums"
            );
            let (mean, variance) = sampled_norm_moments(spectrum, index as u16, moment_trials);
            let mean_se = (2.0 * sum_l4 / moment_trials as f64).sqrt();
            ensure!(
                (mean - sum_l2).abs() <= 4.0 * mean_se,
                "spectrum {index}: sampled mean {mean:.4} vs Σλ² = {sum_l2:.4} (se {mean_se:.4})"
            );
            let var_se =
                ((48.0 * sum_l8 + 8.0 * sum_l4 * sum_l4) / moment_trials as f64).sqrt();
            ensure!(
                (variance - 2.0 * sum_l4).abs() <= 4.0 * var_se,
                "spectrum {index}: sampled variance {variance:.4} vs 2Σλ⁴ = {:.4} (se {var_se:.4})",
                2.0 * sum_l4
            );
        }
        let elapsed = start.elapsed();
        ensure!(
            elapsed < Duration::from_secs(120),
            "took {elapsed:?}, budget 2 min"
        );
        Ok(format!(
            "bound {bound:.6} honored, three spectra matched (Σλ², 2Σλ⁴) in {elapsed:.2?}"
        ))
    })();
    report(7, "Gaussian Chebyshev bound and norm moments", outcome);
}

#[test]
fn criterion_8_determinism_under_parallelism() {
    let outcome = (|| {
        let (parallel, _) = batch();
        let (serial, _) = pool(1).install(run_core_batch);
        ensure!(
            serial == *parallel,
            "worker counts 1 and 8 disagreed on at least one aggregate output"
        );
        let outputs = serial.oracle.len()
            + serial.deviation.len()
            + serial.instability.len()
            + serial.trend.len()
            + 1;
        Ok(format!(
            "{outputs} aggregate outputs bit-identical across worker counts 1 and 8"
        ))
    })();
    report(8, "bit-identical results across worker counts", outcome);
}

#[test]
fn criterion_9_volume_and_largeness_spot_values() {
    let outcome = (|| {
        let start = Instant::now();
        let volume = stable_volume_lower_bound(0.01, 0.995, 1.0).map_err(|e| e.to_string())?;
        let volume_reference = 0.005_025_125_628_140_703_5;
        ensure!(
            (volume - volume_reference).abs() <= 1e-12 * volume_reference,
            "stable-volume spot value drifted: {volume}"
        );
        let ratio = largeness_ratio(0.9, 500, 0.005).map_err(|e| e.to_string())?;
        let ratio_reference = -47.381_940_462_365_114;
        ensure!(
            (ratio - ratio_reference).abs() <= 1e-12 * ratio_reference.abs(),
            "largeness log-ratio spot value drifted: {ratio}"
        );
        let elapsed = start.elapsed();
        ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1 s");
        Ok(format!(
            "volume {volume:.10} and log-ratio {ratio:.6} at 1e−12 relative in {elapsed:.2?}"
        ))
    })();
    report(9, "stable-volume and largeness spot values", outcome);
}
