//! Seeded Monte Carlo estimators for every probabilistic quantity the bounds
//! module treats analytically: the instability probability over fresh
//! datasets, band-deviation frequencies, E[Z]/d^{1/p}, per-query stability
//! classification, the stable-region volume fraction, and the relative
//! variance/contrast concentration diagnostics.
//!
//! Reproducibility contract: every estimate is a pure function of its
//! configuration (seed included). Work units draw from streams derived in
//! [`stream`], aggregation is order-insensitive (exact counts, compensated
//! sums over index-ordered buffers), so results are bit-identical for any
//! worker count.

pub mod stream;

use crate::bounds::BoundsError;
use crate::distributions::{validate_query_point, DistributionError, DistributionSpec, QuerySpec};
use crate::metric::{
    p_distance_from_power_sum, p_power_sum, CompensatedSum, Epsilon, MetricError, PNorm,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};
use std::fmt;
use stream::{derive_stream, LaneKey, StreamRole};
use thiserror::Error;

pub use crate::bounds::DatasetSizeRule;
pub use stream::STREAM_ALGORITHM;

/// Trials per query at which a Wilson interval at 95% resolves frequencies
/// near the 1−ζ ≤ 0.01 classification threshold instead of straddling it.
pub const DEFAULT_CLASSIFICATION_TRIALS: usize = 2000;
/// Fixed resample count for bootstrap intervals.
pub const BOOTSTRAP_RESAMPLES: u32 = 200;

#[derive(Debug, Error, PartialEq)]
pub enum MonteCarloError {
    #[error("estimator needs at least {needed} trials, got {got}")]
    TrialsTooFew { needed: usize, got: usize },
    #[error("trial count {0} exceeds the 32-bit trial-lane capacity")]
    TrialsExceedLane(usize),
    #[error("per-trial workload n·d = {required} values exceeds the memory cap {cap}")]
    MemoryCapExceeded { required: u128, cap: u64 },
    #[error("confidence level must lie in (0,1), got {0}")]
    InvalidConfidence(f64),
    #[error("band center gamma must be nonnegative, got {0}")]
    InvalidGamma(f64),
    #[error("estimator needs a dataset of at least {needed} points, got {got}")]
    DatasetTooSmall { needed: u64, got: u64 },
    #[error("query count must lie in 1..=65535 (16-bit unit lane), got {0}")]
    InvalidQueryCount(usize),
    #[error("mean distance is zero; relative variance is undefined")]
    DegenerateDistances,
    #[error("every trial had zero minimum distance; relative contrast is undefined")]
    AllTrialsDegenerate,
    #[error(transparent)]
    Size(#[from] BoundsError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Interval construction used for an [`EstimateWithCI`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    WilsonScore,
    NormalApproximation,
    BootstrapPercentile,
    OrderStatisticMedian,
}

impl fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WilsonScore => "wilson-score",
            Self::NormalApproximation => "normal-approximation",
            Self::BootstrapPercentile => "bootstrap-percentile",
            Self::OrderStatisticMedian => "order-statistic-median",
        })
    }
}

/// A Monte Carlo estimate with its confidence interval and provenance.
/// Invariant: ci_low ≤ estimate ≤ ci_high.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trials that entered the estimate (excluded trials are reported by the
    /// estimator that excluded them).
    pub trials: usize,
    pub seed: u64,
    pub method: EstimateMethod,
}

/// One Bernoulli realization of the instability experiment: the distance
/// extremes from the query to a freshly sampled dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub d_min: f64,
    pub d_max: f64,
    /// z = d_max − (1+ε)·d_min; nonnegative means the query resolved stably.
    pub z: f64,
    /// The instability event d_max ≤ (1+ε)·d_min. At the exact boundary both
    /// `unstable` and z ≥ 0 hold; the two predicates deliberately overlap there.
    pub unstable: bool,
}

impl TrialOutcome {
    pub fn from_extremes(d_min: f64, d_max: f64, epsilon: Epsilon) -> Self {
        debug_assert!(d_min <= d_max, "extreme distances out of order");
        let threshold = epsilon.factor() * d_min;
        Self {
            d_min,
            d_max,
            z: d_max - threshold,
            unstable: d_max <= threshold,
        }
    }
}

/// Everything one estimation task needs: the law, how n scales with d, the
/// geometry (p, ε), query policy, trial budget, and the seed that makes the
/// whole run replayable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    spec: DistributionSpec,
    size_rule: DatasetSizeRule,
    p: PNorm,
    epsilon: Epsilon,
    query: QuerySpec,
    trials: usize,
    zeta: f64,
    confidence: f64,
    seed: u64,
    sweep_index: u16,
    memory_cap: u64,
}

impl ExperimentConfig {
    pub const DEFAULT_ZETA: f64 = 0.995;
    pub const DEFAULT_CONFIDENCE: f64 = 0.95;
    /// Per-trial sampled-value budget n·d; estimation samples n(d) points per
    /// trial, so exponential size rules are estimation-eligible only at small d
    /// (the bounds side handles large-d exponential regimes in log space).
    pub const DEFAULT_MEMORY_CAP: u64 = 1 << 31;

    pub fn new(
        spec: DistributionSpec,
        size_rule: DatasetSizeRule,
        p: PNorm,
        epsilon: Epsilon,
        query: QuerySpec,
        trials: usize,
        seed: u64,
    ) -> Result<Self, MonteCarloError> {
        if trials == 0 {
            return Err(MonteCarloError::TrialsTooFew {
                needed: 1,
                got: trials,
            });
        }
        if trials > u32::MAX as usize {
            return Err(MonteCarloError::TrialsExceedLane(trials));
        }
        Ok(Self {
            spec,
            size_rule,
            p,
            epsilon,
            query,
            trials,
            zeta: Self::DEFAULT_ZETA,
            confidence: Self::DEFAULT_CONFIDENCE,
            seed,
            sweep_index: 0,
            memory_cap: Self::DEFAULT_MEMORY_CAP,
        })
    }

    pub fn with_zeta(mut self, zeta: f64) -> Result<Self, MonteCarloError> {
        crate::bounds::check_zeta(zeta)?;
        self.zeta = zeta;
        Ok(self)
    }

    pub fn with_confidence(mut self, level: f64) -> Result<Self, MonteCarloError> {
        if !level.is_finite() || level <= 0.0 || level >= 1.0 {
            return Err(MonteCarloError::InvalidConfidence(level));
        }
        self.confidence = level;
        Ok(self)
    }

    /// Sweep position, separating the random streams of derived configurations
    /// that share one seed. Panics beyond the 12-bit lane budget (callers
    /// validate sweep sizes before deriving configurations).
    pub fn with_sweep_index(mut self, index: u16) -> Self {
        assert!(index <= stream::MAX_SWEEP_INDEX);
        self.sweep_index = index;
        self
    }

    pub fn with_memory_cap(mut self, cap: u64) -> Self {
        self.memory_cap = cap;
        self
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.dim()
    }

    pub fn size_rule(&self) -> &DatasetSizeRule {
        &self.size_rule
    }

    pub fn p(&self) -> PNorm {
        self.p
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn query(&self) -> &QuerySpec {
        &self.query
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sweep_index(&self) -> u16 {
        self.sweep_index
    }

    /// Concrete dataset size for this dimension, after checking the per-trial
    /// workload n·d against the memory cap.
    pub fn realized_n(&self) -> Result<u64, MonteCarloError> {
        let n = self.size_rule.realize(self.spec.dim())?;
        let required = n as u128 * self.spec.dim() as u128;
        if required > self.memory_cap as u128 {
            return Err(MonteCarloError::MemoryCapExceeded {
                required,
                cap: self.memory_cap,
            });
        }
        Ok(n)
    }
}

/// One trial: stream n fresh dataset points, track the extreme p-power sums to
/// the query, root them at the end. Dataset draws are sequential on the
/// trial's own stream, so a size-n dataset is always a prefix of the size-n+1
/// dataset under the same (seed, lane) — the coupling behind the exact
/// monotonicity-in-n property.
fn trial_outcome(
    config: &ExperimentConfig,
    n: u64,
    query: &[f64],
    unit: u16,
    trial: u32,
    point: &mut Vec<f64>,
) -> TrialOutcome {
    point.resize(config.spec.dim(), 0.0);
    let mut rng = derive_stream(
        config.seed,
        LaneKey::new(config.sweep_index, StreamRole::Dataset, unit, trial),
    );
    let mut min_sum = f64::INFINITY;
    let mut max_sum = f64::NEG_INFINITY;
    for _ in 0..n {
        config.spec.sample_into(&mut rng, point);
        let s = p_power_sum(point, query, config.p)
            .expect("sampled points are finite and match the validated query dimension");
        min_sum = min_sum.min(s);
        max_sum = max_sum.max(s);
    }
    TrialOutcome::from_extremes(
        p_distance_from_power_sum(min_sum, config.p),
        p_distance_from_power_sum(max_sum, config.p),
        config.epsilon,
    )
}

/// One Bernoulli realization of the instability experiment for a fixed query.
pub fn run_trial(
    config: &ExperimentConfig,
    query: &[f64],
    trial: u32,
) -> Result<TrialOutcome, MonteCarloError> {
    validate_query_point(&config.spec, query)?;
    let n = config.realized_n()?;
    Ok(trial_outcome(config, n, query, 0, trial, &mut Vec::new()))
}

/// Index-ordered outcomes of all configured trials for one (query, unit).
fn collect_outcomes(
    config: &ExperimentConfig,
    query: &[f64],
    unit: u16,
) -> Result<Vec<TrialOutcome>, MonteCarloError> {
    validate_query_point(&config.spec, query)?;
    let n = config.realized_n()?;
    Ok((0..config.trials as u32)
        .into_par_iter()
        .map_init(Vec::new, |point, trial| {
            trial_outcome(config, n, query, unit, trial, point)
        })
        .collect())
}

/// Wilson score interval for `successes` out of `trials` at the given level.
/// Always contains the point estimate; degenerate counts pin the matching
/// endpoint exactly (0 successes → low = 0, all successes → high = 1).
///
/// # Panics
/// If `successes > trials`, `trials` is 0, or `level` is outside (0,1); these
/// are programming errors at call sites, not data conditions.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials >= 1, "wilson interval needs at least one trial");
    assert!(successes <= trials, "more successes than trials");
    assert!(
        level > 0.0 && level < 1.0,
        "confidence level must lie in (0,1)"
    );
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z = normal_quantile(0.5 + level / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

fn normal_quantile(q: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal parameters are valid")
        .inverse_cdf(q)
}

fn wilson_estimate(
    successes: u64,
    trials: usize,
    level: f64,
    seed: u64,
) -> EstimateWithCI {
    let (ci_low, ci_high) = wilson_interval(successes, trials as u64, level);
    EstimateWithCI {
        estimate: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        trials,
        seed,
        method: EstimateMethod::WilsonScore,
    }
}

/// P̂[instability] for a fixed query: the fraction of trials in which every
/// point of a fresh dataset lay within factor (1+ε) of the nearest one.
pub fn estimate_instability_probability(
    config: &ExperimentConfig,
    query: &[f64],
) -> Result<EstimateWithCI, MonteCarloError> {
    let outcomes = collect_outcomes(config, query, 0)?;
    let unstable = outcomes.iter().filter(|o| o.unstable).count() as u64;
    Ok(wilson_estimate(
        unstable,
        config.trials,
        config.confidence,
        config.seed,
    ))
}

/// Empirical frequency of the band-violation event |‖Y−q‖_p^p − γ| > γδ over
/// single-point draws: the Monte Carlo oracle for the deviation tail bounds.
/// Unlike the band predicate, `delta_value` may be ≥ 1 here (the band then
/// covers the support and the frequency is 0). Interval: Wilson at `level`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_deviation_probability(
    spec: &DistributionSpec,
    query: &[f64],
    p: PNorm,
    gamma: f64,
    delta_value: f64,
    trials: usize,
    seed: u64,
    level: f64,
) -> Result<EstimateWithCI, MonteCarloError> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(MonteCarloError::InvalidGamma(gamma));
    }
    if trials == 0 {
        return Err(MonteCarloError::TrialsTooFew {
            needed: 1,
            got: trials,
        });
    }
    if trials > u32::MAX as usize {
        return Err(MonteCarloError::TrialsExceedLane(trials));
    }
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(MonteCarloError::InvalidConfidence(level));
    }
    validate_query_point(spec, query)?;
    let violations: u64 = (0..trials as u32)
        .into_par_iter()
        .map_init(Vec::new, |point: &mut Vec<f64>, trial| {
            point.resize(spec.dim(), 0.0);
            let mut rng = derive_stream(seed, LaneKey::new(0, StreamRole::Deviation, 0, trial));
            spec.sample_into(&mut rng, point);
            let s = p_power_sum(point, query, p)
                .expect("sampled points are finite and match the validated query dimension");
            u64::from((s - gamma).abs() > gamma * delta_value)
        })
        .sum();
    Ok(wilson_estimate(violations, trials, level, seed))
}

/// Sample mean of Z/d^{1/p} where each trial draws the query as an independent
/// extra point from the law itself (the n+1st draw), then measures
/// Z = D_max − (1+ε)·D_min against a fresh n-point dataset. Interval:
/// normal approximation, which is why at least two trials are required.
pub fn estimate_expected_z_ratio(
    config: &ExperimentConfig,
) -> Result<EstimateWithCI, MonteCarloError> {
    if config.trials < 2 {
        return Err(MonteCarloError::TrialsTooFew {
            needed: 2,
            got: config.trials,
        });
    }
    let n = config.realized_n()?;
    let d = config.spec.dim();
    let scale = (d as f64).powf(1.0 / config.p.get());
    let values: Vec<f64> = (0..config.trials as u32)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(query, point), trial| {
                let mut rng = derive_stream(
                    config.seed,
                    LaneKey::new(config.sweep_index, StreamRole::QueryDraw, 0, trial),
                );
                query.resize(d, 0.0);
                config.spec.sample_into(&mut rng, query);
                trial_outcome(config, n, query, 0, trial, point).z / scale
            },
        )
        .collect();
    let (mean, sd) = mean_and_sd(&values);
    let half = normal_quantile(0.5 + config.confidence / 2.0) * sd / (values.len() as f64).sqrt();
    Ok(EstimateWithCI {
        estimate: mean,
        ci_low: mean - half,
        ci_high: mean + half,
        trials: config.trials,
        seed: config.seed,
        method: EstimateMethod::NormalApproximation,
    })
}

/// Compensated two-pass mean and sample standard deviation (n−1 denominator).
fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.value() / values.len() as f64;
    let mut squares = CompensatedSum::new();
    for &v in values {
        let centered = v - mean;
        squares.add(centered * centered);
    }
    (mean, (squares.value() / (values.len() - 1) as f64).sqrt())
}

/// Verdict on one query: is Pr[Z ≥ 0] at least 1−ζ?
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityClassification {
    /// Whether the observed frequency of z ≥ 0 reached the 1−ζ threshold.
    pub stable: bool,
    /// Set when the frequency's interval straddles the threshold; the verdict
    /// then reflects the point estimate only and should not be trusted.
    pub indeterminate: bool,
    /// Observed frequency of z ≥ 0 with its Wilson interval.
    pub frequency: EstimateWithCI,
}

fn classify_with_unit(
    config: &ExperimentConfig,
    query: &[f64],
    unit: u16,
) -> Result<StabilityClassification, MonteCarloError> {
    let outcomes = collect_outcomes(config, query, unit)?;
    let stable_trials = outcomes.iter().filter(|o| o.z >= 0.0).count() as u64;
    let frequency = wilson_estimate(stable_trials, config.trials, config.confidence, config.seed);
    let threshold = 1.0 - config.zeta;
    Ok(StabilityClassification {
        stable: frequency.estimate >= threshold,
        indeterminate: frequency.ci_low < threshold && threshold < frequency.ci_high,
        frequency,
    })
}

/// Classify a single query as ζ-stable: stable iff the empirical frequency of
/// z ≥ 0 (ties counted stable) reaches 1−ζ. A frequency interval straddling
/// the threshold sets the `indeterminate` flag instead of silently guessing;
/// [`DEFAULT_CLASSIFICATION_TRIALS`] trials resolve the default threshold.
pub fn classify_query_stability(
    config: &ExperimentConfig,
    query: &[f64],
) -> Result<StabilityClassification, MonteCarloError> {
    classify_with_unit(config, query, 0)
}

/// One query's record inside a stable-region estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryStabilityRecord {
    pub query: Vec<f64>,
    pub classification: StabilityClassification,
}

/// Empirical proxy for the stable fraction of the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableRegionEstimate {
    /// (# decisively stable queries) / (# queries), with a Wilson interval.
    pub stable_fraction: EstimateWithCI,
    pub zeta: f64,
    pub n_stable: usize,
    pub n_unstable: usize,
    /// Queries whose frequency interval straddled 1−ζ; counted separately and
    /// never as stable.
    pub n_indeterminate: usize,
    pub per_query: Vec<QueryStabilityRecord>,
}

/// Estimate the volume fraction of stable queries: draw `n_queries` uniform
/// on [0,1]^d, classify each against fresh datasets (each query owns its own
/// stream unit), and report the decisively-stable fraction.
pub fn estimate_stable_fraction(
    config: &ExperimentConfig,
    n_queries: usize,
) -> Result<StableRegionEstimate, MonteCarloError> {
    if n_queries == 0 || n_queries > u16::MAX as usize {
        return Err(MonteCarloError::InvalidQueryCount(n_queries));
    }
    config.realized_n()?;
    let d = config.spec.dim();
    let per_query: Vec<QueryStabilityRecord> = (0..n_queries as u16)
        .into_par_iter()
        .map(|unit| {
            let mut rng = derive_stream(
                config.seed,
                LaneKey::new(config.sweep_index, StreamRole::QueryDraw, unit, 0),
            );
            let query: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let classification = classify_with_unit(config, &query, unit)?;
            Ok(QueryStabilityRecord {
                query,
                classification,
            })
        })
        .collect::<Result<_, MonteCarloError>>()?;
    let n_indeterminate = per_query
        .iter()
        .filter(|r| r.classification.indeterminate)
        .count();
    let n_stable = per_query
        .iter()
        .filter(|r| r.classification.stable && !r.classification.indeterminate)
        .count();
    Ok(StableRegionEstimate {
        stable_fraction: wilson_estimate(
            n_stable as u64,
            n_queries,
            config.confidence,
            config.seed,
        ),
        zeta: config.zeta,
        n_stable,
        n_unstable: n_queries - n_stable - n_indeterminate,
        n_indeterminate,
        per_query,
    })
}

/// DIAGNOSTIC ONLY — dataset-reuse mode. All queries are scored against one
/// shared dataset realization (replayed from a single stream, never
/// materialized), so each query yields a deterministic z and the reported
/// interval captures query-sampling noise only, not dataset noise. Use it to
/// measure how much reuse correlates per-query verdicts; use
/// [`estimate_stable_fraction`] for the actual quantity.
pub fn estimate_stable_fraction_shared_dataset(
    config: &ExperimentConfig,
    n_queries: usize,
) -> Result<EstimateWithCI, MonteCarloError> {
    if n_queries == 0 || n_queries > u16::MAX as usize {
        return Err(MonteCarloError::InvalidQueryCount(n_queries));
    }
    let n = config.realized_n()?;
    let d = config.spec.dim();
    let stable: u64 = (0..n_queries as u16)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(query, point), unit| {
                let mut rng = derive_stream(
                    config.seed,
                    LaneKey::new(config.sweep_index, StreamRole::QueryDraw, unit, 0),
                );
                query.resize(d, 0.0);
                for slot in query.iter_mut() {
                    *slot = rng.random();
                }
                // Trial 0 of unit 0 for every query: the same dataset draw,
                // replayed rather than stored.
                let outcome = trial_outcome(config, n, query, 0, 0, point);
                u64::from(outcome.z >= 0.0)
            },
        )
        .sum();
    Ok(wilson_estimate(
        stable,
        n_queries,
        config.confidence,
        config.seed,
    ))
}

/// Plug-in relative variance of the distance from `query` to a single draw:
/// sample variance over squared sample mean, with a bootstrap percentile
/// interval ([`BOOTSTRAP_RESAMPLES`] resamples, widened to contain the point
/// estimate). Vanishing mean distance is reported as an error, not a NaN.
pub fn estimate_relative_variance(
    spec: &DistributionSpec,
    query: &[f64],
    p: PNorm,
    trials: usize,
    seed: u64,
    level: f64,
) -> Result<EstimateWithCI, MonteCarloError> {
    if trials < 2 {
        return Err(MonteCarloError::TrialsTooFew {
            needed: 2,
            got: trials,
        });
    }
    if trials > u32::MAX as usize {
        return Err(MonteCarloError::TrialsExceedLane(trials));
    }
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(MonteCarloError::InvalidConfidence(level));
    }
    validate_query_point(spec, query)?;
    let distances: Vec<f64> = (0..trials as u32)
        .into_par_iter()
        .map_init(Vec::new, |point: &mut Vec<f64>, trial| {
            point.resize(spec.dim(), 0.0);
            let mut rng = derive_stream(seed, LaneKey::new(0, StreamRole::Distance, 0, trial));
            spec.sample_into(&mut rng, point);
            p_distance_from_power_sum(
                p_power_sum(point, query, p)
                    .expect("sampled points are finite and match the validated query dimension"),
                p,
            )
        })
        .collect();
    let estimate = relative_variance_of(&distances).ok_or(MonteCarloError::DegenerateDistances)?;

    let mut resample = vec![0.0f64; trials];
    let mut ratios = Vec::with_capacity(BOOTSTRAP_RESAMPLES as usize);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = derive_stream(seed, LaneKey::new(0, StreamRole::Bootstrap, 0, b));
        for slot in resample.iter_mut() {
            *slot = distances[rng.random_range(0..trials)];
        }
        if let Some(ratio) = relative_variance_of(&resample) {
            ratios.push(ratio);
        }
    }
    let (ci_low, ci_high) = percentile_interval(&mut ratios, level, estimate);
    Ok(EstimateWithCI {
        estimate,
        ci_low,
        ci_high,
        trials,
        seed,
        method: EstimateMethod::BootstrapPercentile,
    })
}

/// s² / mean² for one sample, or None when the mean vanishes.
fn relative_variance_of(values: &[f64]) -> Option<f64> {
    let (mean, sd) = mean_and_sd(values);
    if mean <= 0.0 {
        return None;
    }
    Some((sd / mean) * (sd / mean))
}

/// Percentile bootstrap interval, widened to contain the point estimate so the
/// EstimateWithCI ordering invariant holds even for skewed resamples.
fn percentile_interval(ratios: &mut [f64], level: f64, estimate: f64) -> (f64, f64) {
    if ratios.is_empty() {
        return (estimate, estimate);
    }
    ratios.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let top = (ratios.len() - 1) as f64;
    let lo_idx = (alpha / 2.0 * top).round() as usize;
    let hi_idx = ((1.0 - alpha / 2.0) * top).round() as usize;
    (ratios[lo_idx].min(estimate), ratios[hi_idx].max(estimate))
}

/// Median relative contrast with its exclusion count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastEstimate {
    /// Median of (d_max − d_min)/d_min across trials, with an order-statistic
    /// interval; `trials` inside counts only the trials that entered.
    pub median: EstimateWithCI,
    /// Trials dropped because d_min was exactly 0 (contrast undefined there).
    pub excluded_zero_dmin: usize,
}

/// Median of the relative contrast (d_max − d_min)/d_min over instability
/// trials — the interpretable "how much nearer is the nearest point"
/// diagnostic. Needs a dataset of at least two points for the contrast to
/// measure anything.
pub fn estimate_relative_contrast(
    config: &ExperimentConfig,
    query: &[f64],
) -> Result<ContrastEstimate, MonteCarloError> {
    let n = config.realized_n()?;
    if n < 2 {
        return Err(MonteCarloError::DatasetTooSmall { needed: 2, got: n });
    }
    let outcomes = collect_outcomes(config, query, 0)?;
    let mut contrasts: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.d_min > 0.0)
        .map(|o| (o.d_max - o.d_min) / o.d_min)
        .collect();
    let excluded = outcomes.len() - contrasts.len();
    if contrasts.is_empty() {
        return Err(MonteCarloError::AllTrialsDegenerate);
    }
    contrasts.sort_by(f64::total_cmp);
    let m = contrasts.len();
    let median = if m % 2 == 1 {
        contrasts[m / 2]
    } else {
        0.5 * (contrasts[m / 2 - 1] + contrasts[m / 2])
    };
    let (lo_rank, hi_rank) = median_order_statistic_ranks(m, config.confidence);
    Ok(ContrastEstimate {
        median: EstimateWithCI {
            estimate: median,
            ci_low: contrasts[lo_rank],
            ci_high: contrasts[hi_rank],
            trials: m,
            seed: config.seed,
            method: EstimateMethod::OrderStatisticMedian,
        },
        excluded_zero_dmin: excluded,
    })
}

/// 0-based ranks (j−1, m−j) of the distribution-free median interval
/// [x_(j), x_(m+1−j)]: j is the largest rank with P[Bin(m,1/2) ≤ j−1] ≤ α/2,
/// so coverage is ≥ 1−α. For samples too small to achieve the level the full
/// range (j = 1) is returned — the widest interval the data can offer.
fn median_order_statistic_ranks(m: usize, level: f64) -> (usize, usize) {
    let alpha = 1.0 - level;
    let binomial = Binomial::new(0.5, m as u64).expect("1/2 is a valid probability");
    let mut j = 1usize;
    while j < m / 2 && binomial.cdf(j as u64) <= alpha / 2.0 {
        j += 1;
    }
    (j - 1, m - j)
}
