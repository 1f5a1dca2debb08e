//! Numerical laboratory for nearest-neighbor stability in high dimension.
//!
//! The crate has two halves that deliberately mirror each other:
//!
//! * [`bounds`] evaluates closed-form theory — concentration tails on p-power
//!   distances, the derived lower bounds on the probability that every dataset
//!   point is an approximate nearest neighbor, unit-ball volume machinery, and
//!   the stable-volume diagnostics — all parameterized over log n so that
//!   exponentially growing dataset sizes never overflow.
//! * [`montecarlo`] estimates the same quantities empirically with seeded,
//!   stream-split randomness, confidence intervals, and bit-for-bit
//!   reproducibility across thread counts.
//!
//! [`metric`] supplies the shared p-norm geometry (power sums, the δ band
//! half-width, the instability event) and [`distributions`] the point laws
//! (uniform cube, slab mixture, diagonal Gaussian) both halves consume.
//! [`special`] holds the log-gamma evaluation the volume formulas need.

pub mod bounds;
pub mod distributions;
pub mod metric;
pub mod montecarlo;
pub mod special;

pub use bounds::{BoundReport, BoundsError, DatasetSizeRule};
pub use distributions::{DensityBoundRule, DistributionError, DistributionSpec, QuerySpec};
pub use metric::{delta, instability_event, z_statistic, Epsilon, MetricError, PNorm};
pub use montecarlo::{
    EstimateWithCI, ExperimentConfig, MonteCarloError, StabilityClassification,
    StableRegionEstimate, TrialOutcome,
};
