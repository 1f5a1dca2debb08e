//! p-norm geometry and the contrast predicates that every estimator consumes:
//! distances, the δ(ε,p) band half-width, and the instability/stability events.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("p-norm exponent must be a positive finite real, got {0}")]
    InvalidExponent(f64),
    #[error("operation requires a true norm (p >= 1), got p = {0}")]
    ExponentBelowOne(f64),
    #[error("contrast slack epsilon must be a positive finite real, got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("input coordinate is not finite")]
    NonFiniteCoordinate,
    #[error("distance set must be nonempty")]
    EmptyDistanceSet,
    #[error("distances must be finite and nonnegative, got {0}")]
    InvalidDistance(f64),
}

/// Exponent of the p-norm. Strictly positive by construction; callers that need a
/// genuine norm (triangle inequality, ball volumes) must pass through
/// [`PNorm::require_norm`], which rejects `p < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PNorm(f64);

impl PNorm {
    pub fn new(p: f64) -> Result<Self, MetricError> {
        if p.is_finite() && p > 0.0 {
            Ok(Self(p))
        } else {
            Err(MetricError::InvalidExponent(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Gate for operations that are only valid when `|.|_p` is an actual norm.
    pub fn require_norm(self) -> Result<Self, MetricError> {
        if self.0 >= 1.0 {
            Ok(self)
        } else {
            Err(MetricError::ExponentBelowOne(self.0))
        }
    }
}

/// Relative contrast slack ε > 0: a query is unstable when the farthest dataset
/// point is within a factor (1+ε) of the nearest one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self, MetricError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(MetricError::InvalidEpsilon(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The contrast factor 1 + ε.
    pub fn factor(self) -> f64 {
        1.0 + self.0
    }
}

/// Distances from one query point to each dataset point. Nonempty with finite,
/// nonnegative entries, so `min`/`max` are total and need no `Option`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSet(Vec<f64>);

impl DistanceSet {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::EmptyDistanceSet);
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(MetricError::InvalidDistance(v));
            }
        }
        Ok(Self(values))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }
}

/// Kahan–Neumaier compensated accumulator. Distance sums over as many as 10^6
/// coordinates feed tests with tight analytic tolerances, so the naive-sum
/// rounding drift is not acceptable.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Raw p-th power sum Σ_j |x_j − y_j|^p. Exposed separately from [`p_distance`]
/// because the concentration band is stated on power sums and re-rooting would
/// both waste work and lose precision.
pub fn p_power_sum(x: &[f64], y: &[f64], p: PNorm) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pv = p.get();
    let mut acc = CompensatedSum::new();
    for (&a, &b) in x.iter().zip(y) {
        if !a.is_finite() || !b.is_finite() {
            return Err(MetricError::NonFiniteCoordinate);
        }
        let diff = (a - b).abs();
        // p = 1 and p = 2 are the hot paths in every experiment loop.
        let term = if pv == 1.0 {
            diff
        } else if pv == 2.0 {
            diff * diff
        } else {
            diff.powf(pv)
        };
        acc.add(term);
    }
    Ok(acc.value())
}

/// Recover the distance from a p-th power sum.
pub fn p_distance_from_power_sum(power_sum: f64, p: PNorm) -> f64 {
    let pv = p.get();
    if pv == 1.0 {
        power_sum
    } else if pv == 2.0 {
        power_sum.sqrt()
    } else {
        power_sum.powf(1.0 / pv)
    }
}

/// The p-norm distance (Σ_j |x_j − y_j|^p)^{1/p}.
pub fn p_distance(x: &[f64], y: &[f64], p: PNorm) -> Result<f64, MetricError> {
    Ok(p_distance_from_power_sum(p_power_sum(x, y, p)?, p))
}

/// Band half-width δ(ε,p) = ((1+ε)^p − 1)/((1+ε)^p + 1).
///
/// Evaluated through expm1/ln_1p so that ε as small as 1e−6 keeps full relative
/// precision: (1+ε)^p − 1 = expm1(p·ln_1p(ε)) has no cancelling subtraction.
///
/// The value lives in [0, 1): once p·ln(1+ε) ≳ 37 the true value 1 − 2/((1+ε)^p+1)
/// rounds to 1.0 in f64, so it is pinned to the largest double below 1 to keep
/// the half-open codomain (and the `band_check` precondition) intact.
pub fn delta(epsilon: Epsilon, p: PNorm) -> f64 {
    let growth = (p.get() * epsilon.get().ln_1p()).exp_m1();
    (growth / (growth + 2.0)).min(1.0 - f64::EPSILON / 2.0)
}

/// The instability event: every dataset point lies within factor (1+ε) of the
/// nearest one. Ties (max exactly equal to (1+ε)·min) count as unstable; the
/// stability classifier uses z ≥ 0 and counts the same boundary as stable, a
/// deliberate measure-zero overlap between the two definitions.
pub fn instability_event(dists: &DistanceSet, epsilon: Epsilon) -> bool {
    dists.max() <= epsilon.factor() * dists.min()
}

/// z = max − (1+ε)·min. Negative exactly when the query is strictly unstable;
/// z ≥ 0 is the stability event (ties stable).
pub fn z_statistic(dists: &DistanceSet, epsilon: Epsilon) -> f64 {
    dists.max() - epsilon.factor() * dists.min()
}

/// True iff every power sum s satisfies |s − γ| ≤ γ·δ. When this holds with
/// δ = delta(ε,p), the rooted distances are guaranteed unstable (the band
/// implication property test exercises exactly that chain).
pub fn band_check(p_power_dists: &[f64], gamma: f64, delta_value: f64) -> bool {
    debug_assert!(gamma >= 0.0, "gamma must be nonnegative");
    debug_assert!(
        (0.0..1.0).contains(&delta_value),
        "delta must lie in [0, 1)"
    );
    p_power_dists
        .iter()
        .all(|&s| (s - gamma).abs() <= gamma * delta_value)
}
